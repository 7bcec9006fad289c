//! Global degree-of-freedom spaces: the H(div)-conforming vector space of
//! Raviart-Thomas order `p` times the H1-conforming scalar space of degree
//! `p + 1` with zero boundary values.
//!
//! Coefficient layout: the vector block comes first (`n_rt` dofs: `p + 1`
//! Legendre edge moments per mesh edge, then `p (p + 1)` interior moments
//! per cell), followed by the constrained scalar block (`n_lag` dofs:
//! interior vertices, then `p` nodes per interior edge, then cell-interior
//! nodes). Scalar nodes on the boundary are excluded entirely, which
//! enforces the essential condition exactly and keeps the system positive
//! definite.
//!
//! Orientation handling: every mesh edge is directed from its lower to its
//! higher vertex index. A cell whose local traversal of an edge agrees
//! with that direction uses gather sign `+1`; a disagreeing cell reverses
//! the edge parameter, so its moment of Legendre order `q` picks up the
//! reflection parity `(-1)^(q+1)` (one extra sign because the outward
//! normal also flips). Scalar edge nodes are renumbered in reverse on a
//! disagreeing cell. These two rules are what make the global fields
//! H(div)- and C0-conforming.

use crate::element::{CellMap, NodeKind, ScalarBasis, VectorBasis};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{edge_rule, shifted_legendre, triangle_rule, TriangleRule};
use crate::vec2::{dot, Vec2};

/// Largest Raviart-Thomas order the global spaces support.
pub const MAX_ORDER: usize = 3;

/// Pointwise sample of the discrete multiplier pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub zeta: Vec2,
    pub div_zeta: f64,
    pub lambda: f64,
    pub grad_lambda: Vec2,
}

#[derive(Debug, Clone)]
pub struct DofSpace {
    pub mesh: Mesh,
    pub p: usize,
    pub vector_basis: VectorBasis,
    pub scalar_basis: ScalarBasis,
    pub cell_maps: Vec<CellMap>,
    pub n_rt: usize,
    pub n_lag: usize,
    /// Per cell: local vector dof -> (global vector dof, orientation sign).
    vector_gather: Vec<Vec<(usize, f64)>>,
    /// Per cell: local scalar node -> scalar-block index, `None` on the
    /// boundary. Add `n_rt` for the absolute coefficient index.
    scalar_gather: Vec<Vec<Option<usize>>>,
    /// Physical position of each scalar-block dof (interpolation points).
    scalar_dof_points: Vec<Vec2>,
}

/// Reference-element tables at a fixed quadrature rule, shared by all cells.
#[derive(Debug, Clone)]
pub struct ReferenceTables {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// `vec_vals[q][i]`: value of vector basis `i` at point `q`.
    pub vec_vals: Vec<Vec<Vec2>>,
    pub vec_divs: Vec<Vec<f64>>,
    pub scal_vals: Vec<Vec<f64>>,
    pub scal_grads: Vec<Vec<Vec2>>,
}

impl DofSpace {
    pub fn build(mesh: Mesh, p: usize) -> Result<Self> {
        if p > MAX_ORDER {
            return Err(Error::UnsupportedDegree {
                what: "dof space order",
                requested: p,
                min: 0,
                max: MAX_ORDER,
            });
        }
        let vector_basis = VectorBasis::new(p)?;
        let scalar_basis = ScalarBasis::new(p + 1)?;
        let mut cell_maps = Vec::with_capacity(mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            cell_maps.push(CellMap::from_mesh(&mesh, t)?);
        }

        let n_edges = mesh.num_edges();
        let n_cells = mesh.num_triangles();
        let edge_block = n_edges * (p + 1);
        let per_cell_interior = p * (p + 1);
        let n_rt = edge_block + n_cells * per_cell_interior;

        // Scalar numbering over interior entities only.
        let mut interior_vertex_rank = vec![None; mesh.num_vertices()];
        let mut next = 0usize;
        for (rank, &on_boundary) in interior_vertex_rank.iter_mut().zip(&mesh.boundary_vertex) {
            if !on_boundary {
                *rank = Some(next);
                next += 1;
            }
        }
        let n_int_vertices = next;
        let mut interior_edge_rank = vec![None; n_edges];
        let mut next = 0usize;
        for (rank, &on_boundary) in interior_edge_rank.iter_mut().zip(&mesh.boundary_edge) {
            if !on_boundary {
                *rank = Some(next);
                next += 1;
            }
        }
        let n_int_edges = next;
        let nodes_per_edge = p;
        let nodes_per_cell = p * p.saturating_sub(1) / 2;
        let n_lag = n_int_vertices + n_int_edges * nodes_per_edge + n_cells * nodes_per_cell;
        let edge_node_base = n_int_vertices;
        let cell_node_base = n_int_vertices + n_int_edges * nodes_per_edge;

        let mut vector_gather = Vec::with_capacity(n_cells);
        let mut scalar_gather = Vec::with_capacity(n_cells);
        for t in 0..n_cells {
            let mut vg = Vec::with_capacity(vector_basis.dim());
            for k in 0..3 {
                let e = mesh.triangle_edges[t][k];
                let agrees = mesh.triangle_edge_signs[t][k] > 0;
                for q in 0..=p {
                    // Reversing the edge parameter flips odd Legendre
                    // moments and the outward normal: net sign (-1)^(q+1).
                    let sign = if agrees {
                        1.0
                    } else if q % 2 == 0 {
                        -1.0
                    } else {
                        1.0
                    };
                    vg.push((e * (p + 1) + q, sign));
                }
            }
            for j in 0..per_cell_interior {
                vg.push((edge_block + t * per_cell_interior + j, 1.0));
            }
            vector_gather.push(vg);

            let mut sg = Vec::with_capacity(scalar_basis.dim());
            for kind in &scalar_basis.node_kinds {
                let idx = match *kind {
                    NodeKind::Vertex(v) => interior_vertex_rank[mesh.triangles[t][v]],
                    NodeKind::Edge { edge, index } => {
                        let e = mesh.triangle_edges[t][edge];
                        interior_edge_rank[e].map(|rank| {
                            let agrees = mesh.triangle_edge_signs[t][edge] > 0;
                            let along = if agrees {
                                index
                            } else {
                                nodes_per_edge - 1 - index
                            };
                            edge_node_base + rank * nodes_per_edge + along
                        })
                    }
                    NodeKind::Interior(j) => Some(cell_node_base + t * nodes_per_cell + j),
                };
                sg.push(idx);
            }
            scalar_gather.push(sg);
        }

        // Canonical physical position of every scalar dof.
        let degree = p + 1;
        let mut scalar_dof_points = vec![[0.0, 0.0]; n_lag];
        for (rank, &vertex) in interior_vertex_rank.iter().zip(&mesh.vertices) {
            if let Some(r) = *rank {
                scalar_dof_points[r] = vertex;
            }
        }
        for (e, rank) in interior_edge_rank.iter().enumerate() {
            if let Some(rank) = *rank {
                let [lo, hi] = mesh.edges[e];
                let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
                for j in 0..nodes_per_edge {
                    let s = (j + 1) as f64 / degree as f64;
                    scalar_dof_points[edge_node_base + rank * nodes_per_edge + j] =
                        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                }
            }
        }
        if nodes_per_cell > 0 {
            for t in 0..n_cells {
                for (node, kind) in scalar_basis.nodes.iter().zip(&scalar_basis.node_kinds) {
                    if let NodeKind::Interior(j) = *kind {
                        scalar_dof_points[cell_node_base + t * nodes_per_cell + j] =
                            cell_maps[t].to_physical(*node);
                    }
                }
            }
        }

        Ok(DofSpace {
            mesh,
            p,
            vector_basis,
            scalar_basis,
            cell_maps,
            n_rt,
            n_lag,
            vector_gather,
            scalar_gather,
            scalar_dof_points,
        })
    }

    pub fn n_total(&self) -> usize {
        self.n_rt + self.n_lag
    }

    pub fn vector_gather(&self, cell: usize) -> &[(usize, f64)] {
        &self.vector_gather[cell]
    }

    /// Scalar-block indices (add `n_rt` for absolute coefficient indices);
    /// `None` marks a boundary node, which contributes zero.
    pub fn scalar_gather(&self, cell: usize) -> &[Option<usize>] {
        &self.scalar_gather[cell]
    }

    pub fn scalar_dof_point(&self, i: usize) -> Vec2 {
        self.scalar_dof_points[i]
    }

    /// Evaluate the discrete pair at a reference point of one cell.
    pub fn evaluate_field(
        &self,
        coeffs: &[f64],
        cell: usize,
        ref_point: Vec2,
    ) -> Result<FieldSample> {
        if coeffs.len() != self.n_total() {
            return Err(Error::DimensionMismatch {
                expected: self.n_total(),
                got: coeffs.len(),
            });
        }
        if cell >= self.cell_maps.len() {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                len: self.cell_maps.len(),
            });
        }
        let map = &self.cell_maps[cell];
        let (vvals, vdivs) = self.vector_basis.evaluate(ref_point);
        let (svals, sgrads) = self.scalar_basis.evaluate(ref_point);
        let mut zeta = [0.0, 0.0];
        let mut div_zeta = 0.0;
        for (i, &(g, sign)) in self.vector_gather[cell].iter().enumerate() {
            let c = sign * coeffs[g];
            if c != 0.0 {
                let v = map.piola(vvals[i]);
                zeta[0] += c * v[0];
                zeta[1] += c * v[1];
                div_zeta += c * map.piola_div(vdivs[i]);
            }
        }
        let mut lambda = 0.0;
        let mut grad_lambda = [0.0, 0.0];
        for (i, slot) in self.scalar_gather[cell].iter().enumerate() {
            if let Some(g) = slot {
                let c = coeffs[self.n_rt + g];
                if c != 0.0 {
                    lambda += c * svals[i];
                    let gr = map.push_gradient(sgrads[i]);
                    grad_lambda[0] += c * gr[0];
                    grad_lambda[1] += c * gr[1];
                }
            }
        }
        Ok(FieldSample {
            zeta,
            div_zeta,
            lambda,
            grad_lambda,
        })
    }

    /// Signed local coefficients of one cell (vector block, then scalar
    /// block with zeros at boundary nodes), ready for reference-table
    /// evaluation.
    pub fn local_coefficients(&self, cell: usize, coeffs: &[f64]) -> Vec<f64> {
        let nv = self.vector_basis.dim();
        let ns = self.scalar_basis.dim();
        let mut out = vec![0.0; nv + ns];
        for (i, &(g, s)) in self.vector_gather[cell].iter().enumerate() {
            out[i] = s * coeffs[g];
        }
        for (j, slot) in self.scalar_gather[cell].iter().enumerate() {
            if let Some(g) = slot {
                out[nv + j] = coeffs[self.n_rt + g];
            }
        }
        out
    }

    /// Field sample at tabulated point `qp` of `cell` from signed local
    /// coefficients (as produced by `local_coefficients`).
    pub fn sample_at(
        &self,
        tab: &ReferenceTables,
        cell: usize,
        qp: usize,
        local: &[f64],
    ) -> FieldSample {
        let map = &self.cell_maps[cell];
        let nv = self.vector_basis.dim();
        let ns = self.scalar_basis.dim();
        let mut zeta = [0.0, 0.0];
        let mut div_zeta = 0.0;
        for (i, &c) in local[..nv].iter().enumerate() {
            if c != 0.0 {
                let v = map.piola(tab.vec_vals[qp][i]);
                zeta[0] += c * v[0];
                zeta[1] += c * v[1];
                div_zeta += c * map.piola_div(tab.vec_divs[qp][i]);
            }
        }
        let mut lambda = 0.0;
        let mut grad_lambda = [0.0, 0.0];
        for (j, &c) in local[nv..nv + ns].iter().enumerate() {
            if c != 0.0 {
                lambda += c * tab.scal_vals[qp][j];
                let gr = map.push_gradient(tab.scal_grads[qp][j]);
                grad_lambda[0] += c * gr[0];
                grad_lambda[1] += c * gr[1];
            }
        }
        FieldSample {
            zeta,
            div_zeta,
            lambda,
            grad_lambda,
        }
    }

    /// Locate the cell containing a point of the closed unit square and
    /// return `(cell, reference coordinates)`.
    pub fn locate(&self, point: Vec2) -> Option<(usize, Vec2)> {
        let [x, y] = point;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return None;
        }
        let n = self.mesh.cells_per_side;
        let i = ((x * n as f64) as usize).min(n - 1);
        let j = ((y * n as f64) as usize).min(n - 1);
        let fx = x * n as f64 - i as f64;
        let fy = y * n as f64 - j as f64;
        // Lower triangle covers fx >= fy in each cell.
        let cell = 2 * (j * n + i) + if fx >= fy { 0 } else { 1 };
        Some((cell, self.cell_maps[cell].to_reference(point)))
    }

    /// Evaluate reference bases at every point of a rule, once for all cells.
    pub fn tabulate(&self, rule: &TriangleRule) -> ReferenceTables {
        let n = rule.points.len();
        let mut vec_vals = Vec::with_capacity(n);
        let mut vec_divs = Vec::with_capacity(n);
        let mut scal_vals = Vec::with_capacity(n);
        let mut scal_grads = Vec::with_capacity(n);
        for &pt in &rule.points {
            let (vv, vd) = self.vector_basis.evaluate(pt);
            let (sv, sg) = self.scalar_basis.evaluate(pt);
            vec_vals.push(vv);
            vec_divs.push(vd);
            scal_vals.push(sv);
            scal_grads.push(sg);
        }
        ReferenceTables {
            points: rule.points.clone(),
            weights: rule.weights.clone(),
            vec_vals,
            vec_divs,
            scal_vals,
            scal_grads,
        }
    }

    /// Vector-block coefficients interpolating a field given per cell:
    /// `f(cell, physical point) -> vector value`. Edge moments sample the
    /// first incident cell; a normally-continuous field gives a conforming
    /// interpolant.
    pub fn interpolate_vector(&self, mut f: impl FnMut(usize, Vec2) -> Vec2) -> Result<Vec<f64>> {
        let p = self.p;
        let mut out = vec![0.0; self.n_rt];
        let equad = edge_rule(10)?;
        for e in 0..self.mesh.num_edges() {
            let [lo, hi] = self.mesh.edges[e];
            let (a, b) = (self.mesh.vertices[lo], self.mesh.vertices[hi]);
            let len = self.mesh.edge_length(e);
            let normal = self.mesh.edge_unit_normal(e);
            let cell = self.mesh.edge_triangles[e].0;
            for q in 0..=p {
                let mut acc = 0.0;
                for (&t, &w) in equad.points.iter().zip(&equad.weights) {
                    let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    acc += w * dot(f(cell, x), normal) * shifted_legendre(q, t);
                }
                out[e * (p + 1) + q] = acc * len;
            }
        }
        if p > 0 {
            let tquad = triangle_rule(2 * p + 8)?;
            let edge_block = self.mesh.num_edges() * (p + 1);
            let per_cell = p * (p + 1);
            let monos = interior_monomials(p);
            for t in 0..self.mesh.num_triangles() {
                let map = &self.cell_maps[t];
                for (&pt, &w) in tquad.points.iter().zip(&tquad.weights) {
                    let x = map.to_physical(pt);
                    let pulled = map.pull_vector(f(t, x));
                    for (im, &(ma, mb)) in monos.iter().enumerate() {
                        let m = pt[0].powi(ma as i32) * pt[1].powi(mb as i32);
                        out[edge_block + t * per_cell + 2 * im] += w * pulled[0] * m;
                        out[edge_block + t * per_cell + 2 * im + 1] += w * pulled[1] * m;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Scalar-block coefficients interpolating `f` at the dof nodes.
    /// Boundary nodes are excluded, so the interpolant matches `f` only
    /// when `f` vanishes on the boundary.
    pub fn interpolate_scalar(&self, mut f: impl FnMut(Vec2) -> f64) -> Vec<f64> {
        self.scalar_dof_points.iter().map(|&x| f(x)).collect()
    }

    /// Assemble a full coefficient vector from the two blocks.
    pub fn combine(&self, vector_part: &[f64], scalar_part: &[f64]) -> Result<Vec<f64>> {
        if vector_part.len() != self.n_rt {
            return Err(Error::DimensionMismatch {
                expected: self.n_rt,
                got: vector_part.len(),
            });
        }
        if scalar_part.len() != self.n_lag {
            return Err(Error::DimensionMismatch {
                expected: self.n_lag,
                got: scalar_part.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n_total());
        out.extend_from_slice(vector_part);
        out.extend_from_slice(scalar_part);
        Ok(out)
    }
}

/// Monomial exponents for the interior vector moments, graded order;
/// must match the functional order used by `VectorBasis`.
fn interior_monomials(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if p == 0 {
        return out;
    }
    for total in 0..=(p - 1) {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::SplitMix64;
    use crate::vec2::{scale, sub};

    fn space(level: u32, p: usize) -> DofSpace {
        DofSpace::build(Mesh::uniform(level).unwrap(), p).unwrap()
    }

    fn random_coeffs(space: &DofSpace, seed: u64) -> Vec<f64> {
        let mut rng = SplitMix64::new(seed);
        (0..space.n_total()).map(|_| rng.next_symmetric()).collect()
    }

    #[test]
    fn dof_counts_match_formulas() {
        let s = space(2, 0);
        assert_eq!((s.n_rt, s.n_lag, s.n_total()), (56, 9, 65));
        let s = space(2, 1);
        assert_eq!((s.n_rt, s.n_lag, s.n_total()), (176, 49, 225));
        let s = space(0, 0);
        assert_eq!((s.n_rt, s.n_lag, s.n_total()), (5, 0, 5));
    }

    #[test]
    fn dof_counts_match_direct_enumeration() {
        for level in 0..=3u32 {
            for p in 0..=MAX_ORDER {
                let s = space(level, p);
                // Count distinct indices actually referenced by gathers.
                let mut seen_v = vec![false; s.n_rt];
                let mut seen_s = vec![false; s.n_lag];
                for t in 0..s.mesh.num_triangles() {
                    for &(g, sign) in s.vector_gather(t) {
                        assert!(sign == 1.0 || sign == -1.0);
                        seen_v[g] = true;
                    }
                    for g in s.scalar_gather(t).iter().flatten() {
                        seen_s[*g] = true;
                    }
                }
                assert!(
                    seen_v.iter().all(|&b| b),
                    "level {level} p {p}: unused vector dof"
                );
                assert!(
                    seen_s.iter().all(|&b| b),
                    "level {level} p {p}: unused scalar dof"
                );
            }
        }
    }

    #[test]
    fn zero_coefficients_evaluate_to_zero() {
        let s = space(1, 1);
        let coeffs = vec![0.0; s.n_total()];
        let sample = s.evaluate_field(&coeffs, 3, [0.25, 0.3]).unwrap();
        assert_eq!(sample.zeta, [0.0, 0.0]);
        assert_eq!(sample.div_zeta, 0.0);
        assert_eq!(sample.lambda, 0.0);
        assert_eq!(sample.grad_lambda, [0.0, 0.0]);
    }

    #[test]
    fn wrong_coefficient_length_is_rejected() {
        let s = space(1, 0);
        assert!(s.evaluate_field(&[0.0; 3], 0, [0.3, 0.3]).is_err());
        assert!(s
            .evaluate_field(&vec![0.0; s.n_total()], 999, [0.3, 0.3])
            .is_err());
    }

    #[test]
    fn constant_vector_field_is_reproduced() {
        for p in 0..=2 {
            let s = space(2, p);
            let vec_part = s.interpolate_vector(|_, _| [1.0, 0.0]).unwrap();
            let coeffs = s.combine(&vec_part, &vec![0.0; s.n_lag]).unwrap();
            for &cell in &[0usize, 7, 20, 31] {
                for &pt in &[[0.2, 0.2], [0.1, 0.6], [1.0 / 3.0, 1.0 / 3.0]] {
                    let sample = s.evaluate_field(&coeffs, cell, pt).unwrap();
                    assert!((sample.zeta[0] - 1.0).abs() < 1e-12, "p={p}");
                    assert!(sample.zeta[1].abs() < 1e-12);
                    assert!(sample.div_zeta.abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn quartic_bubble_is_reproduced_at_p3() {
        let bubble = |x: f64, y: f64| x * (1.0 - x) * y * (1.0 - y);
        let grad = |x: f64, y: f64| {
            [
                (1.0 - 2.0 * x) * y * (1.0 - y),
                x * (1.0 - x) * (1.0 - 2.0 * y),
            ]
        };
        let s = space(1, 3);
        let scal = s.interpolate_scalar(|[x, y]| bubble(x, y));
        let coeffs = s.combine(&vec![0.0; s.n_rt], &scal).unwrap();
        for &cell in &[0usize, 3, 5] {
            for &pt in &[[0.3, 0.3], [0.1, 0.5], [0.25, 0.7]] {
                let sample = s.evaluate_field(&coeffs, cell, pt).unwrap();
                let x = s.cell_maps[cell].to_physical(pt);
                assert!((sample.lambda - bubble(x[0], x[1])).abs() < 1e-12);
                let g = grad(x[0], x[1]);
                assert!((sample.grad_lambda[0] - g[0]).abs() < 1e-11);
                assert!((sample.grad_lambda[1] - g[1]).abs() < 1e-11);
            }
        }
    }

    /// Normal component of the vector field must agree from both sides of
    /// every interior edge; the scalar field must agree pointwise.
    #[test]
    fn random_fields_are_conforming() {
        for p in 0..=MAX_ORDER {
            let s = space(2, p);
            let coeffs = random_coeffs(&s, 0x5eed + p as u64);
            for e in 0..s.mesh.num_edges() {
                if s.mesh.boundary_edge[e] {
                    continue;
                }
                let (ta, tb) = (
                    s.mesh.edge_triangles[e].0,
                    s.mesh.edge_triangles[e].1.unwrap(),
                );
                let [lo, hi] = s.mesh.edges[e];
                let (a, b) = (s.mesh.vertices[lo], s.mesh.vertices[hi]);
                let n = s.mesh.edge_unit_normal(e);
                for &t in &[0.15, 0.5, 0.85] {
                    let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let sa = s
                        .evaluate_field(&coeffs, ta, s.cell_maps[ta].to_reference(x))
                        .unwrap();
                    let sb = s
                        .evaluate_field(&coeffs, tb, s.cell_maps[tb].to_reference(x))
                        .unwrap();
                    let jump_n = dot(sa.zeta, n) - dot(sb.zeta, n);
                    assert!(
                        jump_n.abs() < 1e-10,
                        "p={p}, edge {e}: normal jump {jump_n}"
                    );
                    let jump_s = sa.lambda - sb.lambda;
                    assert!(
                        jump_s.abs() < 1e-10,
                        "p={p}, edge {e}: scalar jump {jump_s}"
                    );
                }
            }
        }
    }

    /// Tangential components generically jump: the space must not be
    /// accidentally over-constrained to H1.
    #[test]
    fn tangential_jumps_are_generic() {
        let s = space(1, 1);
        let coeffs = random_coeffs(&s, 42);
        let mut max_jump = 0.0_f64;
        for e in 0..s.mesh.num_edges() {
            if s.mesh.boundary_edge[e] {
                continue;
            }
            let (ta, tb) = (
                s.mesh.edge_triangles[e].0,
                s.mesh.edge_triangles[e].1.unwrap(),
            );
            let [lo, hi] = s.mesh.edges[e];
            let (a, b) = (s.mesh.vertices[lo], s.mesh.vertices[hi]);
            let tang = scale(1.0 / s.mesh.edge_length(e), sub(b, a));
            let x = [a[0] + 0.37 * (b[0] - a[0]), a[1] + 0.37 * (b[1] - a[1])];
            let sa = s
                .evaluate_field(&coeffs, ta, s.cell_maps[ta].to_reference(x))
                .unwrap();
            let sb = s
                .evaluate_field(&coeffs, tb, s.cell_maps[tb].to_reference(x))
                .unwrap();
            max_jump = max_jump.max((dot(sa.zeta, tang) - dot(sb.zeta, tang)).abs());
        }
        assert!(
            max_jump > 1e-3,
            "tangential jumps suspiciously small: {max_jump}"
        );
    }

    #[test]
    fn scalar_field_vanishes_on_the_boundary() {
        let s = space(2, 2);
        let coeffs = random_coeffs(&s, 7);
        // Points on the bottom edge and right edge of the square.
        for &x in &[[0.3, 0.0], [0.85, 0.0], [1.0, 0.4], [1.0, 0.9]] {
            let (cell, r) = s.locate(x).unwrap();
            let sample = s.evaluate_field(&coeffs, cell, r).unwrap();
            assert!(
                sample.lambda.abs() < 1e-12,
                "lambda at {x:?} = {}",
                sample.lambda
            );
        }
    }

    /// Interpolating a field that already lies in the discrete space must
    /// return the original coefficients.
    #[test]
    fn interpolation_reproduces_discrete_fields() {
        for p in 0..=2 {
            let s = space(1, p);
            let coeffs = random_coeffs(&s, 977 + p as u64);
            let vec_f = |cell: usize, x: Vec2| {
                let r = s.cell_maps[cell].to_reference(x);
                s.evaluate_field(&coeffs, cell, r).unwrap().zeta
            };
            let vec_part = s.interpolate_vector(vec_f).unwrap();
            for (i, (&got, &want)) in vec_part.iter().zip(&coeffs[..s.n_rt]).enumerate() {
                assert!(
                    (got - want).abs() < 1e-10 * want.abs().max(1.0),
                    "p={p}, vector dof {i}: {got} vs {want}"
                );
            }
            let scal_f = |x: Vec2| {
                let (cell, r) = s.locate(x).unwrap();
                s.evaluate_field(&coeffs, cell, r).unwrap().lambda
            };
            let scal_part = s.interpolate_scalar(scal_f);
            for (i, (&got, &want)) in scal_part.iter().zip(&coeffs[s.n_rt..]).enumerate() {
                assert!(
                    (got - want).abs() < 1e-10 * want.abs().max(1.0),
                    "p={p}, scalar dof {i}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn locate_finds_the_right_cell() {
        let s = space(2, 0);
        for &(pt, want) in &[([0.1, 0.05], 0usize), ([0.05, 0.1], 1), ([0.9, 0.95], 31)] {
            let (cell, r) = s.locate(pt).unwrap();
            assert_eq!(cell, want, "point {pt:?}");
            let back = s.cell_maps[cell].to_physical(r);
            assert!((back[0] - pt[0]).abs() < 1e-14 && (back[1] - pt[1]).abs() < 1e-14);
        }
        assert!(s.locate([1.2, 0.5]).is_none());
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let mesh = Mesh::uniform(1).unwrap();
        assert!(DofSpace::build(mesh, MAX_ORDER + 1).is_err());
    }
}

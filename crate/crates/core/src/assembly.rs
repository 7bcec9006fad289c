//! Assembly of the normal-equation system: stiffness matrix
//! `M_ij = (L* Phi_j, L* Phi_i)` and the load functional.
//!
//! # The boundary term in the load
//!
//! The discrete problem seeks the multiplier pair Lambda = (zeta, lambda)
//! with `(L* Lambda, L* V) = rhs(V)` for all test pairs `V = (tau, v)`.
//! For homogeneous Dirichlet data the right side is `(f, v)`. For
//! `u = u0` on the boundary it gains a boundary term, obtained by
//! integrating `(L(sigma, u), V)` by parts: with `sigma = -A grad u`,
//!
//! ```text
//! (A^-1 sigma + grad u, tau) + (div sigma - b . A^-1 sigma + c u, v)
//!   = (sigma, A^-1 tau - A^-1 b v - grad v) + (u, c v - div tau)
//!     + boundary(u tau . n) - boundary(v sigma . n),
//! ```
//!
//! where the `u div tau` and `grad u . tau` pieces trade derivatives
//! through `div(u tau) = u div tau + grad u . tau`, and similarly for
//! `v sigma`. Since `v` vanishes on the boundary (it lives in H1_0) but
//! `tau . n` does not, the surviving term is `+ boundary(u0 (tau . n))`
//! on the left side, i.e.
//!
//! ```text
//! rhs(V) = (f, v) - int_boundary u0 (tau . n) ds
//! ```
//!
//! with `n` the outward normal. Dropping this term silently imposes
//! `u0 = 0`; a dedicated negative-control test keeps it honest.
//!
//! Assembly accumulates per-cell dense blocks into a triplet list in cell
//! order and compresses it to CSC with a stable sort, so repeated runs
//! produce bitwise-identical matrices.

use nalgebra::DVector;
use nalgebra_sparse::CscMatrix;

use crate::error::{Error, Result};
use crate::problem::{AdjointOperator, ProblemCase};
use crate::quadrature::{edge_rule, triangle_rule};
use crate::space::DofSpace;
use crate::vec2::{dot, scale, sub};

/// Quadrature degree for stiffness integrands (polynomial, degree
/// `<= 2(p+1) + 2`).
pub fn stiffness_quad_degree(p: usize) -> usize {
    2 * (p + 2)
}

/// Quadrature degree for load and error integrands (oversampled for
/// smooth non-polynomial data).
pub fn load_quad_degree(p: usize) -> usize {
    2 * (p + 2) + 6
}

/// The assembled normal equations.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CscMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Options for `assemble_load`.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Include the `-int u0 (tau . n)` boundary term. Disabling it exists
    /// solely for the negative control; production code leaves it on.
    pub include_boundary_term: bool,
    /// Override the volume quadrature degree (default `load_quad_degree`).
    pub quad_degree: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            include_boundary_term: true,
            quad_degree: None,
        }
    }
}

/// Deterministic triplet -> CSC compression (stable sort by column, then
/// row; duplicates summed in encounter order).
pub(crate) fn triplets_to_csc(
    nrows: usize,
    ncols: usize,
    mut triplets: Vec<(usize, usize, f64)>,
) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut col_offsets = Vec::with_capacity(ncols + 1);
    let mut row_indices = Vec::with_capacity(triplets.len());
    let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
    col_offsets.push(0);
    let mut current_col = 0usize;
    for (r, c, v) in triplets {
        while current_col < c {
            col_offsets.push(row_indices.len());
            current_col += 1;
        }
        // Merge only within the current column (which starts at the
        // offset most recently pushed).
        let col_start = *col_offsets.last().unwrap();
        if row_indices.len() > col_start && *row_indices.last().unwrap() == r {
            *values.last_mut().unwrap() += v;
        } else {
            row_indices.push(r);
            values.push(v);
        }
    }
    while current_col < ncols {
        col_offsets.push(row_indices.len());
        current_col += 1;
    }
    CscMatrix::try_from_csc_data(nrows, ncols, col_offsets, row_indices, values)
        .expect("triplet compression produced invalid CSC data")
}

/// Per-cell list of (local dof, global dof, sign) with boundary scalar
/// nodes dropped; local indices < `nv` are vector dofs, the rest scalar.
fn cell_dofs(space: &DofSpace, cell: usize) -> Vec<(usize, usize, f64)> {
    let nv = space.vector_basis.dim();
    let mut out = Vec::with_capacity(nv + space.scalar_basis.dim());
    for (l, &(g, s)) in space.vector_gather(cell).iter().enumerate() {
        out.push((l, g, s));
    }
    for (l, slot) in space.scalar_gather(cell).iter().enumerate() {
        if let Some(g) = slot {
            out.push((nv + l, space.n_rt + g, 1.0));
        }
    }
    out
}

/// Assemble the symmetric positive definite stiffness matrix
/// `M_ij = int L* Phi_j . L* Phi_i dx` at the given quadrature degree
/// (default `stiffness_quad_degree(p)`).
pub fn assemble_stiffness(
    space: &DofSpace,
    case: &ProblemCase,
    quad_degree: Option<usize>,
) -> Result<CscMatrix<f64>> {
    case.validate()?;
    let op = AdjointOperator::new(case);
    let degree = quad_degree.unwrap_or_else(|| stiffness_quad_degree(space.p));
    let rule = triangle_rule(degree)?;
    let tab = space.tabulate(&rule);
    let nv = space.vector_basis.dim();
    let ns = space.scalar_basis.dim();
    let nloc = nv + ns;
    let n = space.n_total();

    let mut triplets = Vec::with_capacity(space.mesh.num_triangles() * nloc * nloc);
    let mut local = vec![0.0; nloc * nloc];
    let mut vec_parts = vec![[0.0, 0.0]; nloc];
    let mut scal_parts = vec![0.0; nloc];
    for cell in 0..space.mesh.num_triangles() {
        let map = &space.cell_maps[cell];
        local.iter_mut().for_each(|x| *x = 0.0);
        for (qp, &w_ref) in tab.weights.iter().enumerate() {
            let w = w_ref * map.det;
            // L* of each mapped basis member at this point.
            for i in 0..nv {
                let tau = map.piola(tab.vec_vals[qp][i]);
                let dt = map.piola_div(tab.vec_divs[qp][i]);
                let (v, s) = op.apply(tau, dt, 0.0, [0.0, 0.0]);
                vec_parts[i] = v;
                scal_parts[i] = s;
            }
            for j in 0..ns {
                let val = tab.scal_vals[qp][j];
                let grad = map.push_gradient(tab.scal_grads[qp][j]);
                let (v, s) = op.apply([0.0, 0.0], 0.0, val, grad);
                vec_parts[nv + j] = v;
                scal_parts[nv + j] = s;
            }
            for i in 0..nloc {
                let vi = vec_parts[i];
                let si = scal_parts[i];
                let row = i * nloc;
                for j in 0..nloc {
                    local[row + j] += w * (dot(vi, vec_parts[j]) + si * scal_parts[j]);
                }
            }
        }
        let dofs = cell_dofs(space, cell);
        for &(li, gi, si) in &dofs {
            for &(lj, gj, sj) in &dofs {
                triplets.push((gi, gj, si * sj * local[li * nloc + lj]));
            }
        }
    }
    Ok(triplets_to_csc(n, n, triplets))
}

/// Assemble the load vector `rhs_i = (f, v_i) - int_bdry u0 (tau_i . n)`.
pub fn assemble_load(
    space: &DofSpace,
    case: &ProblemCase,
    options: &LoadOptions,
) -> Result<DVector<f64>> {
    case.validate()?;
    let degree = options
        .quad_degree
        .unwrap_or_else(|| load_quad_degree(space.p));
    let rule = triangle_rule(degree)?;
    let tab = space.tabulate(&rule);
    let mut rhs = DVector::zeros(space.n_total());

    // Volume term: f pairs with the scalar test component only.
    for cell in 0..space.mesh.num_triangles() {
        let map = &space.cell_maps[cell];
        let gather = space.scalar_gather(cell);
        for (qp, &w_ref) in tab.weights.iter().enumerate() {
            let x = map.to_physical(tab.points[qp]);
            let fw = (case.source)(x[0], x[1]) * w_ref * map.det;
            if fw == 0.0 {
                continue;
            }
            for (&slot, &val) in gather.iter().zip(&tab.scal_vals[qp]) {
                if let Some(g) = slot {
                    rhs[space.n_rt + g] += fw * val;
                }
            }
        }
    }

    if options.include_boundary_term {
        let equad = edge_rule(space.p + 6)?;
        for e in 0..space.mesh.num_edges() {
            if !space.mesh.boundary_edge[e] {
                continue;
            }
            let cell = space.mesh.edge_triangles[e].0;
            let map = &space.cell_maps[cell];
            let [lo, hi] = space.mesh.edges[e];
            let (a, b) = (space.mesh.vertices[lo], space.mesh.vertices[hi]);
            let len = space.mesh.edge_length(e);
            // Outward normal: the canonical edge normal, flipped if it
            // points toward the cell's centroid.
            let [va, vb, vc] = space.mesh.triangles[cell];
            let centroid = [
                (space.mesh.vertices[va][0]
                    + space.mesh.vertices[vb][0]
                    + space.mesh.vertices[vc][0])
                    / 3.0,
                (space.mesh.vertices[va][1]
                    + space.mesh.vertices[vb][1]
                    + space.mesh.vertices[vc][1])
                    / 3.0,
            ];
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let n_canon = space.mesh.edge_unit_normal(e);
            let n_out = if dot(n_canon, sub(mid, centroid)) > 0.0 {
                n_canon
            } else {
                scale(-1.0, n_canon)
            };
            let gather = space.vector_gather(cell);
            for (&t, &w) in equad.points.iter().zip(&equad.weights) {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let u0 = (case.boundary_value)(x[0], x[1]);
                if u0 == 0.0 {
                    continue;
                }
                let r = map.to_reference(x);
                let (vals, _) = space.vector_basis.evaluate(r);
                for (i, &(g, sign)) in gather.iter().enumerate() {
                    let tau = map.piola(vals[i]);
                    rhs[g] -= w * len * u0 * dot(tau, n_out) * sign;
                }
            }
        }
    }
    Ok(rhs)
}

/// Assemble matrix and load with default quadrature.
pub fn assemble_system(space: &DofSpace, case: &ProblemCase) -> Result<SparseSystem> {
    Ok(SparseSystem {
        matrix: assemble_stiffness(space, case, None)?,
        rhs: assemble_load(space, case, &LoadOptions::default())?,
    })
}

/// Matrix-free evaluation of the bilinear form against every basis
/// member: returns the vector `y_i = (L* Lambda_c, L* Phi_i)` computed by
/// quadrature from the evaluated field, bypassing the assembled matrix.
pub fn apply_energy_product(
    space: &DofSpace,
    case: &ProblemCase,
    coeffs: &[f64],
    quad_degree: Option<usize>,
) -> Result<DVector<f64>> {
    if coeffs.len() != space.n_total() {
        return Err(Error::DimensionMismatch {
            expected: space.n_total(),
            got: coeffs.len(),
        });
    }
    case.validate()?;
    let op = AdjointOperator::new(case);
    let degree = quad_degree.unwrap_or_else(|| stiffness_quad_degree(space.p));
    let rule = triangle_rule(degree)?;
    let tab = space.tabulate(&rule);
    let nv = space.vector_basis.dim();
    let ns = space.scalar_basis.dim();
    let mut out = DVector::zeros(space.n_total());
    for cell in 0..space.mesh.num_triangles() {
        let map = &space.cell_maps[cell];
        let dofs = cell_dofs(space, cell);
        // Local signed coefficients.
        let mut c_loc = vec![0.0; nv + ns];
        for &(l, g, s) in &dofs {
            c_loc[l] = s * coeffs[g];
        }
        for (qp, &w_ref) in tab.weights.iter().enumerate() {
            let w = w_ref * map.det;
            // Field sample from local coefficients.
            let mut zeta = [0.0, 0.0];
            let mut div_zeta = 0.0;
            for (i, &c) in c_loc[..nv].iter().enumerate() {
                if c != 0.0 {
                    let v = map.piola(tab.vec_vals[qp][i]);
                    zeta[0] += c * v[0];
                    zeta[1] += c * v[1];
                    div_zeta += c * map.piola_div(tab.vec_divs[qp][i]);
                }
            }
            let mut lambda = 0.0;
            let mut grad_lambda = [0.0, 0.0];
            for (j, &c) in c_loc[nv..].iter().enumerate() {
                if c != 0.0 {
                    lambda += c * tab.scal_vals[qp][j];
                    let gr = map.push_gradient(tab.scal_grads[qp][j]);
                    grad_lambda[0] += c * gr[0];
                    grad_lambda[1] += c * gr[1];
                }
            }
            let (sig, u) = op.apply(zeta, div_zeta, lambda, grad_lambda);
            // Pair with L* of each basis member.
            for &(l, g, s) in &dofs {
                let (bv, bs) = if l < nv {
                    let tau = map.piola(tab.vec_vals[qp][l]);
                    let dt = map.piola_div(tab.vec_divs[qp][l]);
                    op.apply(tau, dt, 0.0, [0.0, 0.0])
                } else {
                    let val = tab.scal_vals[qp][l - nv];
                    let grad = map.push_gradient(tab.scal_grads[qp][l - nv]);
                    op.apply([0.0, 0.0], 0.0, val, grad)
                };
                out[g] += s * w * (dot(sig, bv) + u * bs);
            }
        }
    }
    Ok(out)
}

/// Matrix Market (coordinate, general) text export for debugging.
pub fn matrix_market_string(m: &CscMatrix<f64>) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "%%MatrixMarket matrix coordinate real general");
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (r, c, v) in m.triplet_iter() {
        let _ = writeln!(s, "{} {} {:.15e}", r + 1, c + 1, v);
    }
    s
}

//! Reference elements on the unit triangle with vertices
//! `(0,0), (1,0), (0,1)`.
//!
//! Two families live here:
//!
//! * `ScalarBasis`: nodal Lagrange polynomials of total degree `d`,
//!   with nodes at vertices, `d - 1` equispaced points per edge, and the
//!   interior lattice. Used for the H1-conforming scalar space.
//! * `VectorBasis`: the Raviart-Thomas family of order `p`,
//!   `RT_p = P_p^2 + x H_p` (`H_p` = homogeneous degree-`p` scalars),
//!   with degrees of freedom dual to Legendre moments of the outward
//!   normal trace on each edge plus interior component moments. Used for
//!   the H(div)-conforming vector space.
//!
//! Edge `k` of the triangle is the one opposite vertex `k`, traversed
//! from vertex `k+1` to vertex `k+2` (mod 3), which is the
//! counter-clockwise direction; rotating the unit tangent clockwise by
//! 90 degrees gives the outward normal. Both bases are produced by
//! inverting a generalized Vandermonde matrix, which is rejected if its
//! condition number reaches 1e8.
//!
//! `CellMap` is the affine map from the reference triangle to a mesh
//! cell. Scalars map by composition (gradients by `J^-T`), vectors by
//! the contravariant Piola transform `v = J v_ref / det J`, which
//! preserves normal fluxes across edges and scales divergences by
//! `1 / det J`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::vec2::{det, inverse, matvec, norm, sub, transpose, Mat2, Vec2};

pub const REF_VERTICES: [Vec2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Largest Raviart-Thomas order constructed here.
pub const MAX_RT_ORDER: usize = 6;
/// Largest scalar Lagrange degree constructed here.
pub const MAX_SCALAR_DEGREE: usize = 7;

const CONDITION_LIMIT: f64 = 1e8;

/// Start point, end point, outward unit normal, and length of reference
/// edge `k` (the edge opposite vertex `k`, traversed counter-clockwise).
pub fn reference_edge(k: usize) -> (Vec2, Vec2, Vec2, f64) {
    let start = REF_VERTICES[(k + 1) % 3];
    let end = REF_VERTICES[(k + 2) % 3];
    let t = sub(end, start);
    let len = norm(t);
    let normal = [t[1] / len, -t[0] / len];
    (start, end, normal, len)
}

/// Exponent pairs `(a, b)` with `a + b <= d`, graded by total degree.
fn monomials_up_to(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((d + 1) * (d + 2) / 2);
    for total in 0..=d {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

#[inline]
fn mono(a: usize, b: usize, x: f64, y: f64) -> f64 {
    x.powi(a as i32) * y.powi(b as i32)
}

#[inline]
fn mono_grad(a: usize, b: usize, x: f64, y: f64) -> Vec2 {
    let dx = if a == 0 {
        0.0
    } else {
        a as f64 * mono(a - 1, b, x, y)
    };
    let dy = if b == 0 {
        0.0
    } else {
        b as f64 * mono(a, b - 1, x, y)
    };
    [dx, dy]
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn invert_checked(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = condition_number(&m);
    if !cond.is_finite() || cond >= CONDITION_LIMIT {
        return Err(Error::IllConditionedBasis {
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    m.try_inverse().ok_or(Error::IllConditionedBasis {
        cond: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })
}

/// Where a Lagrange node sits on the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Vertex(usize),
    /// `index` counts nodes along the edge in traversal direction
    /// (vertex `k+1` towards vertex `k+2`), starting at 0.
    Edge {
        edge: usize,
        index: usize,
    },
    Interior(usize),
}

/// Nodal Lagrange basis of total degree `degree` on the reference triangle.
#[derive(Debug, Clone)]
pub struct ScalarBasis {
    pub degree: usize,
    pub nodes: Vec<Vec2>,
    pub node_kinds: Vec<NodeKind>,
    monomials: Vec<(usize, usize)>,
    /// Column `i` holds the monomial coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
}

impl ScalarBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=MAX_SCALAR_DEGREE).contains(&degree) {
            return Err(Error::UnsupportedDegree {
                what: "scalar basis degree",
                requested: degree,
                min: 1,
                max: MAX_SCALAR_DEGREE,
            });
        }
        let d = degree;
        let mut nodes = Vec::new();
        let mut node_kinds = Vec::new();
        for (v, &pt) in REF_VERTICES.iter().enumerate() {
            nodes.push(pt);
            node_kinds.push(NodeKind::Vertex(v));
        }
        for k in 0..3 {
            let (start, end, _, _) = reference_edge(k);
            for i in 1..d {
                let t = i as f64 / d as f64;
                nodes.push([
                    start[0] + t * (end[0] - start[0]),
                    start[1] + t * (end[1] - start[1]),
                ]);
                node_kinds.push(NodeKind::Edge {
                    edge: k,
                    index: i - 1,
                });
            }
        }
        let mut interior = 0;
        for j in 1..d {
            for i in 1..d {
                if i + j <= d.saturating_sub(1) {
                    nodes.push([i as f64 / d as f64, j as f64 / d as f64]);
                    node_kinds.push(NodeKind::Interior(interior));
                    interior += 1;
                }
            }
        }
        let monomials = monomials_up_to(d);
        let n = monomials.len();
        debug_assert_eq!(nodes.len(), n);
        let mut v = DMatrix::zeros(n, n);
        for (r, &[x, y]) in nodes.iter().enumerate() {
            for (c, &(a, b)) in monomials.iter().enumerate() {
                v[(r, c)] = mono(a, b, x, y);
            }
        }
        let coeffs = invert_checked(v)?;
        Ok(ScalarBasis {
            degree,
            nodes,
            node_kinds,
            monomials,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Number of nodes interior to each edge.
    pub fn nodes_per_edge(&self) -> usize {
        self.degree - 1
    }

    /// Values and gradients of every basis function at a reference point.
    pub fn evaluate(&self, point: Vec2) -> (Vec<f64>, Vec<Vec2>) {
        let [x, y] = point;
        let n = self.dim();
        let mono_vals: Vec<f64> = self
            .monomials
            .iter()
            .map(|&(a, b)| mono(a, b, x, y))
            .collect();
        let mono_grads: Vec<Vec2> = self
            .monomials
            .iter()
            .map(|&(a, b)| mono_grad(a, b, x, y))
            .collect();
        let mut values = vec![0.0; n];
        let mut grads = vec![[0.0, 0.0]; n];
        for i in 0..n {
            let mut val = 0.0;
            let mut grad = [0.0, 0.0];
            for j in 0..n {
                let c = self.coeffs[(j, i)];
                val += c * mono_vals[j];
                grad[0] += c * mono_grads[j][0];
                grad[1] += c * mono_grads[j][1];
            }
            values[i] = val;
            grads[i] = grad;
        }
        (values, grads)
    }
}

/// One member of the Raviart-Thomas spanning set.
#[derive(Debug, Clone, Copy)]
enum SpanField {
    /// `(x^a y^b, 0)`
    X(usize, usize),
    /// `(0, x^a y^b)`
    Y(usize, usize),
    /// `(x, y) x^a y^b` with `a + b = p`
    Radial(usize, usize),
}

impl SpanField {
    #[inline]
    fn value(self, x: f64, y: f64) -> Vec2 {
        match self {
            SpanField::X(a, b) => [mono(a, b, x, y), 0.0],
            SpanField::Y(a, b) => [0.0, mono(a, b, x, y)],
            SpanField::Radial(a, b) => {
                let m = mono(a, b, x, y);
                [x * m, y * m]
            }
        }
    }

    #[inline]
    fn divergence(self, x: f64, y: f64) -> f64 {
        match self {
            SpanField::X(a, b) => mono_grad(a, b, x, y)[0],
            SpanField::Y(a, b) => mono_grad(a, b, x, y)[1],
            SpanField::Radial(a, b) => (a + b + 2) as f64 * mono(a, b, x, y),
        }
    }
}

/// Raviart-Thomas basis of order `p` on the reference triangle,
/// dimension `(p + 1)(p + 3)`.
///
/// Degrees of freedom, in order:
/// * for each edge `k = 0, 1, 2` and moment order `q = 0..=p`:
///   `v -> int_edge (v . n_out) L_q(t) ds`, with `L_q` the shifted
///   Legendre polynomial in the traversal parameter `t` and `ds`
///   reference arc length;
/// * for each monomial `m` of degree `<= p - 1` (graded order) and each
///   component `c = x, y`: `v -> int_T v_c m dx`.
#[derive(Debug, Clone)]
pub struct VectorBasis {
    pub order: usize,
    span: Vec<SpanField>,
    /// Column `i` holds the span coefficients of basis field `i`.
    coeffs: DMatrix<f64>,
    pub edge_dofs: usize,
    pub interior_dofs: usize,
}

impl VectorBasis {
    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_RT_ORDER {
            return Err(Error::UnsupportedDegree {
                what: "vector basis order",
                requested: order,
                min: 0,
                max: MAX_RT_ORDER,
            });
        }
        let p = order;
        let mut span = Vec::new();
        for &(a, b) in &monomials_up_to(p) {
            span.push(SpanField::X(a, b));
        }
        for &(a, b) in &monomials_up_to(p) {
            span.push(SpanField::Y(a, b));
        }
        for b in 0..=p {
            span.push(SpanField::Radial(p - b, b));
        }
        let n = span.len();
        debug_assert_eq!(n, (p + 1) * (p + 3));
        let edge_dofs = 3 * (p + 1);
        let interior_dofs = p * (p + 1);

        let mut m = DMatrix::zeros(n, n);
        let edge_quad = crate::quadrature::edge_rule(p + 2)?;
        for k in 0..3 {
            let (start, end, normal, len) = reference_edge(k);
            for q in 0..=p {
                let row = k * (p + 1) + q;
                for (c, field) in span.iter().enumerate() {
                    let mut acc = 0.0;
                    for (&t, &w) in edge_quad.points.iter().zip(&edge_quad.weights) {
                        let x = start[0] + t * (end[0] - start[0]);
                        let y = start[1] + t * (end[1] - start[1]);
                        let v = field.value(x, y);
                        acc += w
                            * (v[0] * normal[0] + v[1] * normal[1])
                            * crate::quadrature::shifted_legendre(q, t);
                    }
                    m[(row, c)] = acc * len;
                }
            }
        }
        if p > 0 {
            let tri_quad = crate::quadrature::triangle_rule(2 * p)?;
            let interior_monos = monomials_up_to(p - 1);
            for (im, &(a, b)) in interior_monos.iter().enumerate() {
                for comp in 0..2 {
                    let row = edge_dofs + 2 * im + comp;
                    for (c, field) in span.iter().enumerate() {
                        let acc =
                            tri_quad.integrate(|x, y| field.value(x, y)[comp] * mono(a, b, x, y));
                        m[(row, c)] = acc;
                    }
                }
            }
        }
        let coeffs = invert_checked(m)?;
        Ok(VectorBasis {
            order,
            span,
            coeffs,
            edge_dofs,
            interior_dofs,
        })
    }

    pub fn dim(&self) -> usize {
        self.span.len()
    }

    /// Index of the dof for edge `k`, moment order `q`.
    pub fn edge_dof(&self, k: usize, q: usize) -> usize {
        k * (self.order + 1) + q
    }

    /// Values and divergences of every basis field at a reference point.
    pub fn evaluate(&self, point: Vec2) -> (Vec<Vec2>, Vec<f64>) {
        let [x, y] = point;
        let n = self.dim();
        let span_vals: Vec<Vec2> = self.span.iter().map(|f| f.value(x, y)).collect();
        let span_divs: Vec<f64> = self.span.iter().map(|f| f.divergence(x, y)).collect();
        let mut values = vec![[0.0, 0.0]; n];
        let mut divs = vec![0.0; n];
        for i in 0..n {
            let mut val = [0.0, 0.0];
            let mut dv = 0.0;
            for j in 0..n {
                let c = self.coeffs[(j, i)];
                val[0] += c * span_vals[j][0];
                val[1] += c * span_vals[j][1];
                dv += c * span_divs[j];
            }
            values[i] = val;
            divs[i] = dv;
        }
        (values, divs)
    }
}

/// Affine map from the reference triangle onto a mesh cell.
#[derive(Debug, Clone)]
pub struct CellMap {
    pub vertices: [Vec2; 3],
    pub jacobian: Mat2,
    pub det: f64,
    pub jac_inv: Mat2,
    pub jac_inv_t: Mat2,
}

impl CellMap {
    pub fn new(vertices: [Vec2; 3]) -> Result<Self> {
        let e1 = sub(vertices[1], vertices[0]);
        let e2 = sub(vertices[2], vertices[0]);
        let jacobian = [[e1[0], e2[0]], [e1[1], e2[1]]];
        let d = det(jacobian);
        // Negated compare so a NaN determinant lands in the error path too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(d > 0.0) {
            return Err(Error::DegenerateCell { det: d });
        }
        let jac_inv = inverse(jacobian);
        Ok(CellMap {
            vertices,
            jacobian,
            det: d,
            jac_inv,
            jac_inv_t: transpose(jac_inv),
        })
    }

    pub fn from_mesh(mesh: &Mesh, t: usize) -> Result<Self> {
        let [a, b, c] = mesh.triangles[t];
        CellMap::new([mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]])
    }

    #[inline]
    pub fn to_physical(&self, r: Vec2) -> Vec2 {
        [
            self.vertices[0][0] + self.jacobian[0][0] * r[0] + self.jacobian[0][1] * r[1],
            self.vertices[0][1] + self.jacobian[1][0] * r[0] + self.jacobian[1][1] * r[1],
        ]
    }

    #[inline]
    pub fn to_reference(&self, x: Vec2) -> Vec2 {
        matvec(self.jac_inv, sub(x, self.vertices[0]))
    }

    /// Physical gradient of a scalar from its reference gradient.
    #[inline]
    pub fn push_gradient(&self, g: Vec2) -> Vec2 {
        matvec(self.jac_inv_t, g)
    }

    /// Contravariant Piola transform of a reference vector value.
    #[inline]
    pub fn piola(&self, v: Vec2) -> Vec2 {
        [
            (self.jacobian[0][0] * v[0] + self.jacobian[0][1] * v[1]) / self.det,
            (self.jacobian[1][0] * v[0] + self.jacobian[1][1] * v[1]) / self.det,
        ]
    }

    /// Divergence of a Piola-mapped field from its reference divergence.
    #[inline]
    pub fn piola_div(&self, d: f64) -> f64 {
        d / self.det
    }

    /// Inverse Piola transform: reference value of a physical vector.
    #[inline]
    pub fn pull_vector(&self, v: Vec2) -> Vec2 {
        let w = matvec(self.jac_inv, v);
        [self.det * w[0], self.det * w[1]]
    }
}

//! Sparse symmetric positive definite solves.
//!
//! The normal-equation matrix is SPD, so the primary path is a sparse
//! Cholesky factorization after a reverse Cuthill-McKee reordering (the
//! factor fills within the band, and RCM keeps the band narrow on these
//! structured meshes).  The matrix is symmetrically equilibrated to a unit
//! diagonal first — flux and potential dofs scale differently with h and p,
//! and the spread otherwise costs several digits in the factorization — and
//! the direct solve is polished with a few rounds of iterative refinement.
//! If factorization fails or still leaves a backward error above
//! `RESIDUAL_LIMIT`, a Jacobi-preconditioned conjugate gradient fallback
//! runs on the unpermuted system.
//!
//! Solves are accepted on the normwise backward error
//! `|b - Ax| / (|A|_F·|x| + |b|)` rather than the residual relative to `|b|`
//! alone: smooth loads excite the lowest modes of the operator, so
//! `|A|·|x| / |b|` grows like the condition number and the plain relative
//! residual has a floor near `eps·kappa` that no double-precision solver can
//! beat (at p = 3 the floor passes 1e-10 by level 3 — rounding the exact
//! solution already exceeds it).  Both measures are reported, computed
//! against the original matrix with a deterministic column-major mat-vec.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::CscMatrix;

use crate::assembly::{triplets_to_csc, SparseSystem};
use crate::error::{Error, Result};

/// Largest acceptable normwise backward error of a solve.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// Refinement stops once the residual drops below this (or stalls).
const REFINE_TARGET: f64 = 1e-14;

/// Iterative refinement rounds after the direct solve.
const MAX_REFINE: usize = 4;

/// How a linear system was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Sparse Cholesky on the RCM-permuted matrix.
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients (fallback path).
    ConjugateGradient,
    /// The right-hand side was identically zero.
    ZeroRhs,
}

/// Solution of one linear system together with solve diagnostics.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    /// Coefficient vector in the original (unpermuted) dof ordering.
    pub coeffs: DVector<f64>,
    /// Path that produced the coefficients.
    pub method: SolveMethod,
    /// Relative residual `|b - Ax| / |b|` (zero for a zero rhs).
    pub residual: f64,
    /// Normwise backward error `|b - Ax| / (|A|_F·|x| + |b|)`.
    pub backward_error: f64,
    /// Conjugate gradient iterations, or refinement rounds for a direct solve.
    pub iterations: usize,
}

/// Sparse matrix-vector product with a fixed column-major accumulation
/// order, so repeated calls are bitwise reproducible.
pub fn csc_matvec(m: &CscMatrix<f64>, x: &[f64]) -> DVector<f64> {
    assert_eq!(m.ncols(), x.len(), "mat-vec dimension mismatch");
    let mut y = DVector::zeros(m.nrows());
    for (r, c, v) in m.triplet_iter() {
        y[r] += v * x[c];
    }
    y
}

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
///
/// Returns `order` with `order[new] = old`.  Ties are broken by vertex
/// index, and each connected component starts from its minimum-degree
/// vertex, so the ordering is deterministic.
pub fn reverse_cuthill_mckee(m: &CscMatrix<f64>) -> Vec<usize> {
    let n = m.nrows();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in m.triplet_iter() {
        if r != c {
            adjacency[c].push(r);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    for list in &mut adjacency {
        list.sort_unstable_by_key(|&v| (degree[v], v));
    }

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    while let Some(start) = (0..n)
        .filter(|&v| !visited[v])
        .min_by_key(|&v| (degree[v], v))
    {
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Relative residual `|b - Ax| / |b|` (absolute when `b = 0`).
fn relative_residual(m: &CscMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = b - csc_matvec(m, x.as_slice());
    let b_norm = b.norm();
    if b_norm > 0.0 {
        r.norm() / b_norm
    } else {
        r.norm()
    }
}

/// Frobenius norm of a sparse matrix.
fn frobenius_norm(m: &CscMatrix<f64>) -> f64 {
    m.triplet_iter().map(|(_, _, v)| v * v).sum::<f64>().sqrt()
}

/// Normwise backward error `|b - Ax| / (|A|_F·|x| + |b|)`: the size of the
/// smallest relative perturbation of `(A, b)` under which `x` is exact.
fn normwise_backward_error(
    m: &CscMatrix<f64>,
    m_norm: f64,
    x: &DVector<f64>,
    b: &DVector<f64>,
) -> f64 {
    let r = b - csc_matvec(m, x.as_slice());
    let denom = m_norm * x.norm() + b.norm();
    if denom > 0.0 {
        r.norm() / denom
    } else {
        r.norm()
    }
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess,
/// stopping on the normwise backward error.
fn jacobi_pcg(
    m: &CscMatrix<f64>,
    b: &DVector<f64>,
    m_norm: f64,
    tol_backward: f64,
    max_iter: usize,
) -> (DVector<f64>, usize) {
    let n = b.len();
    let mut inv_diag = vec![1.0; n];
    for (r, c, v) in m.triplet_iter() {
        if r == c && *v > 0.0 {
            inv_diag[r] = 1.0 / v;
        }
    }
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = DVector::from_fn(n, |i, _| r[i] * inv_diag[i]);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut iterations = 0;
    while iterations < max_iter && r.norm() > tol_backward * (m_norm * x.norm() + b_norm) {
        let ap = csc_matvec(m, p.as_slice());
        let pap = p.dot(&ap);
        // Negated compare so a NaN curvature stops the iteration too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        z = DVector::from_fn(n, |i, _| r[i] * inv_diag[i]);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
        iterations += 1;
    }
    (x, iterations)
}

/// Solve an SPD system, preferring sparse Cholesky and falling back to
/// conjugate gradients, and refuse to return a solution whose normwise
/// backward error exceeds `RESIDUAL_LIMIT`.
pub fn solve_system(system: &SparseSystem) -> Result<DiscreteSolution> {
    let n = system.matrix.nrows();
    if system.matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: system.matrix.ncols(),
        });
    }
    if system.rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: system.rhs.len(),
        });
    }
    if system.rhs.norm() == 0.0 {
        return Ok(DiscreteSolution {
            coeffs: DVector::zeros(n),
            method: SolveMethod::ZeroRhs,
            residual: 0.0,
            backward_error: 0.0,
            iterations: 0,
        });
    }
    let m_norm = frobenius_norm(&system.matrix);

    let order = reverse_cuthill_mckee(&system.matrix);
    let mut inverse = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        inverse[old] = new;
    }
    let mut scale = vec![1.0; n];
    for (r, c, v) in system.matrix.triplet_iter() {
        if r == c && *v > 0.0 {
            scale[r] = 1.0 / v.sqrt();
        }
    }
    let permuted_triplets: Vec<(usize, usize, f64)> = system
        .matrix
        .triplet_iter()
        .map(|(r, c, v)| (inverse[r], inverse[c], scale[r] * v * scale[c]))
        .collect();
    let permuted = triplets_to_csc(n, n, permuted_triplets);

    let direct_detail;
    match CscCholesky::factor(&permuted) {
        Ok(factor) => {
            // The factor solves S·A·S y = S r; corrections come back in the
            // original ordering and scaling as x = S y.
            let solve_scaled = |rhs: &DVector<f64>| {
                let scaled = DMatrix::from_fn(n, 1, |i, _| scale[order[i]] * rhs[order[i]]);
                let y = factor.solve(&scaled);
                DVector::from_fn(n, |i, _| scale[i] * y[(inverse[i], 0)])
            };
            let mut x = solve_scaled(&system.rhs);
            let mut residual = relative_residual(&system.matrix, &x, &system.rhs);
            let mut rounds = 0;
            while residual > REFINE_TARGET && rounds < MAX_REFINE {
                let r = &system.rhs - csc_matvec(&system.matrix, x.as_slice());
                let candidate = &x + solve_scaled(&r);
                let candidate_residual = relative_residual(&system.matrix, &candidate, &system.rhs);
                if candidate_residual >= residual {
                    break;
                }
                x = candidate;
                residual = candidate_residual;
                rounds += 1;
            }
            let backward = normwise_backward_error(&system.matrix, m_norm, &x, &system.rhs);
            if backward <= RESIDUAL_LIMIT {
                return Ok(DiscreteSolution {
                    coeffs: x,
                    method: SolveMethod::Cholesky,
                    residual,
                    backward_error: backward,
                    iterations: rounds,
                });
            }
            direct_detail = format!("Cholesky backward error {backward:.3e} above limit");
        }
        Err(err) => {
            direct_detail = format!("Cholesky factorization failed: {err}");
        }
    }

    let (x, iterations) = jacobi_pcg(&system.matrix, &system.rhs, m_norm, 1e-13, 20 * n);
    let residual = relative_residual(&system.matrix, &x, &system.rhs);
    let backward = normwise_backward_error(&system.matrix, m_norm, &x, &system.rhs);
    if backward <= RESIDUAL_LIMIT {
        return Ok(DiscreteSolution {
            coeffs: x,
            method: SolveMethod::ConjugateGradient,
            residual,
            backward_error: backward,
            iterations,
        });
    }
    Err(Error::SolveFailed {
        detail: format!(
            "{direct_detail}; conjugate gradient stalled at backward error {backward:.3e}"
        ),
        residual,
        iterations,
    })
}

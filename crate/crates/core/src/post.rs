//! Post-processing: primal reconstruction and error norms.
//!
//! The solve produces the auxiliary pair `(zeta, lambda)`; the physical
//! fields are recovered pointwise as `(sigma, u) = L*(zeta, lambda)`, the
//! same adjoint used during assembly.  Error norms integrate against the
//! closed-form exact fields cell by cell, at a quadrature degree high
//! enough that the reported numbers are dominated by discretization, not
//! integration.

use nalgebra::DVector;

use crate::assembly::{apply_energy_product, load_quad_degree};
use crate::error::{Error, Result};
use crate::problem::{AdjointOperator, ProblemCase};
use crate::quadrature::triangle_rule;
use crate::space::DofSpace;
use crate::vec2::{dot, sub, Vec2};

/// Error norms of one discrete solution against the closed-form fields.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    /// L2 error of the reconstructed potential `u`.
    pub err_u: f64,
    /// L2 error of the reconstructed flux `sigma`.
    pub err_sigma: f64,
    /// Full H1 error of the multiplier, when its closed form is known.
    pub err_lambda_h1: Option<f64>,
    /// H(div) error of the auxiliary flux, when its closed form is known.
    pub err_zeta_hdiv: Option<f64>,
}

impl ErrorNorms {
    /// Energy norm of the error, `sqrt(err_u^2 + err_sigma^2)`: the norm
    /// the discrete solution minimizes over the trial space.
    pub fn energy(&self) -> f64 {
        self.err_u.hypot(self.err_sigma)
    }
}

/// Reconstruct `(sigma, u) = L*(zeta_hp, lambda_hp)` at one reference
/// point of one cell.
pub fn reconstruct(
    case: &ProblemCase,
    space: &DofSpace,
    coeffs: &[f64],
    cell: usize,
    ref_point: Vec2,
) -> Result<(Vec2, f64)> {
    case.validate()?;
    let sample = space.evaluate_field(coeffs, cell, ref_point)?;
    Ok(AdjointOperator::new(case).apply_sample(&sample))
}

/// Compute the error norms of a discrete solution by quadrature (default
/// degree `load_quad_degree(p)`).  The case must carry closed forms for
/// both `u` and `sigma`; the multiplier and auxiliary-flux norms are
/// filled in only where their closed forms exist.
pub fn error_norms(
    case: &ProblemCase,
    space: &DofSpace,
    coeffs: &[f64],
    quad_degree: Option<usize>,
) -> Result<ErrorNorms> {
    if coeffs.len() != space.n_total() {
        return Err(Error::DimensionMismatch {
            expected: space.n_total(),
            got: coeffs.len(),
        });
    }
    case.validate()?;
    let exact_u = case
        .exact_u
        .ok_or(Error::MissingExactField { field: "exact_u" })?;
    let exact_sigma = case.exact_sigma.ok_or(Error::MissingExactField {
        field: "exact_sigma",
    })?;
    let op = AdjointOperator::new(case);
    let degree = quad_degree.unwrap_or_else(|| load_quad_degree(space.p));
    let rule = triangle_rule(degree)?;
    let tab = space.tabulate(&rule);

    let mut u2 = 0.0;
    let mut sigma2 = 0.0;
    let mut lambda2 = 0.0;
    let mut zeta2 = 0.0;
    for cell in 0..space.mesh.num_triangles() {
        let map = &space.cell_maps[cell];
        let local = space.local_coefficients(cell, coeffs);
        for (qp, &w_ref) in tab.weights.iter().enumerate() {
            let w = w_ref * map.det;
            let x = map.to_physical(tab.points[qp]);
            let s = space.sample_at(&tab, cell, qp, &local);
            let (sigma_h, u_h) = op.apply_sample(&s);
            let du = u_h - (exact_u.value)(x[0], x[1]);
            u2 += w * du * du;
            let ds = sub(sigma_h, (exact_sigma.value)(x[0], x[1]));
            sigma2 += w * dot(ds, ds);
            if let Some(lam) = &case.exact_lambda {
                let dv = s.lambda - (lam.value)(x[0], x[1]);
                let dg = sub(s.grad_lambda, (lam.gradient)(x[0], x[1]));
                lambda2 += w * (dv * dv + dot(dg, dg));
            }
            if let Some(zeta) = &case.exact_zeta {
                let dz = sub(s.zeta, (zeta.value)(x[0], x[1]));
                let dd = s.div_zeta - (zeta.divergence)(x[0], x[1]);
                zeta2 += w * (dot(dz, dz) + dd * dd);
            }
        }
    }
    Ok(ErrorNorms {
        err_u: u2.sqrt(),
        err_sigma: sigma2.sqrt(),
        err_lambda_h1: case.exact_lambda.map(|_| lambda2.sqrt()),
        err_zeta_hdiv: case.exact_zeta.map(|_| zeta2.sqrt()),
    })
}

/// Relative Galerkin residual `|Mc - b| / |b|` with the product `Mc`
/// evaluated matrix-free, so the check covers assembly and quadrature as
/// well as the linear solve.
pub fn galerkin_residual(
    space: &DofSpace,
    case: &ProblemCase,
    coeffs: &[f64],
    rhs: &DVector<f64>,
) -> Result<f64> {
    let applied = apply_energy_product(space, case, coeffs, None)?;
    let diff = applied - rhs;
    let scale = rhs.norm();
    Ok(if scale > 0.0 {
        diff.norm() / scale
    } else {
        diff.norm()
    })
}

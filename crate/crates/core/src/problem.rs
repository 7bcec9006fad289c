//! Problem data for the second-order elliptic boundary value problem
//!
//! ```text
//!   div(sigma) - b . A^-1 sigma + c u = f,   sigma = -A grad(u)   in Omega,
//!   u = u0                                                        on the boundary,
//! ```
//!
//! written as the first-order system L(sigma, u) = (0, f) with
//! `L(sigma, u) = (A^-1 sigma + grad u, div sigma - b . A^-1 sigma + c u)`.
//! The method works entirely through the formal adjoint
//!
//! ```text
//!   L*(tau, v) = (A^-1 tau - A^-1 b v - grad v,  c v - div tau)
//! ```
//!
//! on H(div) x H1_0, which `AdjointOperator::apply` evaluates pointwise.
//! Coefficients are constant; a constant `b` is divergence-free, so no
//! extra terms appear in the adjoint.

use crate::error::{Error, Result};
use crate::space::FieldSample;
use crate::vec2::{det, inverse, matvec, Mat2, Vec2};

pub type ScalarFn = fn(f64, f64) -> f64;
pub type VectorFn = fn(f64, f64) -> Vec2;

/// A scalar field with its gradient, both in closed form.
#[derive(Clone, Copy)]
pub struct ScalarExact {
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

/// A vector field with its divergence, both in closed form.
#[derive(Clone, Copy)]
pub struct VectorExact {
    pub value: VectorFn,
    pub divergence: ScalarFn,
}

/// Coefficients, data, and (when known) exact fields of one benchmark.
#[derive(Clone, Copy)]
pub struct ProblemCase {
    pub name: &'static str,
    /// Symmetric positive definite diffusion matrix A.
    pub diffusion: Mat2,
    /// Advection vector b (constant, hence divergence-free).
    pub advection: Vec2,
    /// Reaction coefficient c >= 0.
    pub reaction: f64,
    /// Source term f.
    pub source: ScalarFn,
    /// Dirichlet boundary value u0.
    pub boundary_value: ScalarFn,
    pub exact_u: Option<ScalarExact>,
    pub exact_sigma: Option<VectorExact>,
    pub exact_lambda: Option<ScalarExact>,
    pub exact_zeta: Option<VectorExact>,
}

impl ProblemCase {
    /// Check the coefficient requirements: A symmetric positive definite,
    /// c nonnegative.
    pub fn validate(&self) -> Result<()> {
        let a = self.diffusion;
        let scale = a
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &x| m.max(x.abs()))
            .max(1.0);
        if (a[0][1] - a[1][0]).abs() > 1e-14 * scale {
            return Err(Error::InvalidCase(format!(
                "diffusion matrix not symmetric: {:?}",
                a
            )));
        }
        // Symmetric 2x2 is positive definite iff trace > 0 and det > 0.
        if a[0][0] + a[1][1] <= 0.0 || det(a) <= 0.0 {
            return Err(Error::InvalidCase(format!(
                "diffusion matrix not positive definite: {:?}",
                a
            )));
        }
        if self.reaction < 0.0 {
            return Err(Error::InvalidCase(format!(
                "reaction coefficient must be nonnegative, got {}",
                self.reaction
            )));
        }
        Ok(())
    }
}

impl std::fmt::Debug for ProblemCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemCase")
            .field("name", &self.name)
            .field("diffusion", &self.diffusion)
            .field("advection", &self.advection)
            .field("reaction", &self.reaction)
            .finish_non_exhaustive()
    }
}

/// Precomputed coefficient combinations for applying the adjoint.
#[derive(Debug, Clone, Copy)]
pub struct AdjointOperator {
    pub a_inv: Mat2,
    pub a_inv_b: Vec2,
    pub c: f64,
}

impl AdjointOperator {
    pub fn new(case: &ProblemCase) -> Self {
        let a_inv = inverse(case.diffusion);
        AdjointOperator {
            a_inv,
            a_inv_b: matvec(a_inv, case.advection),
            c: case.reaction,
        }
    }

    /// Pointwise adjoint: `L*(tau, v)` split into its vector and scalar
    /// parts. Also the reconstruction map: applied to the multiplier pair
    /// it yields `(sigma, u)`.
    #[inline]
    pub fn apply(&self, tau: Vec2, div_tau: f64, v: f64, grad_v: Vec2) -> (Vec2, f64) {
        let at = matvec(self.a_inv, tau);
        (
            [
                at[0] - self.a_inv_b[0] * v - grad_v[0],
                at[1] - self.a_inv_b[1] * v - grad_v[1],
            ],
            self.c * v - div_tau,
        )
    }

    #[inline]
    pub fn apply_sample(&self, s: &FieldSample) -> (Vec2, f64) {
        self.apply(s.zeta, s.div_zeta, s.lambda, s.grad_lambda)
    }
}

//! First-order-system LL* finite elements for second-order elliptic
//! boundary value problems on the unit square.
//!
//! The solver recasts `-div(A grad u) + b . grad u + c u = f` with
//! Dirichlet data as a norm-minimization problem: find the multiplier
//! pair `(zeta, lambda)` in `H(div) x H1_0` whose image under the adjoint
//! `L*(tau, v) = (A^{-1} tau - A^{-1} b v - grad v, c v - div tau)` best
//! matches the data, then reconstruct `(sigma, u) = L*(zeta, lambda)`.
//! The discrete trial space pairs Raviart-Thomas elements with continuous
//! Lagrange elements on a structured triangulation; the resulting system
//! is symmetric positive definite.
//!
//! The point of the exercise is a convergence phenomenon: the observed
//! L2 rate of `u` under uniform refinement is governed by the regularity
//! of the multiplier, not of the solution.  On the square the corner
//! regularity caps the rate at 2 for every polynomial order p >= 1 —
//! even for the constant solution u = 1 — while problems with a smooth
//! multiplier converge at the full order p+1.  The `study` module runs
//! these experiments and emits CSV/JSON reports.
//!
//! Pipeline: [`mesh`] builds the triangulation, [`element`] the reference
//! bases, [`space`] the global dof maps, [`assembly`] the SPD system,
//! [`solve`] factors it, [`post`] reconstructs fields and error norms,
//! and [`study`] drives refinement sweeps.

pub mod assembly;
pub mod element;
pub mod error;
pub mod mesh;
pub mod post;
pub mod problem;
pub mod quadrature;
pub mod solve;
pub mod space;
pub mod study;
pub mod vec2;

pub(crate) mod util;

pub use error::{Error, Result};

//! Numerical laboratory for finite-time blow-up of the semilinear stochastic
//! wave equation
//!
//! ```text
//! u_tt = u_xx + c1 u + (c2 u + f(u)) W'(t, x),   x in (0, J),
//! ```
//!
//! driven by space-time white noise, together with its deterministic
//! comparison problem
//!
//! ```text
//! U_tt = U_xx + (kappa^2 / 4)|U|^r - ((c1^2 + c2^2) / 2) U,   U = 0 on the boundary.
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: first Dirichlet eigenpair, projections and the image-sum wave kernels.
//! - [`quad`]: adaptive Simpson quadrature used by the bound computation.
//! - [`bounds`]: hypothesis checks, the improper-integral blow-up time bound and the
//!   ODE comparison solver.
//! - [`lattice`]: the leapfrog stepping kernel shared by both PDE solvers.
//! - [`det_wave`]: deterministic comparison solver, projection residuals and the
//!   comparison-set margin.
//! - [`noise`] and [`spde`]: addressable white-noise lattices and stochastic paths.
//! - [`mc`]: parallel Monte Carlo campaigns, partial expectations and isometry checks.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod det_wave;
pub mod error;
pub mod lattice;
pub mod mc;
pub mod noise;
pub mod profile;
pub mod quad;
pub mod spde;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};
pub use profile::Profile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

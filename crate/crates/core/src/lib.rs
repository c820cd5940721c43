//! Anisotropic norm of stable discrete-time LTI systems.
//!
//! The a-anisotropic norm measures the worst-case power gain of a system
//! driven by stationary Gaussian noise whose mean anisotropy does not
//! exceed `a`. It interpolates between the scaled H2 norm (`a = 0`) and the
//! H-infinity norm (`a -> inf`). This crate computes it by reducing a
//! determinant-plus-LMI convex program to a scalar convex search over a
//! parameter `eta`, where each function evaluation solves one algebraic
//! Riccati equation for its stabilizing solution.
//!
//! Module map:
//!
//! - [`numkit`]: dense linear-algebra kernels (spectral radius, Stein, log-det).
//! - [`lti`]: state-space models, frequency response, composition, I/O.
//! - [`riccati`]: stabilizing solution of the q-parametrized Riccati equation.
//! - [`norms`]: H2 and H-infinity norms.
//! - [`anisotropy`]: mean anisotropy and the anisotropic norm itself.
//! - [`verify`]: independent oracles that cross-check the main algorithm.
//! - [`bench`]: randomized benchmark harness with CSV output.

// `!(x < y)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisotropy;
pub mod bench;
pub mod error;
pub mod lti;
pub mod norms;
pub mod numkit;
pub mod riccati;
pub mod verify;

pub use anisotropy::{
    aninorm_feasible, anisotropic_norm, gamma_hat_of_eta, mean_anisotropy, shaping_blend, AnisoNormResult,
    AnisoQuery, AnisoStatus, Feasibility,
};
pub use error::{Error, Result};
pub use lti::{ShapingFilter, StateSpaceModel};
pub use norms::{h2_norm, hinf_norm};
pub use numkit::{ComplexMatrix, Matrix};
pub use riccati::{dare_stabilizing, riccati_residual, RiccatiOptions, RiccatiSolution};

//! Jump-indexed perturbations of identity on a finite-dimensional Wiener space.
//!
//! A pure-jump path `z` with jumps `ΔZ_{T_n}` induces the diagonal
//! Hilbert–Schmidt operator `∂u_t = Σ ΔZ_{T_n} e_n ⊗ e_n` on the
//! Cameron–Martin space, the shift `u_t(w) = Σ ΔZ_{T_n} δe_n(w) e_n` and the
//! perturbation of identity `U_t = I + u_t`. The modules below build these
//! objects on a truncated basis and check their Jacobian, degree,
//! change-of-variables and invertibility identities numerically.
//!
//! - [`jump_process`]: jump paths, Carleman–Fredholm product, Doléans-Dade exponential.
//! - [`gauss_space`]: Gaussian coordinates and the Schauder (integrated Haar) basis.
//! - [`shift_map`]: the shift operator, `U_t` and the factored Gaussian Jacobian.
//! - [`degree_mc`]: Monte Carlo estimators and quadrature oracles.
//! - [`inverse_solver`]: exact and Picard inverses, path-level residual.
//! - [`lambda_evolution`]: the jump recursion for the Jacobian and its comparison
//!   with the closed form.

pub mod degree_mc;
pub mod error;
pub mod gauss_space;
pub mod inverse_solver;
pub mod jump_process;
pub mod lambda_evolution;
pub mod quadrature;
pub mod seeding;
pub mod shift_map;

pub use error::{Error, Result};

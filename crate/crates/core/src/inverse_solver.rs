//! Inverting `w ↦ U_t(w) = w + u_t(w)`.
//!
//! On coordinates the inverse is `η_n = ξ_n / (1 + λ_n)`. The same inverse is
//! the fixed point of `η ← ξ − λ η`, the coordinate form of the functional
//! equation `V(τ) = W_τ − ∫_0^τ u̇_t(V)(s) ds` on the classical Wiener space.

use crate::error::{Error, Result};
use crate::gauss_space::{BasisSpec, GaussianSample};
use crate::shift_map::ShiftOperator;

/// `|1 + λ|` below this marks the inverse as ill-conditioned.
pub const NEAR_DEGENERATE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct InverseResult {
    pub solution: GaussianSample,
    /// Picard iterations performed; 0 for the exact inverse.
    pub iterations: usize,
    /// `‖U(solution) − target‖_∞`.
    pub residual: f64,
    /// `‖η_{k+1} − η_k‖_∞` for each Picard iteration.
    pub update_norms: Vec<f64>,
    /// Some `|1 + λ_n| < NEAR_DEGENERATE`.
    pub ill_conditioned: bool,
}

fn residual(op: &ShiftOperator, solution: &GaussianSample, target: &GaussianSample) -> Result<f64> {
    let image = op.apply_perturbation(solution)?;
    Ok(image.xi().iter().zip(target.xi()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Coordinatewise division `η_n = ξ_n / (1 + λ_n)`.
pub fn invert_exact(op: &ShiftOperator, target: &GaussianSample) -> Result<InverseResult> {
    if op.is_degenerate() {
        return Err(Error::Degenerate("U_t collapses a coordinate (eigenvalue -1) and has no inverse".into()));
    }
    let mut solution = op.apply_perturbation(target)?;
    let xi = solution.xi_mut();
    xi.copy_from_slice(target.xi());
    for m in op.active() {
        xi[m.index - 1] /= 1.0 + m.eigenvalue;
    }
    let ill_conditioned = op.eigenvalues().any(|l| (1.0 + l).abs() < NEAR_DEGENERATE);
    let residual = residual(op, &solution, target)?;
    Ok(InverseResult { solution, iterations: 0, residual, update_norms: Vec::new(), ill_conditioned })
}

/// Picard iteration `η ← ξ − λ η` from `η_0 = ξ`.
///
/// Needs `max |λ_n| = ρ < 1`. Stops once `‖update‖_∞ · max(1, ρ/(1−ρ)) < tol/2`,
/// which bounds both the last update and the distance to the fixed point by
/// `tol/2`; the other half absorbs rounding in the iterates.
pub fn picard_inverse(
    op: &ShiftOperator,
    target: &GaussianSample,
    tol: f64,
    max_iter: usize,
) -> Result<InverseResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Domain("max_iter must be >= 1".into()));
    }
    let rho = op.max_abs_eigenvalue();
    if rho >= 1.0 {
        return Err(Error::NonContractive { max_abs: rho });
    }
    let error_factor = 2.0 * (rho / (1.0 - rho)).max(1.0);

    let mut iterate = op.apply_perturbation(target)?;
    iterate.xi_mut().copy_from_slice(target.xi());
    let mut update_norms = Vec::new();
    for k in 1..=max_iter {
        let mut update = 0.0f64;
        let xi = iterate.xi_mut();
        for m in op.active() {
            let i = m.index - 1;
            let next = target.xi()[i] - m.eigenvalue * xi[i];
            update = update.max((next - xi[i]).abs());
            xi[i] = next;
        }
        update_norms.push(update);
        if update * error_factor < tol {
            let residual = residual(op, &iterate, target)?;
            return Ok(InverseResult {
                solution: iterate,
                iterations: k,
                residual,
                update_norms,
                ill_conditioned: false,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_update: update_norms.last().copied().unwrap_or(f64::NAN),
        residual: residual(op, &iterate, target)?,
    })
}

/// Largest deviation from `V(τ) = W_τ − ∫_0^τ u̇_t(V)(s) ds` over `taus`,
/// with `u̇_t(V)(s) = Σ λ_n δe_n(V) ė_n(s)` integrated exactly cell by cell.
pub fn functional_sde_residual(
    op: &ShiftOperator,
    basis: &BasisSpec,
    target: &GaussianSample,
    solution: &GaussianSample,
    taus: &[f64],
) -> Result<f64> {
    let cells = 1usize << basis.grid_level();
    let width = 1.0 / cells as f64;
    // value of u̇_t(V) on each dyadic cell
    let mut drift = vec![0.0; cells];
    for m in op.active() {
        let coefficient = m.eigenvalue * solution.divergence_coord(m.index)?;
        for (c, d) in drift.iter_mut().enumerate() {
            *d += coefficient * basis.basis_derivative_value(m.index, c as f64 * width)?;
        }
    }
    let mut worst = 0.0f64;
    for &tau in taus {
        let v = solution.path_value(basis, tau)?;
        let w = target.path_value(basis, tau)?;
        let full = ((tau / width).floor() as usize).min(cells);
        let mut integral: f64 = drift[..full].iter().sum::<f64>() * width;
        if full < cells {
            integral += drift[full] * (tau - full as f64 * width);
        }
        worst = worst.max((v - w + integral).abs());
    }
    Ok(worst)
}

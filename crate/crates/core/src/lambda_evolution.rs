//! Jump-by-jump evolution of the Gaussian Jacobian `Λ_t`.
//!
//! For a pure-jump driver the stochastic differential equation for `Λ_t`
//! reduces to one multiplicative update per jump. With `λ = ΔZ_s` and
//! `ξ = δe_s` the coordinate assigned to that jump,
//!
//! ```text
//! Λ_s = Λ_{s−} · (1 − [ξ²(1 + λ/2) − 1]·λ + e^{λ[ξ²(1 − λ/2) − 1]}·(e^{−λ}(1+λ) − 1))
//! ```
//!
//! while the closed form multiplies by `(1+λ)e^{−λ}·exp(−λ(ξ²−1) − λ²ξ²/2)`.
//! The two factors agree to first order in `λ` (both are `1 + λ(1 − ξ²) + O(λ²)`)
//! but not beyond; [`compare_evolutions`] measures the gap and its order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss_space::{GaussianSample, StepBasisAssignment};
use crate::jump_process::JumpPath;
use crate::shift_map::ShiftOperator;

/// Per-jump factor of the jump recursion.
pub fn sde_factor(lambda: f64, xi: f64) -> f64 {
    let x2 = xi * xi;
    1.0 - (x2 * (1.0 + 0.5 * lambda) - 1.0) * lambda
        + (lambda * (x2 * (1.0 - 0.5 * lambda) - 1.0)).exp() * ((-lambda).exp() * (1.0 + lambda) - 1.0)
}

/// Per-jump factor of the closed-form Jacobian, from the single-jump operator.
pub fn closed_form_factor(lambda: f64, xi: f64) -> Result<f64> {
    let op = ShiftOperator::from_eigenvalues(&[lambda], 1, 0.0)?;
    Ok(op.jacobian(&GaussianSample::new(vec![xi])?)?.lambda_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub time: f64,
    pub lambda: f64,
    pub xi: f64,
    pub sde_factor: f64,
    pub closed_form_factor: f64,
    pub sde_running: f64,
    pub closed_form_running: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub records: Vec<EvolutionRecord>,
}

impl EvolutionTrace {
    /// Final recursion value (`Λ_0 = 1` for an empty trace).
    pub fn sde_value(&self) -> f64 {
        self.records.last().map_or(1.0, |r| r.sde_running)
    }

    pub fn closed_form_value(&self) -> f64 {
        self.records.last().map_or(1.0, |r| r.closed_form_running)
    }
}

/// Runs both evolutions over the jumps of `path` up to `t`.
pub fn evolve_lambda_sde(
    path: &JumpPath,
    t: f64,
    sample: &GaussianSample,
    assignment: &StepBasisAssignment,
) -> Result<EvolutionTrace> {
    let jumps = path.jumps_up_to(t)?;
    let mut sde_running = 1.0;
    let mut closed_form_running = 1.0;
    let mut records = Vec::with_capacity(jumps.len());
    for (pos, ev) in jumps.iter().enumerate() {
        let index = assignment.basis_index(pos);
        if index > sample.dimension() {
            return Err(Error::Capacity { needed: index, available: sample.dimension() });
        }
        let xi = sample.divergence_coord(index)?;
        let sde = sde_factor(ev.size, xi);
        let closed = closed_form_factor(ev.size, xi)?;
        sde_running *= sde;
        closed_form_running *= closed;
        records.push(EvolutionRecord {
            time: ev.time,
            lambda: ev.size,
            xi,
            sde_factor: sde,
            closed_form_factor: closed,
            sde_running,
            closed_form_running,
        });
    }
    Ok(EvolutionTrace { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub scale: f64,
    /// `max_jumps |sde_factor − closed_form_factor|` with every size multiplied by `scale`.
    pub max_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln(max_difference)` against `ln(scale)` over rows
    /// with a positive difference; `None` with fewer than two such rows.
    pub slope: Option<f64>,
}

/// Compares the two per-jump factors on `path_template` scaled by each of `scales`.
pub fn compare_evolutions(
    path_template: &JumpPath,
    t: f64,
    sample: &GaussianSample,
    scales: &[f64],
) -> Result<ScalingReport> {
    if scales.is_empty() {
        return Err(Error::Domain("at least one scale is required".into()));
    }
    if scales.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Domain("scales must be positive and finite".into()));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("scales must be strictly decreasing".into()));
    }
    let assignment = StepBasisAssignment::identity();
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let trace = evolve_lambda_sde(&path_template.scaled(scale), t, sample, &assignment)?;
        let max_difference = trace
            .records
            .iter()
            .map(|r| (r.sde_factor - r.closed_form_factor).abs())
            .fold(0.0, f64::max);
        rows.push(ScalingRow { scale, max_difference });
    }
    Ok(ScalingReport { slope: log_log_slope(&rows), rows })
}

fn log_log_slope(rows: &[ScalingRow]) -> Option<f64> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_difference > 0.0)
        .map(|r| (r.scale.ln(), r.max_difference.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_space::BasisSpec;
    use crate::shift_map::build_shift;

    #[test]
    fn empty_path_keeps_lambda_at_one() {
        let path = JumpPath::empty(1.0).unwrap();
        let trace = evolve_lambda_sde(&path, 1.0, &GaussianSample::zeros(2), &StepBasisAssignment::identity()).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.sde_value(), 1.0);
        assert_eq!(trace.closed_form_value(), 1.0);
    }

    #[test]
    fn zero_jump_is_neutral() {
        for xi in [-1.0, 0.3, 1.0, 2.5] {
            assert_eq!(sde_factor(0.0, xi), 1.0);
            assert_eq!(closed_form_factor(0.0, xi).unwrap(), 1.0);
        }
    }

    #[test]
    fn sde_factor_reference_value() {
        // 1 − [1.05 − 1]·0.1 + e^{0.1·(0.95 − 1)}·(1.1·e^{−0.1} − 1)
        assert!((sde_factor(0.1, 1.0) - 0.990_344_495_652_209_9).abs() < 1e-15);
    }

    #[test]
    fn closed_form_trace_matches_full_jacobian() {
        let path = JumpPath::from_schedule(&[0.1, 0.3, 0.45, 0.8], &[0.4, -0.3, 1.2, -0.6], 1.0).unwrap();
        let basis = BasisSpec::abstract_coordinates(5).unwrap();
        let sample = GaussianSample::new(vec![0.3, -1.4, 0.8, 2.1, -0.5]).unwrap();
        let id = StepBasisAssignment::identity();
        for t in [0.2, 0.5, 1.0] {
            let trace = evolve_lambda_sde(&path, t, &sample, &id).unwrap();
            let op = build_shift(&path, t, &basis, &id, 0.0).unwrap();
            let full = op.jacobian(&sample).unwrap().lambda_value;
            assert!((trace.closed_form_value() - full).abs() <= 1e-12 * full.abs());
        }
    }

    #[test]
    fn sample_too_short_is_capacity_error() {
        let path = JumpPath::from_schedule(&[0.1, 0.3], &[0.4, -0.3], 1.0).unwrap();
        let err = evolve_lambda_sde(&path, 1.0, &GaussianSample::zeros(1), &StepBasisAssignment::identity());
        assert!(matches!(err, Err(Error::Capacity { .. })));
    }

    #[test]
    fn scaling_report_all_zero_sizes() {
        let path = JumpPath::from_schedule(&[0.1, 0.3], &[0.0, 0.0], 1.0).unwrap();
        let sample = GaussianSample::new(vec![0.7, -1.2]).unwrap();
        let report = compare_evolutions(&path, 1.0, &sample, &[1.0, 0.5, 0.25]).unwrap();
        assert!(report.rows.iter().all(|r| r.max_difference == 0.0));
        assert_eq!(report.slope, None);
    }

    #[test]
    fn single_jump_difference_is_second_order() {
        // leading gap is λ²(1 − ξ²)²/2 for ξ² ≠ 1
        let path = JumpPath::from_schedule(&[0.5], &[0.05], 1.0).unwrap();
        let sample = GaussianSample::new(vec![0.4]).unwrap();
        let scales = [1.0, 0.5, 0.25, 0.125];
        let report = compare_evolutions(&path, 1.0, &sample, &scales).unwrap();
        let slope = report.slope.unwrap();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        let lead = |c: f64| (0.05 * c).powi(2) * (1.0f64 - 0.16).powi(2) / 2.0;
        let last = report.rows.last().unwrap();
        assert!((last.max_difference - lead(0.125)).abs() < 0.05 * lead(0.125));
        let again = compare_evolutions(&path, 1.0, &sample, &scales).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn scales_must_decrease() {
        let path = JumpPath::from_schedule(&[0.5], &[0.2], 1.0).unwrap();
        let sample = GaussianSample::new(vec![0.4]).unwrap();
        assert!(compare_evolutions(&path, 1.0, &sample, &[0.5, 1.0]).is_err());
        assert!(compare_evolutions(&path, 1.0, &sample, &[1.0, 0.0]).is_err());
        assert!(compare_evolutions(&path, 1.0, &sample, &[]).is_err());
    }
}

//! Dispatching a validated config to the library and collecting checks.

use std::time::Instant;

use tangent_core::degree_mc::{
    change_of_variables_residual, estimate_abs_jacobian, estimate_mean_jacobian, quadrature_oracle,
    sum_over_preimage_check, Integrand, McEstimate, MonteCarlo,
};
use tangent_core::gauss_space::{BasisKind, GaussianSample, StepBasisAssignment};
use tangent_core::inverse_solver::{functional_sde_residual, invert_exact, picard_inverse};
use tangent_core::jump_process::{sample_compound_poisson, JumpPath};
use tangent_core::lambda_evolution::{compare_evolutions, evolve_lambda_sde};
use tangent_core::seeding::{stream, Purpose};
use tangent_core::shift_map::{build_shift, truncation_distance, ShiftOperator};
use tangent_core::Error;

use crate::config::{validate, Experiment, ExperimentConfig, Plan, Process};
use crate::error::CliError;
use crate::report::{Check, InverseSummary, NamedEstimate, Report, TruncationRow};

/// Exact-inverse round trip bound.
pub const ROUNDTRIP_TOL: f64 = 1e-12;
/// Bound on the functional equation residual at the dyadic grid.
pub const SDE_RESIDUAL_TOL: f64 = 1e-10;
/// Allowed relative gap between the observed Picard rate and `max |λ|`.
pub const PICARD_RATE_REL_TOL: f64 = 0.1;
/// Minimum log–log slope of the per-jump factor gap.
pub const MIN_SCALING_SLOPE: f64 = 1.8;
/// Relative bound for the closed-form trace against the full Jacobian.
pub const TRACE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    /// Record wall-clock duration in the report (breaks byte-identity between runs).
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, timing: false }
    }
}

/// Draws or builds the jump path for a plan.
pub fn jump_path(plan: &Plan) -> Result<JumpPath, CliError> {
    match &plan.process {
        Process::Fixed(path) => Ok(path.clone()),
        Process::CompoundPoisson { rate, sizes, max_jumps } => {
            let mut rng = stream(plan.seed, Purpose::JumpPath, 0);
            let path = sample_compound_poisson(*rate, sizes, plan.horizon, &mut rng)?;
            if path.len() > *max_jumps {
                return Err(Error::Capacity { needed: path.len(), available: *max_jumps }.into());
            }
            Ok(path)
        }
    }
}

/// The single Gaussian sample used by deterministic experiments.
pub fn fixed_sample(plan: &Plan) -> GaussianSample {
    GaussianSample::sample(&plan.basis, &mut stream(plan.seed, Purpose::FixedSample, 0))
}

/// Validates and runs `config`.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<Report, CliError> {
    let plan = validate(config)?;
    run_plan(config, &plan, options)
}

struct Builder {
    checks: Vec<Check>,
    estimates: Vec<NamedEstimate>,
    notes: Vec<String>,
}

impl Builder {
    fn estimate(&mut self, name: &str, estimate: McEstimate) {
        if estimate.unreliable {
            self.notes.push(format!("{name}: an eigenvalue lies in the heavy-tail interval; the standard error is not meaningful"));
        }
        self.estimates.push(NamedEstimate { name: name.into(), estimate });
    }

    /// `|mean − target| <= k·stderr`.
    fn sigma_check(&mut self, name: &str, estimate: &McEstimate, target: f64, sigmas: f64) {
        let mut check = Check::within(name, estimate.mean, target, sigmas * estimate.stderr);
        check.passed = McEstimate { target: Some(target), ..*estimate }.within_sigmas(sigmas);
        self.checks.push(check);
    }
}

pub fn run_plan(config: &ExperimentConfig, plan: &Plan, options: &RunOptions) -> Result<Report, CliError> {
    let start = Instant::now();
    let mc = MonteCarlo::new(plan.seed, options.workers);
    let path = jump_path(plan)?;
    let assignment = StepBasisAssignment::identity();
    let op = build_shift(&path, plan.t_eval, &plan.basis, &assignment, plan.eps)?;
    let mut b = Builder { checks: Vec::new(), estimates: Vec::new(), notes: Vec::new() };
    let mut report = Report {
        config: config.clone(),
        experiment: plan.experiment.name().into(),
        passed: false,
        jump_count: path.jumps_up_to(plan.t_eval)?.len(),
        active_count: op.active().len(),
        checks: Vec::new(),
        estimates: Vec::new(),
        trace: None,
        scaling: None,
        truncation: None,
        inverse: None,
        notes: Vec::new(),
        duration_seconds: None,
    };

    match &plan.experiment {
        Experiment::Degree { samples, sigmas } => {
            let est = estimate_mean_jacobian(&op, *samples, &mc)?;
            b.estimate("mean_jacobian", est);
            b.sigma_check("mean_jacobian", &est, op.det2_sign(), *sigmas);
            degeneracy_checks(&mut b, &op, *samples, &mc)?;
        }
        Experiment::AbsJacobian { samples, sigmas } => {
            let est = estimate_abs_jacobian(&op, *samples, &mc)?;
            b.estimate("abs_jacobian", est);
            let target = if op.is_degenerate() { 0.0 } else { 1.0 };
            b.sigma_check("abs_jacobian", &est, target, *sigmas);
            degeneracy_checks(&mut b, &op, *samples, &mc)?;
        }
        Experiment::ChangeOfVariables { samples, sigmas, f, nodes } => {
            let cv = change_of_variables_residual(&op, f, *samples, &mc)?;
            b.estimate("residual", cv.residual);
            b.estimate("weighted_pushforward", cv.weighted_pushforward);
            b.estimate("plain", cv.plain);
            b.estimate("jacobian", cv.jacobian);
            b.estimate("product", cv.product);
            b.sigma_check("residual", &cv.residual, 0.0, *sigmas);
            match oracle_pair(&op, Integrand::WeightedPushforward(f), Integrand::Plain(f), *nodes)? {
                Some((lhs, rhs)) => {
                    b.sigma_check("weighted_pushforward_vs_oracle", &cv.weighted_pushforward, lhs, *sigmas);
                    b.sigma_check("plain_vs_oracle", &cv.plain, rhs, *sigmas);
                    b.checks.push(Check::within("oracle_identity", lhs, rhs * op.det2_sign(), 1e-10));
                }
                None => b.notes.push(too_many_dimensions()),
            }
        }
        Experiment::PreimageSum { samples, sigmas, f, g, nodes, tol } => {
            let ps = sum_over_preimage_check(&op, f, g, *samples, &mc)?;
            b.estimate("residual", ps.residual);
            b.estimate("left", ps.left);
            b.estimate("right", ps.right);
            b.sigma_check("residual", &ps.residual, 0.0, *sigmas);
            match oracle_pair(&op, Integrand::PreimageLeft(f, g), Integrand::PreimageRight(f, g), *nodes)? {
                Some((lhs, rhs)) => {
                    b.checks.push(Check::within("left_vs_oracle", ps.left.mean, lhs, *tol));
                    b.checks.push(Check::within("right_vs_oracle", ps.right.mean, rhs, *tol));
                }
                None => b.notes.push(too_many_dimensions()),
            }
        }
        Experiment::Invert { tol, max_iter } => {
            let target = fixed_sample(plan);
            let exact = invert_exact(&op, &target)?;
            b.checks.push(Check::at_most("exact_roundtrip", exact.residual, ROUNDTRIP_TOL));
            if exact.ill_conditioned {
                b.notes.push("some |1 + λ| is below 1e-10; the inverse is ill-conditioned".into());
            }
            let rho = op.max_abs_eigenvalue();
            let mut summary = InverseSummary {
                max_abs_eigenvalue: rho,
                exact_residual: exact.residual,
                picard_iterations: None,
                picard_update_norms: Vec::new(),
                picard_rate: None,
            };
            if rho < 1.0 {
                let picard = picard_inverse(&op, &target, *tol, *max_iter)?;
                let gap = picard
                    .solution
                    .xi()
                    .iter()
                    .zip(exact.solution.xi())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                b.checks.push(Check::at_most("picard_vs_exact", gap, *tol));
                if let Some(rate) = empirical_rate(&picard.update_norms) {
                    b.checks.push(Check::within("picard_rate", rate, rho, PICARD_RATE_REL_TOL * rho));
                    summary.picard_rate = Some(rate);
                } else {
                    b.notes.push("too few Picard updates to fit a rate".into());
                }
                summary.picard_iterations = Some(picard.iterations);
                summary.picard_update_norms = picard.update_norms;
            } else {
                b.notes.push(format!("Picard iteration skipped: max |λ| = {rho} is not below 1"));
            }
            if plan.basis.kind() == BasisKind::Schauder {
                let taus = plan.basis.dyadic_points();
                let residual = functional_sde_residual(&op, &plan.basis, &target, &exact.solution, &taus)?;
                b.checks.push(Check::at_most("functional_sde_residual", residual, SDE_RESIDUAL_TOL));
            }
            report.inverse = Some(summary);
        }
        Experiment::Evolve { scales } => {
            let sample = fixed_sample(plan);
            let trace = evolve_lambda_sde(&path, plan.t_eval, &sample, &assignment)?;
            let untruncated = build_shift(&path, plan.t_eval, &plan.basis, &assignment, 0.0)?;
            let full = untruncated.jacobian(&sample)?.lambda_value;
            b.checks.push(Check::within(
                "closed_form_trace",
                trace.closed_form_value(),
                full,
                TRACE_REL_TOL * full.abs().max(1.0),
            ));
            let scaling = compare_evolutions(&path, plan.t_eval, &sample, scales)?;
            match scaling.slope {
                Some(slope) => b.checks.push(Check::at_least("scaling_slope", slope, MIN_SCALING_SLOPE)),
                None => b.notes.push("fewer than two nonzero differences; no slope fitted".into()),
            }
            report.trace = Some(trace);
            report.scaling = Some(scaling);
        }
        Experiment::TruncationStudy { levels } => {
            let sample = fixed_sample(plan);
            let reference = build_shift(&path, plan.t_eval, &plan.basis, &assignment, 0.0)?;
            let d0 = reference.det2();
            let mut rows = Vec::with_capacity(*levels as usize);
            for k in 1..=*levels {
                let eps = (-(k as f64)).exp2();
                let truncated = build_shift(&path, plan.t_eval, &plan.basis, &assignment, eps)?;
                let det2 = truncated.det2();
                rows.push(TruncationRow {
                    level: k,
                    eps,
                    active: truncated.active().len(),
                    det2,
                    det2_gap: (det2 - d0).abs(),
                    distance: truncation_distance(&truncated, &reference, &sample)?,
                });
            }
            let worst_rise = |f: fn(&TruncationRow) -> f64| {
                rows.windows(2).map(|w| f(&w[1]) - f(&w[0])).fold(0.0f64, f64::max)
            };
            b.checks.push(Check::at_most("det2_gap_rise", worst_rise(|r| r.det2_gap), 0.0));
            b.checks.push(Check::at_most("distance_rise", worst_rise(|r| r.distance), 0.0));
            report.truncation = Some(rows);
        }
    }

    report.passed = b.checks.iter().all(|c| c.passed);
    report.checks = b.checks;
    report.estimates = b.estimates;
    report.notes = b.notes;
    if options.timing {
        report.duration_seconds = Some(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// With some eigenvalue equal to −1, `D_t` must vanish and so must `Λ` on every sample.
fn degeneracy_checks(b: &mut Builder, op: &ShiftOperator, samples: usize, mc: &MonteCarlo) -> Result<(), CliError> {
    if !op.is_degenerate() {
        return Ok(());
    }
    b.checks.push(Check::within("det2_zero", op.det2(), 0.0, 0.0));
    // |Λ| >= 0, so a zero mean means every sample is zero
    let abs = estimate_abs_jacobian(op, samples, mc)?;
    b.checks.push(Check::within("all_samples_zero", abs.mean, 0.0, 0.0));
    Ok(())
}

fn too_many_dimensions() -> String {
    "quadrature oracle skipped: the integrand depends on too many coordinates".into()
}

fn oracle_pair(
    op: &ShiftOperator,
    left: Integrand<'_>,
    right: Integrand<'_>,
    nodes: usize,
) -> Result<Option<(f64, f64)>, CliError> {
    match (quadrature_oracle(op, left, nodes), quadrature_oracle(op, right, nodes)) {
        (Ok(l), Ok(r)) => Ok(Some((l, r))),
        (Err(Error::Unsupported(_)), _) | (_, Err(Error::Unsupported(_))) => Ok(None),
        (Err(e), _) | (_, Err(e)) => Err(e.into()),
    }
}

/// Geometric mean ratio of successive updates over the second half of the run.
pub fn empirical_rate(updates: &[f64]) -> Option<f64> {
    let tail: Vec<f64> = updates.iter().copied().filter(|&u| u > 0.0).collect();
    if tail.len() < 4 {
        return None;
    }
    let mid = tail.len() / 2;
    let last = tail.len() - 1;
    Some((tail[last] / tail[mid]).powf(1.0 / (last - mid) as f64))
}


//! Monte Carlo estimators and quadrature oracles for the degree, change of
//! variables and preimage-sum identities of a shift operator.
//!
//! For a diagonal shift with eigenvalues `λ_n` the map `U_t` is linear, so
//! every point has exactly one preimage when no `λ_n = −1`, and
//!
//! ```text
//! E[Λ]        = Π sign(1 + λ_n)
//! E[|Λ|]      = 1
//! E[f∘U · Λ]  = E[f] · E[Λ]
//! E[f∘U · |Λ| · g] = E[f · g∘U⁻¹]
//! ```
//!
//! Estimators use paired (same-sample) differences for the residuals. Samples
//! are drawn in fixed-size blocks from the streams described in
//! [`crate::seeding`] and merged in block order, so results are bit-identical
//! for every worker count.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss_space::GaussianSample;
use crate::inverse_solver::invert_exact;
use crate::quadrature::{gauss_hermite_normal, piecewise_normal, Rule};
use crate::seeding::{stream, Purpose};
use crate::shift_map::ShiftOperator;

/// Samples per Monte Carlo block.
pub const BLOCK_SIZE: usize = 4096;
/// Default Gauss–Hermite node count per dimension.
pub const DEFAULT_QUADRATURE_NODES: usize = 64;
/// Oracles refuse integrands depending on more coordinates than this.
pub const MAX_QUADRATURE_DIMENSIONS: usize = 3;
pub const MIN_QUADRATURE_NODES: usize = 32;

/// Eigenvalues in `[−(2+√2)/2, −(2−√2)/2]` give `E[Λ²] = ∞` in their coordinate.
pub const HEAVY_TAIL_INTERVAL: (f64, f64) = (
    -(2.0 + std::f64::consts::SQRT_2) / 2.0,
    -(2.0 - std::f64::consts::SQRT_2) / 2.0,
);

/// Running count, mean and centred second moment (Welford), mergeable with
/// the Chan et al. pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.sample_variance() / self.n as f64).sqrt()
    }

    pub fn estimate(&self, target: Option<f64>) -> McEstimate {
        McEstimate {
            mean: self.mean,
            stderr: self.stderr(),
            n: self.n,
            target,
            unreliable: false,
            degenerate: false,
        }
    }
}

/// A Monte Carlo mean with its standard error and the value the identity predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub target: Option<f64>,
    /// The estimator's variance is infinite for this operator; `stderr` is not meaningful.
    pub unreliable: bool,
    pub degenerate: bool,
}

impl McEstimate {
    /// `|mean − target| <= k · stderr`; with a zero standard error this
    /// demands equality to within `1e-12`.
    pub fn within_sigmas(&self, k: f64) -> bool {
        match self.target {
            Some(target) => (self.mean - target).abs() <= (k * self.stderr).max(1e-12),
            None => false,
        }
    }
}

/// Block-structured Monte Carlo driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub seed: u64,
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(seed: u64, workers: usize) -> Self {
        Self { seed, workers: workers.max(1) }
    }

    /// Evaluates `f` on `n` fresh standard Gaussian samples of dimension `dim`
    /// and returns moments for each of its `K` outputs.
    pub fn run<const K: usize, F>(&self, dim: usize, n: usize, f: F) -> [Moments; K]
    where
        F: Fn(&GaussianSample) -> [f64; K] + Sync,
    {
        let blocks = n.div_ceil(BLOCK_SIZE);
        let run_block = |b: usize| -> [Moments; K] {
            let mut rng = stream(self.seed, Purpose::MonteCarloBlock, b as u64);
            let mut sample = GaussianSample::zeros(dim);
            let mut acc = [Moments::default(); K];
            let len = BLOCK_SIZE.min(n - b * BLOCK_SIZE);
            for _ in 0..len {
                sample.resample(&mut rng);
                for (m, v) in acc.iter_mut().zip(f(&sample)) {
                    m.push(v);
                }
            }
            acc
        };

        let workers = self.workers.min(blocks.max(1));
        let partials: Vec<[Moments; K]> = if workers <= 1 {
            (0..blocks).map(run_block).collect()
        } else {
            let mut slots: Vec<Option<[Moments; K]>> = vec![None; blocks];
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let run_block = &run_block;
                        scope.spawn(move || {
                            (w..blocks).step_by(workers).map(|b| (b, run_block(b))).collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (b, acc) in h.join().expect("Monte Carlo worker panicked") {
                        slots[b] = Some(acc);
                    }
                }
            });
            slots.into_iter().map(|s| s.expect("every block evaluated")).collect()
        };

        let mut total = [Moments::default(); K];
        for part in &partials {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        total
    }
}

/// Test functions of a few Gaussian coordinates (1-based: entry `i` of a
/// coefficient or bound list refers to coordinate `i + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `cos(Σ a_n ξ_n)`.
    CosineCylinder { coefficients: Vec<f64> },
    /// `Σ_k c_k s^k` with `s = Σ a_n ξ_n`, degree at most 4.
    PolynomialCylinder { coefficients: Vec<f64>, polynomial: Vec<f64> },
    /// `Π 1{lower_n ≤ ξ_n ≤ upper_n}`.
    IndicatorBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl TestFunction {
    /// The constant function `c`.
    pub fn constant(c: f64) -> Self {
        Self::PolynomialCylinder { coefficients: Vec::new(), polynomial: vec![c] }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Self::CosineCylinder { coefficients } => {
                if coefficients.is_empty() || !finite(coefficients) {
                    return Err(Error::Config("cosine_cylinder needs finite, non-empty coefficients".into()));
                }
            }
            Self::PolynomialCylinder { coefficients, polynomial } => {
                if !finite(coefficients) || !finite(polynomial) {
                    return Err(Error::Config("polynomial_cylinder coefficients must be finite".into()));
                }
                if polynomial.is_empty() || polynomial.len() > 5 {
                    return Err(Error::Config("polynomial_cylinder degree must be between 0 and 4".into()));
                }
            }
            Self::IndicatorBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config("indicator_box needs equal-length, non-empty lower and upper".into()));
                }
                if !finite(lower) || !finite(upper) {
                    return Err(Error::Config("indicator_box bounds must be finite".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::Config("indicator_box needs lower <= upper".into()));
                }
            }
        }
        Ok(())
    }

    /// Highest coordinate the function reads.
    pub fn max_coordinate(&self) -> usize {
        match self {
            Self::CosineCylinder { coefficients } | Self::PolynomialCylinder { coefficients, .. } => {
                coefficients.iter().rposition(|&a| a != 0.0).map_or(0, |i| i + 1)
            }
            Self::IndicatorBox { lower, .. } => lower.len(),
        }
    }

    /// Coordinates (1-based) the function actually depends on.
    pub fn support(&self) -> BTreeSet<usize> {
        match self {
            Self::CosineCylinder { coefficients } => nonzero_indices(coefficients),
            Self::PolynomialCylinder { coefficients, polynomial } => {
                if polynomial.len() <= 1 {
                    BTreeSet::new()
                } else {
                    nonzero_indices(coefficients)
                }
            }
            Self::IndicatorBox { lower, .. } => (1..=lower.len()).collect(),
        }
    }

    pub fn is_bounded_nonnegative(&self) -> bool {
        match self {
            Self::IndicatorBox { .. } => true,
            Self::PolynomialCylinder { polynomial, .. } => self.support().is_empty() && polynomial[0] >= 0.0,
            Self::CosineCylinder { .. } => false,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Self::CosineCylinder { .. } | Self::IndicatorBox { .. } => true,
            Self::PolynomialCylinder { .. } => self.support().is_empty(),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let project = |a: &[f64]| a.iter().zip(xi).map(|(a, x)| a * x).sum::<f64>();
        match self {
            Self::CosineCylinder { coefficients } => project(coefficients).cos(),
            Self::PolynomialCylinder { coefficients, polynomial } => {
                let s = project(coefficients);
                polynomial.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
            Self::IndicatorBox { lower, upper } => {
                let inside = lower.iter().zip(upper).zip(xi).all(|((l, u), x)| (*l..=*u).contains(x));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the function jumps along coordinate `c` (1-based).
    fn jumps_along(&self, c: usize) -> Vec<f64> {
        match self {
            Self::IndicatorBox { lower, upper } if c >= 1 && c <= lower.len() => vec![lower[c - 1], upper[c - 1]],
            _ => Vec::new(),
        }
    }
}

fn nonzero_indices(a: &[f64]) -> BTreeSet<usize> {
    a.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i + 1).collect()
}

fn is_heavy_tailed(op: &ShiftOperator) -> bool {
    // a degenerate Λ is identically zero
    let (lo, hi) = HEAVY_TAIL_INTERVAL;
    !op.is_degenerate() && op.eigenvalues().any(|l| (lo..=hi).contains(&l))
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("Monte Carlo needs at least 2 samples, got {n}")));
    }
    Ok(())
}

fn check_function(op: &ShiftOperator, f: &TestFunction, name: &str) -> Result<()> {
    f.validate()?;
    if f.max_coordinate() > op.dimension() {
        return Err(Error::Config(format!(
            "test function {name} reads coordinate {} but the basis has dimension {}",
            f.max_coordinate(),
            op.dimension()
        )));
    }
    Ok(())
}

/// `f(U(w))` without allocating: the perturbed coordinate vector is written to `buf`.
fn eval_pushforward(op: &ShiftOperator, f: &TestFunction, xi: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend_from_slice(xi);
    for m in op.active() {
        buf[m.index - 1] *= 1.0 + m.eigenvalue;
    }
    f.eval(buf)
}

fn eval_pullback(op: &ShiftOperator, f: &TestFunction, xi: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend_from_slice(xi);
    for m in op.active() {
        buf[m.index - 1] /= 1.0 + m.eigenvalue;
    }
    f.eval(buf)
}

/// Monte Carlo mean of `Λ_t`; the target is `Π sign(1 + λ_n)` (zero when degenerate).
pub fn estimate_mean_jacobian(op: &ShiftOperator, n: usize, mc: &MonteCarlo) -> Result<McEstimate> {
    check_count(n)?;
    let [m] = mc.run(op.dimension(), n, |s| [op.jacobian_unchecked(s.xi()).lambda_value]);
    let mut est = m.estimate(Some(op.det2_sign()));
    est.unreliable = is_heavy_tailed(op);
    est.degenerate = op.is_degenerate();
    Ok(est)
}

/// Monte Carlo mean of `|Λ_t|`; the target is 1, or 0 when degenerate.
pub fn estimate_abs_jacobian(op: &ShiftOperator, n: usize, mc: &MonteCarlo) -> Result<McEstimate> {
    check_count(n)?;
    let [m] = mc.run(op.dimension(), n, |s| [op.jacobian_unchecked(s.xi()).lambda_value.abs()]);
    let degenerate = op.is_degenerate();
    let mut est = m.estimate(Some(if degenerate { 0.0 } else { 1.0 }));
    est.unreliable = is_heavy_tailed(op);
    est.degenerate = degenerate;
    Ok(est)
}

/// Estimates for the change-of-variables identity `E[f∘U·Λ] = E[f]·E[Λ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariablesCheck {
    /// Paired residual `f(U(w))Λ(w) − f(w)·E[Λ]`, target 0.
    pub residual: McEstimate,
    /// `E[f∘U · Λ]`.
    pub weighted_pushforward: McEstimate,
    /// `E[f]`.
    pub plain: McEstimate,
    /// `E[Λ]`.
    pub jacobian: McEstimate,
    /// `E[f]·E[Λ]` from the two estimates above (delta-method standard error).
    pub product: McEstimate,
}

pub fn change_of_variables_residual(
    op: &ShiftOperator,
    f: &TestFunction,
    n: usize,
    mc: &MonteCarlo,
) -> Result<ChangeOfVariablesCheck> {
    check_count(n)?;
    check_function(op, f, "f")?;
    let target_lambda = op.det2_sign();
    let [res, push, plain, lam] = mc.run(op.dimension(), n, |s| {
        let xi = s.xi();
        let lambda = op.jacobian_unchecked(xi).lambda_value;
        let mut buf = Vec::with_capacity(xi.len());
        let fu = eval_pushforward(op, f, xi, &mut buf);
        let fw = f.eval(xi);
        [fu * lambda - fw * target_lambda, fu * lambda, fw, lambda]
    });
    let heavy = is_heavy_tailed(op);
    let degenerate = op.is_degenerate();
    let flag = |mut e: McEstimate, heavy_applies: bool| {
        e.unreliable = heavy && heavy_applies;
        e.degenerate = degenerate;
        e
    };
    let plain = flag(plain.estimate(None), false);
    let jacobian = flag(lam.estimate(Some(target_lambda)), true);
    let product = McEstimate {
        mean: plain.mean * jacobian.mean,
        stderr: ((jacobian.mean * plain.stderr).powi(2) + (plain.mean * jacobian.stderr).powi(2)).sqrt(),
        n: n as u64,
        target: None,
        unreliable: heavy,
        degenerate,
    };
    Ok(ChangeOfVariablesCheck {
        residual: flag(res.estimate(Some(0.0)), true),
        weighted_pushforward: flag(push.estimate(None), true),
        plain,
        jacobian,
        product,
    })
}

/// Estimates for `E[f∘U · |Λ| · g] = E[f · g∘U⁻¹]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreimageSumCheck {
    /// Paired residual of the two sides, target 0.
    pub residual: McEstimate,
    pub left: McEstimate,
    pub right: McEstimate,
}

pub fn sum_over_preimage_check(
    op: &ShiftOperator,
    f: &TestFunction,
    g: &TestFunction,
    n: usize,
    mc: &MonteCarlo,
) -> Result<PreimageSumCheck> {
    check_count(n)?;
    check_function(op, f, "f")?;
    check_function(op, g, "g")?;
    for (name, func) in [("f", f), ("g", g)] {
        if !func.is_bounded_nonnegative() {
            return Err(Error::Config(format!("test function {name} must be bounded and nonnegative")));
        }
    }
    if op.is_degenerate() {
        return Err(Error::Degenerate("the preimage sum is undefined when some eigenvalue is -1".into()));
    }
    let [res, left, right] = mc.run(op.dimension(), n, |s| {
        let xi = s.xi();
        let abs_lambda = op.jacobian_unchecked(xi).lambda_value.abs();
        let mut buf = Vec::with_capacity(xi.len());
        let lhs = eval_pushforward(op, f, xi, &mut buf) * abs_lambda * g.eval(xi);
        let rhs = f.eval(xi) * eval_pullback(op, g, xi, &mut buf);
        [lhs - rhs, lhs, rhs]
    });
    let heavy = is_heavy_tailed(op);
    let mut residual = res.estimate(Some(0.0));
    let mut left = left.estimate(None);
    residual.unreliable = heavy;
    left.unreliable = heavy;
    Ok(PreimageSumCheck { residual, left, right: right.estimate(None) })
}

/// Integrands understood by [`quadrature_oracle`].
#[derive(Debug, Clone, Copy)]
pub enum Integrand<'a> {
    /// `Λ`.
    Jacobian,
    /// `|Λ|`.
    AbsJacobian,
    /// `f∘U · Λ`.
    WeightedPushforward(&'a TestFunction),
    /// `f`.
    Plain(&'a TestFunction),
    /// `f∘U · |Λ| · g`.
    PreimageLeft(&'a TestFunction, &'a TestFunction),
    /// `f · g∘U⁻¹`.
    PreimageRight(&'a TestFunction, &'a TestFunction),
}

/// Tensor-product quadrature of an integrand against the Gaussian measure.
///
/// Only the coordinates the integrand depends on are integrated; all others
/// integrate out exactly. Coordinates without discontinuities use a
/// `nodes`-point Gauss–Hermite rule; coordinates where an indicator jumps use
/// a composite Gauss–Legendre rule split at the jump points, with `nodes`
/// points per piece.
pub fn quadrature_oracle(op: &ShiftOperator, integrand: Integrand<'_>, nodes: usize) -> Result<f64> {
    if nodes < MIN_QUADRATURE_NODES {
        return Err(Error::Domain(format!("quadrature needs at least {MIN_QUADRATURE_NODES} nodes, got {nodes}")));
    }
    let functions: Vec<&TestFunction> = match integrand {
        Integrand::Jacobian | Integrand::AbsJacobian => vec![],
        Integrand::WeightedPushforward(f) | Integrand::Plain(f) => vec![f],
        Integrand::PreimageLeft(f, g) | Integrand::PreimageRight(f, g) => vec![f, g],
    };
    for f in &functions {
        check_function(op, f, "integrand")?;
    }
    if matches!(integrand, Integrand::PreimageRight(..)) && op.is_degenerate() {
        return Err(Error::Degenerate("g∘U⁻¹ is undefined when some eigenvalue is -1".into()));
    }

    let uses_jacobian = !matches!(integrand, Integrand::Plain(_));
    let mut coords: BTreeSet<usize> = functions.iter().flat_map(|f| f.support()).collect();
    if uses_jacobian {
        coords.extend(op.active().iter().map(|m| m.index));
    }
    if coords.len() > MAX_QUADRATURE_DIMENSIONS {
        return Err(Error::Unsupported(format!(
            "quadrature over {} coordinates; at most {MAX_QUADRATURE_DIMENSIONS} supported",
            coords.len()
        )));
    }

    let scale = |c: usize| {
        op.active().iter().find(|m| m.index == c).map_or(1.0, |m| 1.0 + m.eigenvalue)
    };
    let hermite = gauss_hermite_normal(nodes)?;
    let coords: Vec<usize> = coords.into_iter().collect();
    let mut rules: Vec<Rule> = Vec::with_capacity(coords.len());
    for &c in &coords {
        let s = scale(c);
        let mut cuts = Vec::new();
        let mapped = |f: &TestFunction, factor: Option<f64>| -> Vec<f64> {
            f.jumps_along(c).into_iter().filter_map(|b| factor.map(|k| b * k)).collect()
        };
        let through_u = if s != 0.0 { Some(1.0 / s) } else { None };
        match integrand {
            Integrand::Jacobian | Integrand::AbsJacobian => {}
            Integrand::Plain(f) => cuts.extend(mapped(f, Some(1.0))),
            Integrand::WeightedPushforward(f) => cuts.extend(mapped(f, through_u)),
            Integrand::PreimageLeft(f, g) => {
                cuts.extend(mapped(f, through_u));
                cuts.extend(mapped(g, Some(1.0)));
            }
            Integrand::PreimageRight(f, g) => {
                cuts.extend(mapped(f, Some(1.0)));
                cuts.extend(mapped(g, Some(s)));
            }
        }
        rules.push(if cuts.is_empty() { hermite.clone() } else { piecewise_normal(&cuts, nodes)? });
    }

    let dim = op.dimension();
    let mut xi = vec![0.0; dim];
    let mut buf = Vec::with_capacity(dim);
    let mut eval = |xi: &[f64]| -> Result<f64> {
        Ok(match integrand {
            Integrand::Jacobian => op.jacobian_unchecked(xi).lambda_value,
            Integrand::AbsJacobian => op.jacobian_unchecked(xi).lambda_value.abs(),
            Integrand::Plain(f) => f.eval(xi),
            Integrand::WeightedPushforward(f) => {
                eval_pushforward(op, f, xi, &mut buf) * op.jacobian_unchecked(xi).lambda_value
            }
            Integrand::PreimageLeft(f, g) => {
                eval_pushforward(op, f, xi, &mut buf) * op.jacobian_unchecked(xi).lambda_value.abs() * g.eval(xi)
            }
            Integrand::PreimageRight(f, g) => {
                let target = GaussianSample::new(xi.to_vec())?;
                let pre = invert_exact(op, &target)?;
                f.eval(xi) * g.eval(pre.solution.xi())
            }
        })
    };

    if rules.is_empty() {
        return eval(&xi);
    }
    // odometer over the tensor grid
    let mut idx = vec![0usize; rules.len()];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for ((rule, &i), &c) in rules.iter().zip(&idx).zip(&coords) {
            xi[c - 1] = rule.nodes[i];
            weight *= rule.weights[i];
        }
        total += weight * eval(&xi)?;
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < rules[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == rules.len() {
                return Ok(total);
            }
        }
    }
}

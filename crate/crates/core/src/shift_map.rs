//! The diagonal shift `u_t(w) = Σ λ_n δe_n(w) e_n` and its Gaussian Jacobian.
//!
//! The eigenvalues `λ_n` are the jump sizes of a path up to time `t`, each
//! attached to the basis index given by the step-basis assignment. The
//! Jacobian of `U_t = I + u_t` factors as
//!
//! ```text
//! Λ_t = det₂(I + ∇u_t) · exp(−δu_t − |u_t|²_H / 2)
//!     = Π (1+λ_n) e^{−λ_n} · exp(−Σ λ_n (ξ_n² − 1) − ½ Σ λ_n² ξ_n²)
//! ```

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::gauss_space::{BasisSpec, GaussianSample, StepBasisAssignment};
use crate::jump_process::{det2_product, JumpPath, SignedLog, LOG_SPACE_FACTOR_COUNT, LOG_SPACE_NEAR_ZERO};

/// One active diagonal entry: basis index (1-based) and eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftMode {
    pub index: usize,
    pub eigenvalue: f64,
}

/// Sparse diagonal Hilbert–Schmidt operator `∂u_t = Σ λ_n e_n ⊗ e_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    active: Vec<ShiftMode>,
    eps: f64,
    t: Option<f64>,
    dimension: usize,
    origin: u64,
}

/// The factors of `Λ_t` for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianBreakdown {
    /// `Π (1 + λ_n) e^{−λ_n}`.
    pub det2: f64,
    /// `δu_t = Σ λ_n (ξ_n² − 1)`.
    pub divergence: f64,
    /// `|u_t|²_H = Σ λ_n² ξ_n²`.
    pub norm2: f64,
    /// `Λ_t`.
    pub lambda_value: f64,
    /// Some `λ_n = −1`.
    pub degenerate: bool,
}

fn fingerprint(path: &JumpPath, after: Option<f64>, t: f64) -> u64 {
    let mut h = DefaultHasher::new();
    path.horizon().to_bits().hash(&mut h);
    for ev in path.events() {
        ev.time.to_bits().hash(&mut h);
        ev.size.to_bits().hash(&mut h);
    }
    after.map(f64::to_bits).hash(&mut h);
    t.to_bits().hash(&mut h);
    h.finish()
}

/// Builds `∂u_t` from the jumps of `path` up to `t` whose size exceeds `eps`
/// in absolute value.
pub fn build_shift(
    path: &JumpPath,
    t: f64,
    basis: &BasisSpec,
    assignment: &StepBasisAssignment,
    eps: f64,
) -> Result<ShiftOperator> {
    build_shift_window(path, None, t, basis, assignment, eps)
}

/// As [`build_shift`], restricted to jumps with time in `(after, t]`.
/// Basis indices stay those of the full path.
pub fn build_shift_window(
    path: &JumpPath,
    after: Option<f64>,
    t: f64,
    basis: &BasisSpec,
    assignment: &StepBasisAssignment,
    eps: f64,
) -> Result<ShiftOperator> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Domain(format!("truncation threshold must be >= 0, got {eps}")));
    }
    let jumps = path.jumps_up_to(t)?;
    if jumps.len() > basis.dimension() {
        return Err(Error::Capacity { needed: jumps.len(), available: basis.dimension() });
    }
    let active = jumps
        .iter()
        .enumerate()
        .filter(|(_, ev)| after.is_none_or(|a| ev.time > a))
        .filter(|(_, ev)| ev.size.abs() > eps)
        .map(|(pos, ev)| ShiftMode { index: assignment.basis_index(pos), eigenvalue: ev.size })
        .collect();
    Ok(ShiftOperator {
        active,
        eps,
        t: Some(t),
        dimension: basis.dimension(),
        origin: fingerprint(path, after, t),
    })
}

impl ShiftOperator {
    /// Operator with eigenvalue `eigenvalues[i]` on basis index `i + 1`,
    /// dropping entries with `|λ| <= eps`.
    pub fn from_eigenvalues(eigenvalues: &[f64], dimension: usize, eps: f64) -> Result<Self> {
        if eigenvalues.len() > dimension {
            return Err(Error::Capacity { needed: eigenvalues.len(), available: dimension });
        }
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::Domain(format!("truncation threshold must be >= 0, got {eps}")));
        }
        if let Some(i) = eigenvalues.iter().position(|l| !l.is_finite()) {
            return Err(Error::Config(format!("eigenvalue {} is not finite", i + 1)));
        }
        let mut h = DefaultHasher::new();
        for l in eigenvalues {
            l.to_bits().hash(&mut h);
        }
        let active = eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.abs() > eps)
            .map(|(i, &l)| ShiftMode { index: i + 1, eigenvalue: l })
            .collect();
        Ok(Self { active, eps, t: None, dimension, origin: h.finish() })
    }

    pub fn active(&self) -> &[ShiftMode] {
        &self.active
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.active.iter().map(|m| m.eigenvalue)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Evaluation time, `None` for operators built from bare eigenvalues.
    pub fn time(&self) -> Option<f64> {
        self.t
    }

    /// Dimension of the basis the operator was built against.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn hs_norm_squared(&self) -> f64 {
        self.eigenvalues().map(|l| l * l).sum()
    }

    /// Hilbert–Schmidt norm `(Σ λ_n²)^{1/2}`.
    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_squared().sqrt()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues().fold(0.0, |m, l| m.max(l.abs()))
    }

    pub fn is_degenerate(&self) -> bool {
        self.eigenvalues().any(|l| l == -1.0)
    }

    /// `Π sign(1 + λ_n)`, zero when degenerate.
    pub fn det2_sign(&self) -> f64 {
        self.eigenvalues().fold(1.0, |s, l| s * sign(1.0 + l))
    }

    pub fn det2(&self) -> f64 {
        det2_product(self.eigenvalues())
    }

    fn check_sample(&self, sample: &GaussianSample) -> Result<()> {
        if let Some(max) = self.active.iter().map(|m| m.index).max() {
            if max > sample.dimension() {
                return Err(Error::Capacity { needed: max, available: sample.dimension() });
            }
        }
        Ok(())
    }

    /// Coordinates of `u_t(w)`: `λ_n ξ_n` on active indices, zero elsewhere.
    pub fn apply_u(&self, sample: &GaussianSample) -> Result<Vec<f64>> {
        self.check_sample(sample)?;
        let xi = sample.xi();
        let mut out = vec![0.0; xi.len()];
        for m in &self.active {
            out[m.index - 1] = m.eigenvalue * xi[m.index - 1];
        }
        Ok(out)
    }

    /// `U_t(w) = w + u_t(w)`: coordinate `n` becomes `(1 + λ_n) ξ_n`.
    pub fn apply_perturbation(&self, sample: &GaussianSample) -> Result<GaussianSample> {
        self.check_sample(sample)?;
        let mut out = sample.clone();
        let xi = out.xi_mut();
        for m in &self.active {
            xi[m.index - 1] *= 1.0 + m.eigenvalue;
        }
        Ok(out)
    }

    /// The factored Gaussian Jacobian `Λ_t` at `sample`.
    pub fn jacobian(&self, sample: &GaussianSample) -> Result<JacobianBreakdown> {
        self.check_sample(sample)?;
        Ok(self.jacobian_unchecked(sample.xi()))
    }

    pub(crate) fn jacobian_unchecked(&self, xi: &[f64]) -> JacobianBreakdown {
        let mut divergence = 0.0;
        let mut norm2 = 0.0;
        let mut log_space = self.active.len() > LOG_SPACE_FACTOR_COUNT;
        let mut degenerate = false;
        for m in &self.active {
            let x = xi[m.index - 1];
            let l = m.eigenvalue;
            divergence += l * (x * x - 1.0);
            norm2 += l * l * x * x;
            let factor = 1.0 + l;
            degenerate |= factor == 0.0;
            log_space |= factor.abs() < LOG_SPACE_NEAR_ZERO;
        }
        if degenerate {
            return JacobianBreakdown { det2: 0.0, divergence, norm2, lambda_value: 0.0, degenerate };
        }
        let exponent = -divergence - 0.5 * norm2;
        let (det2, lambda_value) = if log_space {
            let signed = SignedLog::det2(self.eigenvalues());
            (signed.value(), signed.sign * (signed.log_abs + exponent).exp())
        } else {
            let det2 = det2_product(self.eigenvalues());
            (det2, det2 * exponent.exp())
        };
        JacobianBreakdown { det2, divergence, norm2, lambda_value, degenerate }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|u^ε_t(w) − u^η_t(w)|_H`, computed from the coordinate difference of the
/// two shifts. Both operators must come from the same path and time.
pub fn truncation_distance(a: &ShiftOperator, b: &ShiftOperator, sample: &GaussianSample) -> Result<f64> {
    if a.origin != b.origin || a.dimension != b.dimension {
        return Err(Error::Usage("truncation_distance needs operators built from the same path and time".into()));
    }
    let ua = a.apply_u(sample)?;
    let ub = b.apply_u(sample)?;
    Ok(ua.iter().zip(&ub).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

//! A truncated model of the Wiener space.
//!
//! A point `w` is represented by its Gaussian coordinates `ξ_n = δe_n(w)`
//! against an orthonormal basis `(e_n)` of the Cameron–Martin space. Two basis
//! kinds exist: bare coordinates, and the Schauder basis of the classical
//! Wiener space on `[0, 1]`, where `e_1(τ) = τ` and `e_n` for `n ≥ 2` are the
//! integrated Haar functions in dyadic order. With the Schauder basis a
//! sample reconstructs the piecewise-linear path `W_τ = Σ ξ_n e_n(τ)`.
//!
//! Basis indices are 1-based throughout.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Plain Gaussian coordinates with no path structure.
    Abstract,
    /// Lévy–Ciesielski basis of `H = H_0^1([0, 1])`.
    Schauder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    dimension: usize,
    kind: BasisKind,
}

/// Dyadic position of a Haar function: level `j`, shift `k`, for `n = 2^j + k + 1`.
#[derive(Debug, Clone, Copy)]
struct Dyadic {
    scale: f64,
    left: f64,
    mid: f64,
    right: f64,
}

impl Dyadic {
    fn of(n: usize) -> Option<Self> {
        if n < 2 {
            return None;
        }
        let m = n - 1;
        let level = usize::BITS - 1 - m.leading_zeros();
        let shift = m - (1usize << level);
        let width = (-(level as f64)).exp2();
        Some(Self {
            scale: (level as f64 / 2.0).exp2(),
            left: shift as f64 * width,
            mid: (shift as f64 + 0.5) * width,
            right: (shift as f64 + 1.0) * width,
        })
    }
}

impl BasisSpec {
    pub fn new(dimension: usize, kind: BasisKind) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("basis dimension must be >= 1".into()));
        }
        Ok(Self { dimension, kind })
    }

    pub fn abstract_coordinates(dimension: usize) -> Result<Self> {
        Self::new(dimension, BasisKind::Abstract)
    }

    pub fn schauder(dimension: usize) -> Result<Self> {
        Self::new(dimension, BasisKind::Schauder)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    fn require_schauder(&self, what: &str) -> Result<()> {
        match self.kind {
            BasisKind::Schauder => Ok(()),
            BasisKind::Abstract => Err(Error::Unsupported(format!(
                "{what} needs the schauder basis, not abstract coordinates"
            ))),
        }
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.dimension {
            return Err(Error::Domain(format!("basis index {n} outside 1..={}", self.dimension)));
        }
        Ok(())
    }

    /// Level `L` of the dyadic grid `k / 2^L` on which every retained Haar
    /// derivative is constant (`L = 6` for `N = 63` and `N = 64`).
    pub fn grid_level(&self) -> u32 {
        if self.dimension <= 1 {
            0
        } else {
            let m = self.dimension - 1;
            usize::BITS - m.leading_zeros()
        }
    }

    /// The grid points `k / 2^L`, `k = 0..=2^L`.
    pub fn dyadic_points(&self) -> Vec<f64> {
        let cells = 1usize << self.grid_level();
        (0..=cells).map(|k| k as f64 / cells as f64).collect()
    }

    /// `e_n(τ)`.
    pub fn basis_value(&self, n: usize, tau: f64) -> Result<f64> {
        self.require_schauder("basis_value")?;
        self.check_index(n)?;
        check_unit(tau)?;
        Ok(schauder_value(n, tau))
    }

    /// `ė_n(s)`, the Haar function, right-continuous at its breakpoints.
    pub fn basis_derivative_value(&self, n: usize, s: f64) -> Result<f64> {
        self.require_schauder("basis_derivative_value")?;
        self.check_index(n)?;
        check_unit(s)?;
        Ok(haar_value(n, s))
    }

    /// `⟨ė_m, ė_n⟩_{L²[0,1]}` for all retained `m, n`, integrated exactly over
    /// the dyadic cells.
    pub fn derivative_gram(&self) -> Result<Vec<Vec<f64>>> {
        self.require_schauder("derivative_gram")?;
        let cells = 1usize << self.grid_level();
        let width = 1.0 / cells as f64;
        let values: Vec<Vec<f64>> = (1..=self.dimension)
            .map(|n| (0..cells).map(|c| haar_value(n, c as f64 * width)).collect())
            .collect();
        Ok((0..self.dimension)
            .map(|a| {
                (0..self.dimension)
                    .map(|b| values[a].iter().zip(&values[b]).map(|(x, y)| x * y).sum::<f64>() * width)
                    .collect()
            })
            .collect())
    }
}

fn check_unit(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("{tau} outside [0, 1]")));
    }
    Ok(())
}

fn schauder_value(n: usize, tau: f64) -> f64 {
    match Dyadic::of(n) {
        None => tau,
        Some(d) => {
            if tau <= d.left || tau >= d.right {
                0.0
            } else if tau < d.mid {
                d.scale * (tau - d.left)
            } else {
                d.scale * (d.right - tau)
            }
        }
    }
}

fn haar_value(n: usize, s: f64) -> f64 {
    match Dyadic::of(n) {
        None => 1.0,
        Some(d) => {
            if s >= d.left && s < d.mid {
                d.scale
            } else if s >= d.mid && s < d.right {
                -d.scale
            } else {
                0.0
            }
        }
    }
}

/// Gaussian coordinates `ξ_n = δe_n(w)` of a Wiener-space point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSample {
    xi: Vec<f64>,
}

impl GaussianSample {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::Config("a Gaussian sample needs at least one coordinate".into()));
        }
        if let Some(i) = xi.iter().position(|x| !x.is_finite()) {
            return Err(Error::Config(format!("coordinate {} is not finite", i + 1)));
        }
        Ok(Self { xi })
    }

    pub fn zeros(dimension: usize) -> Self {
        Self { xi: vec![0.0; dimension.max(1)] }
    }

    /// `N` i.i.d. standard normal coordinates.
    pub fn sample<R: Rng + ?Sized>(basis: &BasisSpec, rng: &mut R) -> Self {
        let mut s = Self::zeros(basis.dimension());
        s.resample(rng);
        s
    }

    /// Overwrites every coordinate with a fresh standard normal draw.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for x in &mut self.xi {
            *x = rng.sample(StandardNormal);
        }
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub(crate) fn xi_mut(&mut self) -> &mut [f64] {
        &mut self.xi
    }

    pub fn dimension(&self) -> usize {
        self.xi.len()
    }

    /// `δe_n(w)`, the `n`-th coordinate (1-based).
    pub fn divergence_coord(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.xi.len() {
            return Err(Error::Domain(format!("coordinate {n} outside 1..={}", self.xi.len())));
        }
        Ok(self.xi[n - 1])
    }

    /// `W_τ = Σ ξ_n e_n(τ)` on the Schauder basis.
    pub fn path_value(&self, basis: &BasisSpec, tau: f64) -> Result<f64> {
        basis.require_schauder("path_value")?;
        check_unit(tau)?;
        self.check_matches(basis)?;
        Ok(self.xi.iter().enumerate().map(|(i, x)| x * schauder_value(i + 1, tau)).sum())
    }

    /// `∫_0^1 ė_n(s) dW(s)` against the reconstructed piecewise-linear path,
    /// summed cell by cell over the dyadic grid.
    pub fn path_integral_of_derivative(&self, basis: &BasisSpec, n: usize) -> Result<f64> {
        basis.require_schauder("path_integral_of_derivative")?;
        basis.check_index(n)?;
        self.check_matches(basis)?;
        let points = basis.dyadic_points();
        let mut total = 0.0;
        let mut prev = self.path_value(basis, points[0])?;
        for window in points.windows(2) {
            let next = self.path_value(basis, window[1])?;
            total += haar_value(n, window[0]) * (next - prev);
            prev = next;
        }
        Ok(total)
    }

    fn check_matches(&self, basis: &BasisSpec) -> Result<()> {
        if self.xi.len() != basis.dimension() {
            return Err(Error::Usage(format!(
                "sample has {} coordinates but the basis has dimension {}",
                self.xi.len(),
                basis.dimension()
            )));
        }
        Ok(())
    }
}

/// Which basis coordinate is active on `[T_n, T_{n+1})`.
///
/// Only the identity assignment is provided: the `n`-th jump (1-based, in
/// chronological order) drives basis index `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepBasisAssignment;

impl StepBasisAssignment {
    pub fn identity() -> Self {
        Self
    }

    /// Basis index for the jump at 0-based chronological position `jump_position`.
    pub fn basis_index(&self, jump_position: usize) -> usize {
        jump_position + 1
    }
}

//! Finite-activity pure-jump paths and the products built from their jumps.
//!
//! For a path with jumps `ΔZ_s`, the modified Carleman–Fredholm determinant of
//! the diagonal operator with eigenvalues `ΔZ_s` is
//! `D_t = Π_{s ≤ t} (1 + ΔZ_s) e^{-ΔZ_s}`, and the Doléans-Dade exponential of
//! a pure-jump semimartingale is `exp(Z_t) · D_t`.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this many factors products are accumulated as sign and log-magnitude.
pub const LOG_SPACE_FACTOR_COUNT: usize = 64;
/// Any factor with `|1 + size|` below this also switches to log-space.
pub const LOG_SPACE_NEAR_ZERO: f64 = 1e-8;

/// A single jump of size `size` at process time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

impl JumpEvent {
    pub fn new(time: f64, size: f64) -> Self {
        Self { time, size }
    }
}

/// A time-ordered sequence of jumps on `[0, horizon]`.
///
/// Event times are strictly increasing, so the stopping times enumerating the
/// jumps have disjoint graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    events: Vec<JumpEvent>,
    horizon: f64,
}

impl JumpPath {
    /// Builds a path from explicit events, checking the ordering invariants.
    pub fn new(events: Vec<JumpEvent>, horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::Config(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        for (i, ev) in events.iter().enumerate() {
            if !ev.time.is_finite() || ev.time < 0.0 {
                return Err(Error::Config(format!("event {i}: time must be finite and >= 0, got {}", ev.time)));
            }
            if ev.time > horizon {
                return Err(Error::Config(format!(
                    "event {i}: time {} exceeds horizon {horizon}",
                    ev.time
                )));
            }
            if !ev.size.is_finite() {
                return Err(Error::Config(format!("event {i}: size must be finite, got {}", ev.size)));
            }
            if i > 0 && ev.time <= events[i - 1].time {
                return Err(Error::Config(format!(
                    "event {i}: times must be strictly increasing ({} after {})",
                    ev.time,
                    events[i - 1].time
                )));
            }
        }
        let path = Self { events, horizon };
        if !path.sum_of_squares().is_finite() {
            return Err(Error::Config("sum of squared jump sizes is not finite".into()));
        }
        Ok(path)
    }

    /// Fixed-jump schedule from parallel time and size lists.
    pub fn from_schedule(times: &[f64], sizes: &[f64], horizon: f64) -> Result<Self> {
        if times.len() != sizes.len() {
            return Err(Error::Config(format!(
                "{} times but {} sizes in fixed-jump schedule",
                times.len(),
                sizes.len()
            )));
        }
        let events = times.iter().zip(sizes).map(|(&t, &s)| JumpEvent::new(t, s)).collect();
        Self::new(events, horizon)
    }

    /// Places `sizes` at the equally spaced times `k·horizon/(len+1)`, `k = 1..=len`.
    pub fn evenly_spaced(sizes: &[f64], horizon: f64) -> Result<Self> {
        let step = horizon / (sizes.len() + 1) as f64;
        let times: Vec<f64> = (1..=sizes.len()).map(|k| k as f64 * step).collect();
        Self::from_schedule(&times, sizes, horizon)
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Same jump times, every size multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let events = self
            .events
            .iter()
            .map(|ev| JumpEvent::new(ev.time, ev.size * factor))
            .collect();
        Self { events, horizon: self.horizon }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// All events with `time <= t`, in chronological order.
    pub fn jumps_up_to(&self, t: f64) -> Result<&[JumpEvent]> {
        self.check_time(t)?;
        let count = self.events.partition_point(|ev| ev.time <= t);
        Ok(&self.events[..count])
    }

    /// `Z_t`, the sum of jump sizes up to `t`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.jumps_up_to(t)?.iter().map(|ev| ev.size).sum())
    }

    /// `Σ (ΔZ_s)²` over the whole path.
    pub fn sum_of_squares(&self) -> f64 {
        self.events.iter().map(|ev| ev.size * ev.size).sum()
    }

    /// `Π_{time ≤ t, |size| > eps} (1 + size) e^{-size}`; `eps = 0` keeps every jump.
    pub fn carleman_determinant(&self, t: f64, eps: f64) -> Result<f64> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::Domain(format!("truncation threshold must be >= 0, got {eps}")));
        }
        let jumps = self.jumps_up_to(t)?;
        Ok(det2_product(jumps.iter().map(|ev| ev.size).filter(|s| s.abs() > eps)))
    }

    /// Doléans-Dade exponential with zero continuous part: `exp(Z_t) · D_t`.
    pub fn doleans_exponential(&self, t: f64) -> Result<f64> {
        let jumps = self.jumps_up_to(t)?;
        let sizes = jumps.iter().map(|ev| ev.size);
        let signed = SignedLog::det2(sizes.clone());
        if signed.sign == 0.0 {
            return Ok(0.0);
        }
        let z_t: f64 = sizes.sum();
        if use_log_space(jumps.iter().map(|ev| ev.size)) {
            Ok(signed.sign * (signed.log_abs + z_t).exp())
        } else {
            Ok(z_t.exp() * det2_product(jumps.iter().map(|ev| ev.size)))
        }
    }
}

/// A real number held as sign and natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// -1, 0 or +1.
    pub sign: f64,
    /// `ln |x|`; `-inf` when `sign == 0`.
    pub log_abs: f64,
}

impl SignedLog {
    pub const ONE: Self = Self { sign: 1.0, log_abs: 0.0 };

    /// `Π (1 + λ) e^{-λ}` accumulated in log-space.
    pub fn det2<I: IntoIterator<Item = f64>>(eigenvalues: I) -> Self {
        let mut acc = Self::ONE;
        for lambda in eigenvalues {
            let factor = 1.0 + lambda;
            if factor == 0.0 {
                return Self { sign: 0.0, log_abs: f64::NEG_INFINITY };
            }
            if factor < 0.0 {
                acc.sign = -acc.sign;
            }
            acc.log_abs += factor.abs().ln() - lambda;
        }
        acc
    }

    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

fn use_log_space<I: IntoIterator<Item = f64>>(eigenvalues: I) -> bool {
    let mut count = 0usize;
    for lambda in eigenvalues {
        count += 1;
        if (1.0 + lambda).abs() < LOG_SPACE_NEAR_ZERO || count > LOG_SPACE_FACTOR_COUNT {
            return true;
        }
    }
    false
}

/// The modified Carleman–Fredholm determinant `Π (1 + λ) e^{-λ}` of a diagonal
/// operator. Evaluated directly for short, well-conditioned products and in
/// sign/log-magnitude form otherwise; an exact `-1` eigenvalue gives exactly 0.
pub fn det2_product<I>(eigenvalues: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = eigenvalues.into_iter();
    if use_log_space(iter.clone()) {
        SignedLog::det2(iter).value()
    } else {
        iter.fold(1.0, |acc, lambda| acc * (1.0 + lambda) * (-lambda).exp())
    }
}

/// Jump size law for compound Poisson sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeDistribution {
    /// Uniform choice from a finite list of sizes.
    Fixed { sizes: Vec<f64> },
    /// Uniform on `[a, b)`.
    Uniform { a: f64, b: f64 },
    /// Normal with the given mean and standard deviation.
    Normal { mean: f64, std: f64 },
}

impl SizeDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed { sizes } => {
                if sizes.is_empty() {
                    return Err(Error::Config("fixed size list is empty".into()));
                }
                if sizes.iter().any(|s| !s.is_finite()) {
                    return Err(Error::Config("fixed size list contains a non-finite value".into()));
                }
            }
            Self::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Config(format!("uniform sizes need finite a < b, got a={a}, b={b}")));
                }
            }
            Self::Normal { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && *std > 0.0) {
                    return Err(Error::Config(format!(
                        "normal sizes need finite mean and std > 0, got mean={mean}, std={std}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Fixed { sizes } => sizes[rng.random_range(0..sizes.len())],
            Self::Uniform { a, b } => Uniform::new(*a, *b).expect("validated").sample(rng),
            Self::Normal { mean, std } => Normal::new(*mean, *std).expect("validated").sample(rng),
        }
    }
}

/// Samples a compound Poisson path on `[0, horizon]`.
///
/// The event count is Poisson with mean `rate · horizon`; times are i.i.d.
/// uniform and sorted, with coincident times re-drawn; sizes are i.i.d. from
/// `sizes`.
pub fn sample_compound_poisson<R: Rng + ?Sized>(
    rate: f64,
    sizes: &SizeDistribution,
    horizon: f64,
    rng: &mut R,
) -> Result<JumpPath> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Config(format!("rate must be finite and > 0, got {rate}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::Config(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    sizes.validate()?;

    let mean_count = rate * horizon;
    let count = if mean_count > 0.0 {
        let poisson = Poisson::new(mean_count)
            .map_err(|e| Error::Config(format!("invalid Poisson mean {mean_count}: {e}")))?;
        poisson.sample(rng) as usize
    } else {
        0
    };

    let mut times: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * horizon).collect();
    loop {
        times.sort_by(f64::total_cmp);
        let tie = times.windows(2).position(|w| w[0] == w[1]);
        match tie {
            Some(i) => times[i + 1] = rng.random::<f64>() * horizon,
            None => break,
        }
    }
    let events = times.into_iter().map(|t| JumpEvent::new(t, sizes.draw(rng))).collect();
    JumpPath::new(events, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{stream, Purpose};
    use approx::assert_relative_eq;

    fn two_jumps() -> JumpPath {
        JumpPath::from_schedule(&[0.2, 0.7], &[0.5, -0.5], 1.0).unwrap()
    }

    #[test]
    fn zero_horizon_gives_empty_path() {
        let mut rng = stream(1, Purpose::JumpPath, 0);
        let dist = SizeDistribution::Uniform { a: -0.5, b: 0.5 };
        let path = sample_compound_poisson(1.0, &dist, 0.0, &mut rng).unwrap();
        assert!(path.is_empty());
    }

    #[test]
    fn fixed_schedule_passes_through() {
        let path = two_jumps();
        assert_eq!(path.events(), &[JumpEvent::new(0.2, 0.5), JumpEvent::new(0.7, -0.5)]);
    }

    #[test]
    fn poisson_count_mean() {
        let dist = SizeDistribution::Fixed { sizes: vec![0.1] };
        let n = 100_000;
        let mut rng = stream(11, Purpose::JumpPath, 0);
        let counts: Vec<f64> = (0..n)
            .map(|_| sample_compound_poisson(2.0, &dist, 1.0, &mut rng).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * stderr, "mean {mean} stderr {stderr}");
    }

    #[test]
    fn sampled_times_strictly_increase() {
        let dist = SizeDistribution::Normal { mean: 0.0, std: 0.3 };
        let mut rng = stream(3, Purpose::JumpPath, 0);
        for _ in 0..200 {
            let path = sample_compound_poisson(20.0, &dist, 1.0, &mut rng).unwrap();
            assert!(path.events().windows(2).all(|w| w[0].time < w[1].time));
            assert!(path.events().iter().all(|e| e.time <= 1.0));
        }
    }

    #[test]
    fn invalid_distributions_rejected() {
        let mut rng = stream(1, Purpose::JumpPath, 0);
        for dist in [
            SizeDistribution::Fixed { sizes: vec![] },
            SizeDistribution::Uniform { a: 1.0, b: 1.0 },
            SizeDistribution::Normal { mean: 0.0, std: -1.0 },
        ] {
            assert!(matches!(
                sample_compound_poisson(1.0, &dist, 1.0, &mut rng),
                Err(Error::Config(_))
            ));
        }
        let ok = SizeDistribution::Fixed { sizes: vec![0.1] };
        assert!(sample_compound_poisson(-1.0, &ok, 1.0, &mut rng).is_err());
    }

    #[test]
    fn unordered_or_late_events_rejected() {
        assert!(JumpPath::from_schedule(&[0.7, 0.2], &[0.1, 0.1], 1.0).is_err());
        assert!(JumpPath::from_schedule(&[0.2, 0.2], &[0.1, 0.1], 1.0).is_err());
        assert!(JumpPath::from_schedule(&[0.2, 1.5], &[0.1, 0.1], 1.0).is_err());
        assert!(JumpPath::from_schedule(&[0.2], &[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn jumps_up_to_filters() {
        let path = two_jumps();
        assert_eq!(path.jumps_up_to(0.5).unwrap(), &[JumpEvent::new(0.2, 0.5)]);
        assert!(path.jumps_up_to(0.0).unwrap().is_empty());
        assert_eq!(path.jumps_up_to(1.0).unwrap().len(), 2);
        assert!(matches!(path.jumps_up_to(1.5), Err(Error::Domain(_))));
        assert!(matches!(path.jumps_up_to(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn carleman_examples() {
        let empty = JumpPath::empty(1.0).unwrap();
        assert_eq!(empty.carleman_determinant(1.0, 0.0).unwrap(), 1.0);
        let minus_one = JumpPath::from_schedule(&[0.5], &[-1.0], 1.0).unwrap();
        assert_eq!(minus_one.carleman_determinant(1.0, 0.0).unwrap(), 0.0);
        // 1.5·e^{-0.5} · 0.5·e^{0.5}
        assert_relative_eq!(two_jumps().carleman_determinant(1.0, 0.0).unwrap(), 0.75, max_relative = 1e-15);
    }

    #[test]
    fn doleans_examples() {
        let empty = JumpPath::empty(1.0).unwrap();
        assert_eq!(empty.doleans_exponential(1.0).unwrap(), 1.0);
        let half = JumpPath::from_schedule(&[0.5], &[0.5], 1.0).unwrap();
        assert_relative_eq!(half.doleans_exponential(1.0).unwrap(), 1.5, max_relative = 1e-15);
        let minus_one = JumpPath::from_schedule(&[0.5], &[-1.0], 1.0).unwrap();
        assert_eq!(minus_one.doleans_exponential(1.0).unwrap(), 0.0);
    }

    #[test]
    fn log_space_matches_direct_product() {
        let sizes: Vec<f64> = (0..40).map(|k| 0.05 * ((k % 7) as f64 - 3.0)).collect();
        let direct: f64 = sizes.iter().map(|s| (1.0 + s) * (-s).exp()).product();
        let logged = SignedLog::det2(sizes.iter().copied()).value();
        assert_relative_eq!(direct, logged, max_relative = 1e-12);
    }

    #[test]
    fn long_products_do_not_underflow() {
        let sizes = vec![-0.999; 500];
        let d = det2_product(sizes.iter().copied());
        // each factor is 0.001·e^{0.999} ≈ 2.7e-3; the product underflows to 0
        // but the sign/log form still reports the magnitude
        let s = SignedLog::det2(sizes.iter().copied());
        assert_eq!(s.sign, 1.0);
        assert_relative_eq!(s.log_abs, 500.0 * (0.001f64.ln() + 0.999), max_relative = 1e-12);
        assert!(d >= 0.0);
    }
}

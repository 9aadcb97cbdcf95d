//! One-dimensional Gaussian quadrature rules.
//!
//! Nodes are found by Newton iteration on the three-term recurrences of the
//! orthonormal Hermite and Legendre polynomials.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Integrals beyond this many standard deviations are dropped by the
/// piecewise rule; the Gaussian tail mass there is below `1e-32`.
pub const NORMAL_CUTOFF: f64 = 12.0;

/// Nodes and weights approximating `∫ f dν ≈ Σ w_i f(x_i)` for some measure `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Hermite rule for the standard normal measure: `Σ w_i f(x_i) ≈ E[f(ξ)]`.
pub fn gauss_hermite_normal(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    // physicists' rule for weight e^{-x²}, then x → √2 x and w → w / √π
    let pi_m4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pi_m4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            derivative = (2.0 * nf).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (derivative * derivative);
        w[n - 1 - i] = w[i];
    }
    let nodes = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().rev().map(|v| v / PI.sqrt()).collect();
    Ok(Rule { nodes, weights })
}

/// Gauss–Legendre rule on `[a, b]` for Lebesgue measure.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let nf = n as f64;
    for i in 1..=n.div_ceil(2) {
        let mut z = (PI * (i as f64 - 0.25) / (nf + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            derivative = nf * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        nodes[i - 1] = mid - half * z;
        nodes[n - i] = mid + half * z;
        weights[i - 1] = 2.0 * half / ((1.0 - z * z) * derivative * derivative);
        weights[n - i] = weights[i - 1];
    }
    Ok(Rule { nodes, weights })
}

/// Composite Gauss–Legendre rule for the standard normal measure on
/// `[-NORMAL_CUTOFF, NORMAL_CUTOFF]`, split at `breakpoints` so that an
/// integrand with jumps only at those points is smooth on every piece.
pub fn piecewise_normal(breakpoints: &[f64], nodes_per_piece: usize) -> Result<Rule> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && b.abs() < NORMAL_CUTOFF)
        .chain([-NORMAL_CUTOFF, NORMAL_CUTOFF])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let norm = (2.0 * PI).sqrt().recip();
    let mut rule = Rule { nodes: Vec::new(), weights: Vec::new() };
    for piece in cuts.windows(2) {
        let gl = gauss_legendre(nodes_per_piece, piece[0], piece[1])?;
        for (x, w) in gl.nodes.into_iter().zip(gl.weights) {
            rule.weights.push(w * norm * (-0.5 * x * x).exp());
            rule.nodes.push(x);
        }
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(k: u32) -> f64 {
        (1..=k).map(|i| (2 * i - 1) as f64).product()
    }

    #[test]
    fn hermite_integrates_normal_moments_exactly() {
        for n in [1usize, 2, 5, 10, 20] {
            let rule = gauss_hermite_normal(n).unwrap();
            for k in 0..n as u32 {
                let exact = double_factorial_odd(k);
                let got = rule.integrate(|x| x.powi(2 * k as i32));
                assert!((got - exact).abs() <= 1e-11 * exact, "n={n} k={k}: {got} vs {exact}");
                let odd = rule.integrate(|x| x.powi(2 * k as i32 + 1));
                assert!(odd.abs() <= 1e-11 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn hermite_nodes_sorted_and_weights_positive() {
        for n in [32usize, 64, 128] {
            let rule = gauss_hermite_normal(n).unwrap();
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn hermite_gaussian_integrand() {
        // E[exp(-a ξ²)] = 1 / sqrt(1 + 2a)
        let rule = gauss_hermite_normal(64).unwrap();
        for a in [0.1, 0.5, 1.0] {
            let got = rule.integrate(|x| (-a * x * x).exp());
            assert!((got - (1.0 + 2.0 * a).powf(-0.5)).abs() < 1e-12);
        }
        // E[cos(a ξ)] = exp(-a²/2)
        let got = rule.integrate(|x| (1.3 * x).cos());
        assert!((got - (-0.5f64 * 1.69).exp()).abs() < 1e-13);
    }

    #[test]
    fn legendre_polynomial_exactness() {
        let rule = gauss_legendre(6, -1.0, 2.0).unwrap();
        for k in 0..12 {
            let exact = (2f64.powi(k + 1) - (-1f64).powi(k + 1)) / (k + 1) as f64;
            let got = rule.integrate(|x| x.powi(k));
            assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn piecewise_normal_handles_indicators() {
        // P(0.3 <= ξ <= 1.7)
        let rule = piecewise_normal(&[0.3, 1.7], 32).unwrap();
        let got = rule.integrate(|x| if (0.3..=1.7).contains(&x) { 1.0 } else { 0.0 });
        let exact = 0.337_523_115_052_504_4;
        assert!((got - exact).abs() < 1e-13, "{got}");
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }
}

//! Closed-form detector performance.
//!
//! Under H1, `C(v)` is modelled as a circular complex Gaussian with mean of
//! magnitude `Lambda` and per-component variance `sigma_H1^2`, so
//! `|C|^2 / sigma_H1^2` is non-central chi-squared with two degrees of freedom
//! and non-centrality `lambda = Lambda^2 / sigma_H1^2`.

use num_complex::Complex64;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::detector::threshold;
use crate::pilot_grid::PilotPattern;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisParams {
    /// Total variance of `C(v)` under H0.
    pub sigma_h0_sq: f64,
    /// Per-real-component variance of `C(v)` under H1.
    pub sigma_h1_sq: f64,
    /// `Lambda`, magnitude of the H1 mean.
    pub lambda_mean: f64,
    /// `lambda = Lambda^2 / sigma_H1^2`.
    pub noncentrality: f64,
}

impl HypothesisParams {
    /// Low-SNR model: the H1 spread equals the H0 spread, so
    /// `sigma_H1^2 = sigma_H0^2 / 2` per component.
    pub fn new(sigma_h0_sq: f64, lambda_mean: f64) -> Result<Self> {
        Self::from_parts(sigma_h0_sq, sigma_h0_sq / 2.0, lambda_mean)
    }

    pub fn from_parts(sigma_h0_sq: f64, sigma_h1_sq: f64, lambda_mean: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma_h0_sq", sigma_h0_sq),
            ("sigma_h1_sq", sigma_h1_sq),
            ("lambda_mean", lambda_mean),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::out_of_range(name, v));
            }
        }
        let noncentrality = if sigma_h1_sq > 0.0 {
            lambda_mean * lambda_mean / sigma_h1_sq
        } else {
            0.0
        };
        Ok(HypothesisParams {
            sigma_h0_sq,
            sigma_h1_sq,
            lambda_mean,
            noncentrality,
        })
    }

    /// Parameters that put `noncentrality` directly on the unit-variance scale:
    /// `sigma_H0^2 = 2`, `sigma_H1^2 = 1`.
    pub fn from_noncentrality(noncentrality: f64) -> Result<Self> {
        if !(noncentrality >= 0.0 && noncentrality.is_finite()) {
            return Err(Error::out_of_range("noncentrality", noncentrality));
        }
        Self::from_parts(2.0, 1.0, noncentrality.sqrt())
    }
}

/// `Lambda = rho^2 / N^2 * (1/A) sum_a sum_{k in P_a} |H[k]|^2`.
pub fn lambda_mean(channel_gains: &[Complex64], pattern: &PilotPattern) -> Result<f64> {
    let n = pattern.num_subcarriers();
    if channel_gains.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: channel_gains.len(),
        });
    }
    let a = pattern.period();
    let total: f64 = (0..a)
        .flat_map(|phase| pattern.pilots_for_symbol(phase))
        .map(|&k| channel_gains[k].norm_sqr())
        .sum();
    let rho = pattern.pilot_amplitude();
    Ok(rho * rho / (n as f64).powi(2) * total / a as f64)
}

/// [`lambda_mean`] for a flat unit channel.
pub fn lambda_mean_flat(pattern: &PilotPattern) -> f64 {
    let ones = vec![Complex64::new(1.0, 0.0); pattern.num_subcarriers()];
    lambda_mean(&ones, pattern).expect("gains sized to the pattern")
}

/// First-order Marcum Q function `Q_1(a, b)`.
///
/// Evaluated as the Poisson mixture
/// `sum_j Pois(j; a^2/2) P(Pois(b^2/2) <= j)`, starting well below the mode
/// of the mixing weights and stopping once they are negligible.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::out_of_range("a", a));
    }
    if b.is_nan() || b < 0.0 {
        return Err(Error::out_of_range("b", b));
    }
    let h = b * b / 2.0;
    if h == 0.0 {
        return Ok(1.0);
    }
    if h.is_infinite() {
        return Ok(0.0);
    }
    let mu = a * a / 2.0;
    if mu == 0.0 {
        return Ok((-h).exp());
    }
    let (ln_mu, ln_h) = (mu.ln(), h.ln());
    let j_lo = (mu - 10.0 * mu.sqrt() - 10.0).floor().max(0.0) as u64;
    let mut cdf = gamma_ur(j_lo as f64 + 1.0, h);
    let (mut sum, mut wsum) = (0.0, 0.0);
    let mut j = j_lo;
    loop {
        let jf = j as f64;
        let weight = (-mu + jf * ln_mu - ln_gamma(jf + 1.0)).exp();
        sum += weight * cdf;
        wsum += weight;
        if jf > mu + 1.0 && weight < 1e-18 {
            break;
        }
        j += 1;
        cdf += (-h + (jf + 1.0) * ln_h - ln_gamma(jf + 2.0)).exp();
        cdf = cdf.min(1.0);
    }
    Ok((sum / wsum).clamp(0.0, 1.0))
}

/// Right tail of the non-central chi-squared law with 2 degrees of freedom.
pub fn ncx2_2_rtail(noncentrality: f64, x: f64) -> Result<f64> {
    if noncentrality.is_nan() || noncentrality < 0.0 {
        return Err(Error::out_of_range("noncentrality", noncentrality));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::out_of_range("x", x));
    }
    marcum_q1(noncentrality.sqrt(), x.sqrt())
}

/// `P_MD = 1 - Q_{chi'^2_2(lambda)}(gamma^2 / sigma_H1^2)`.
pub fn pmd_analytic(gamma: f64, params: &HypothesisParams) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::out_of_range("gamma", gamma));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    if params.sigma_h1_sq <= 0.0 {
        return Err(Error::config(
            "H1 variance is zero with a positive threshold",
        ));
    }
    let tail = ncx2_2_rtail(params.noncentrality, gamma * gamma / params.sigma_h1_sq)?;
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Analytic `(P_FA, P_D)` pairs, one per grid entry, in grid order.
pub fn roc_analytic(params: &HypothesisParams, pfa_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    pfa_grid
        .iter()
        .map(|&p| {
            let gamma = threshold(params.sigma_h0_sq, p)?;
            Ok((p, 1.0 - pmd_analytic(gamma, params)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilot_grid::{wimax_pattern, PilotPattern, Standard};

    fn single_set(n: usize, pilots: usize) -> PilotPattern {
        PilotPattern::new(
            Standard::Wimax,
            n,
            (0..n).collect(),
            vec![(0..pilots).collect()],
            vec![vec![Complex64::new(1.0, 0.0); pilots]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lambda_examples() {
        let p = single_set(1024, 60);
        let flat = vec![Complex64::new(1.0, 0.0); 1024];
        let l = lambda_mean(&flat, &p).unwrap();
        assert!((l - 60.0 / 1024f64.powi(2)).abs() < 1e-18);
        assert!((l - 5.7220e-5).abs() < 1e-9);
        assert_eq!(
            lambda_mean(&vec![Complex64::default(); 1024], &p).unwrap(),
            0.0
        );
        let doubled = p.clone().with_pilot_amplitude(2.0).unwrap();
        assert!((lambda_mean(&flat, &doubled).unwrap() - 4.0 * l).abs() < 1e-18);
        assert!(lambda_mean(&flat[..10], &p).is_err());
    }

    #[test]
    fn lambda_averages_over_phases() {
        let w = wimax_pattern(1024).unwrap();
        let rho2 = w.pilot_amplitude().powi(2);
        assert!((lambda_mean_flat(&w) - rho2 * 60.0 / 1024f64.powi(2)).abs() < 1e-18);
        let mut gains = vec![Complex64::new(1.0, 0.0); 1024];
        for &k in w.pilots_for_symbol(1) {
            gains[k] = Complex64::new(0.0, 0.0);
        }
        let half = lambda_mean(&gains, &w).unwrap();
        assert!((half - lambda_mean_flat(&w) / 2.0).abs() < 1e-18);
    }

    #[test]
    fn central_and_boundary_cases() {
        assert!((ncx2_2_rtail(0.0, 2.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        for l in [0.0, 0.3, 5.0, 400.0] {
            assert_eq!(ncx2_2_rtail(l, 0.0).unwrap(), 1.0);
        }
        for x in [0.1, 1.0, 7.5, 40.0] {
            assert!((ncx2_2_rtail(0.0, x).unwrap() - (-x / 2.0f64).exp()).abs() < 1e-12);
        }
        assert!(ncx2_2_rtail(-1.0, 1.0).is_err());
        assert!(ncx2_2_rtail(1.0, -1.0).is_err());
    }

    #[test]
    fn frozen_quadrature_values() {
        // adaptive quadrature of 0.5 e^{-(y+l)/2} I0(sqrt(l y)) at 30 digits
        let cases = [
            (1.0, 1.0, 0.732_879_803_796_820_2),
            (4.0, 10.0, 0.168_568_913_530_131_4),
            (20.0, 5.0, 0.991_666_919_423_436_1),
            (0.5, 30.0, 2.705_038_660_586_755e-6),
        ];
        for (l, x, q) in cases {
            assert!((ncx2_2_rtail(l, x).unwrap() - q).abs() < 1e-12, "{l} {x}");
        }
    }

    #[test]
    fn large_arguments_stay_finite() {
        let q = ncx2_2_rtail(2000.0, 2000.0).unwrap();
        assert!(q > 0.4 && q < 0.6, "{q}");
        assert!(ncx2_2_rtail(1.0, 2000.0).unwrap() < 1e-300);
        let q = ncx2_2_rtail(3000.0, 1.0).unwrap();
        assert!((q - 1.0).abs() < 1e-15, "{q:e}");
    }

    #[test]
    fn degenerate_hypotheses_give_one_minus_pfa() {
        let params = HypothesisParams::new(3.7e-4, 0.0).unwrap();
        let gamma = threshold(params.sigma_h0_sq, 0.01).unwrap();
        assert!((pmd_analytic(gamma, &params).unwrap() - 0.99).abs() < 1e-12);
        let unit = HypothesisParams::from_noncentrality(0.0).unwrap();
        let gamma = threshold(unit.sigma_h0_sq, 0.01).unwrap();
        assert!((pmd_analytic(gamma, &unit).unwrap() - 0.99).abs() < 1e-12);
    }

    #[test]
    fn pmd_edges() {
        let p = HypothesisParams::new(1.0, 0.5).unwrap();
        assert_eq!(pmd_analytic(0.0, &p).unwrap(), 0.0);
        let zero = HypothesisParams::from_parts(0.0, 0.0, 1.0).unwrap();
        assert!(pmd_analytic(0.1, &zero).is_err());
        assert_eq!(pmd_analytic(0.0, &zero).unwrap(), 0.0);
    }

    #[test]
    fn roc_endpoints_and_chance_line() {
        let grid = [0.001, 0.01, 0.1, 0.5, 1.0];
        let chance = roc_analytic(&HypothesisParams::new(1e-4, 0.0).unwrap(), &grid).unwrap();
        for (p, d) in chance {
            assert!((p - d).abs() < 1e-12);
        }
        let roc = roc_analytic(&HypothesisParams::new(1e-4, 1.5e-2).unwrap(), &grid).unwrap();
        assert_eq!(roc.last().unwrap().1, 1.0);
        assert!(roc.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(roc_analytic(&HypothesisParams::new(1e-4, 0.0).unwrap(), &[0.0]).is_err());
    }
}

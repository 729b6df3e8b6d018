//! Time-domain symbol cross-correlation detector.
//!
//! `R(l, m) = (1/N) sum_n x_l[n] conj(x_m[n])` over the N post-CP samples of
//! two symbols. `C(v)` averages `R(l, l - v)` over `S_v` consecutive pairs,
//! and `|C(v)|` is compared with `gamma = sqrt(-sigma_H0^2 ln P_FA)`.

use std::fmt;

use num_complex::Complex64;

use crate::pilot_grid::PilotPattern;
use crate::waveform::Baseband;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Signal present.
    H1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdscConfig {
    /// Symbol-index difference of each correlated pair.
    pub v: usize,
    /// Number of correlations averaged, `S_v`.
    pub s_v: usize,
    pub num_subcarriers: usize,
    /// M, samples per CP-extended symbol.
    pub symbol_len: usize,
    /// Samples skipped at the head of each symbol before correlating.
    pub cp_skip: usize,
}

impl TdscConfig {
    /// Discards the whole CP: `cp_skip = M - N`.
    pub fn new(v: usize, s_v: usize, num_subcarriers: usize, symbol_len: usize) -> Result<Self> {
        let cfg = TdscConfig {
            v,
            s_v,
            num_subcarriers,
            symbol_len,
            cp_skip: symbol_len.saturating_sub(num_subcarriers),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v == 0 {
            return Err(Error::config("symbol offset v must be at least 1"));
        }
        if self.s_v == 0 {
            return Err(Error::config("S_v must be at least 1"));
        }
        if self.num_subcarriers == 0 {
            return Err(Error::config("FFT size must be positive"));
        }
        if self.cp_skip + self.num_subcarriers > self.symbol_len {
            return Err(Error::config("correlation window runs past the symbol end"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    /// `T_NP = |C(v)|`.
    pub statistic: f64,
    pub c_value: Complex64,
    pub threshold: f64,
    pub decision: Hypothesis,
    /// Variance of `C(v)` under H0, when the caller knew it.
    pub sigma_h0_sq: Option<f64>,
}

pub fn tdsc_corr(x_l: &[Complex64], x_m: &[Complex64]) -> Result<Complex64> {
    if x_l.len() != x_m.len() {
        return Err(Error::LengthMismatch {
            expected: x_l.len(),
            actual: x_m.len(),
        });
    }
    if x_l.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(corr(x_l, x_m))
}

fn corr(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.im * y.re - x.re * y.im;
    }
    Complex64::new(re, im) / a.len() as f64
}

/// Symbol-index pairs `(l, l - v)` whose starts are exactly `v * M` apart, so
/// the two symbols sit in the same contiguous burst and share pilots.
fn valid_pairs<'a>(
    stream: &'a Baseband,
    cfg: &'a TdscConfig,
) -> impl Iterator<Item = (usize, usize)> + 'a {
    let starts = &stream.symbol_starts;
    let span = cfg.v * cfg.symbol_len;
    let window_end = cfg.cp_skip + cfg.num_subcarriers;
    (cfg.v..starts.len())
        .filter(move |&l| {
            starts[l] - starts[l - cfg.v] == span && starts[l] + window_end <= stream.len()
        })
        .map(move |l| (starts[l] + cfg.cp_skip, starts[l - cfg.v] + cfg.cp_skip))
}

/// Number of usable `(l, l - v)` pairs in `stream`.
pub fn available_pairs(stream: &Baseband, cfg: &TdscConfig) -> usize {
    valid_pairs(stream, cfg).count()
}

/// `C(v)`: mean of `R(l, l - v)` over the first `S_v` usable pairs.
pub fn accumulate(stream: &Baseband, cfg: &TdscConfig, pattern_period: usize) -> Result<Complex64> {
    cfg.validate()?;
    if stream.is_empty() || stream.symbol_starts.is_empty() {
        return Err(Error::EmptyStream);
    }
    if pattern_period == 0 || !cfg.v.is_multiple_of(pattern_period) {
        return Err(Error::config(format!(
            "offset v = {} is not a multiple of the pilot period {pattern_period}",
            cfg.v
        )));
    }
    let n = cfg.num_subcarriers;
    let mut sum = Complex64::default();
    let mut used = 0;
    for (a, b) in valid_pairs(stream, cfg).take(cfg.s_v) {
        sum += corr(&stream.samples[a..a + n], &stream.samples[b..b + n]);
        used += 1;
    }
    if used < cfg.s_v {
        return Err(Error::InsufficientSymbols {
            needed: cfg.s_v,
            available: used,
        });
    }
    Ok(sum / cfg.s_v as f64)
}

/// `sigma_H0^2 = sigma^4 / (N S_v)`: the total variance of `C(v)` for noise
/// power `sigma^2`.
pub fn sigma_h0_sq(noise_power: f64, cfg: &TdscConfig) -> Result<f64> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::out_of_range("noise_power", noise_power));
    }
    Ok(noise_power * noise_power / (cfg.num_subcarriers * cfg.s_v) as f64)
}

/// `gamma = sqrt(-sigma_H0^2 ln p_fa)`.
pub fn threshold(sigma_h0_sq: f64, p_fa: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa <= 1.0) {
        return Err(Error::out_of_range("p_fa", p_fa));
    }
    if !(sigma_h0_sq >= 0.0 && sigma_h0_sq.is_finite()) {
        return Err(Error::out_of_range("sigma_h0_sq", sigma_h0_sq));
    }
    Ok((-sigma_h0_sq * p_fa.ln()).max(0.0).sqrt())
}

/// H1 when `|c| >= gamma`.
pub fn decide(c_value: Complex64, gamma: f64) -> DetectionResult {
    let statistic = c_value.norm();
    DetectionResult {
        statistic,
        c_value,
        threshold: gamma,
        decision: if statistic >= gamma {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        },
        sigma_h0_sq: None,
    }
}

/// Full detection with a known per-sample noise power.
pub fn sense(
    stream: &Baseband,
    cfg: &TdscConfig,
    pattern: &PilotPattern,
    noise_power: f64,
    p_fa: f64,
) -> Result<DetectionResult> {
    let c = accumulate(stream, cfg, pattern.period())?;
    let var = sigma_h0_sq(noise_power, cfg)?;
    let gamma = threshold(var, p_fa)?;
    Ok(DetectionResult {
        sigma_h0_sq: Some(var),
        ..decide(c, gamma)
    })
}

/// Noise power estimate from a capture known to hold no signal.
pub fn estimate_noise_power(silent: &[Complex64]) -> Result<f64> {
    if silent.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok(silent.iter().map(|x| x.norm_sqr()).sum::<f64>() / silent.len() as f64)
}

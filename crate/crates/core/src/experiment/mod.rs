//! Monte-Carlo harness: P_MD sweeps over SNR and ROC families, each with the
//! analytic curve alongside when the channel is static.
//!
//! Every trial senses one contiguous downlink burst that fills the sensing
//! window. Trial seeds are derived from `(seed, hypothesis, snr index, trial)`
//! so results do not depend on how trials are scheduled.

mod config;
mod exec;
mod output;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

use crate::channel::{fill_noise, named_profile, random_phase, Channel, ImpairmentConfig};
use crate::detector::{self, DetectionResult, Hypothesis, TdscConfig};
use crate::pilot_grid::{pattern_for, PilotPattern};
use crate::theory::{lambda_mean_flat, pmd_analytic, HypothesisParams};
use crate::waveform::{Baseband, OfdmConfig, OfdmModulator};
use crate::{Error, Result};

pub use config::{
    parse_snr_list, ExperimentConfig, SweepPlan, CONFIG_KEYS, DEFAULT_PFA_GRID, DEFAULT_TRIALS,
};
pub use exec::{Execution, Executor};
pub use output::{csv_string, emit_csv, CsvRow, CsvSink, RunLabels, ROC_COLUMNS, SWEEP_COLUMNS};

/// z-value of a two-sided 95% interval.
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub pmd_empirical: f64,
    /// Only for static channels.
    pub pmd_theory: Option<f64>,
    pub pfa_empirical: f64,
    pub trials: usize,
    /// 95% half-width of `pmd_empirical`.
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub snr_db: f64,
    pub p_fa_target: f64,
    pub p_fa_empirical: f64,
    pub p_d_empirical: f64,
    pub p_d_theory: Option<f64>,
}

/// Wald 95% half-width for a proportion `p` from `n` trials.
pub fn binomial_halfwidth(p: f64, n: usize) -> f64 {
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Whole symbols that fit the sensing window.
pub fn symbols_in_window(cfg: &ExperimentConfig) -> Result<usize> {
    let m = cfg.cp_ratio.cp_len(cfg.fft_size) + cfg.fft_size;
    let count = (cfg.sensing_time * cfg.sample_rate / m as f64 + 1e-9).floor() as usize;
    let period = cfg.standard.default_offset();
    let v = cfg.offset();
    if count < v + period {
        return Err(Error::InsufficientSymbols {
            needed: v + period,
            available: count,
        });
    }
    Ok(count)
}

/// `S_v`: the largest multiple of the pilot period not above `count - v`.
pub fn accumulation_length(cfg: &ExperimentConfig) -> Result<usize> {
    let count = symbols_in_window(cfg)?;
    let period = cfg.standard.default_offset();
    Ok((count - cfg.offset()) / period * period)
}

fn mix(a: u64, b: u64) -> u64 {
    SplitMix64::seed_from_u64(a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15)).next_u64()
}

/// Seed of trial `t` at SNR index `snr_index`.
pub fn trial_seed(master: u64, hypothesis: Hypothesis, snr_index: usize, t: usize) -> u64 {
    let tag = match hypothesis {
        Hypothesis::H0 => 0x4830,
        Hypothesis::H1 => 0x4831,
    };
    mix(mix(mix(master, tag), snr_index as u64 + 1), t as u64 + 1)
}

/// Everything derived from an [`ExperimentConfig`] that trials share.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ExperimentConfig,
    pattern: PilotPattern,
    tdsc: TdscConfig,
    modulator: OfdmModulator,
    channel: Channel,
    symbols: usize,
    reference_power: f64,
}

impl Scenario {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut pattern = pattern_for(cfg.standard, cfg.fft_size)?;
        if let Some(rho) = cfg.pilot_amplitude {
            pattern = pattern.with_pilot_amplitude(rho)?;
        }
        let ofdm = OfdmConfig::new(
            cfg.fft_size,
            cfg.cp_ratio.cp_len(cfg.fft_size),
            cfg.sample_rate,
            cfg.rolloff,
        )?;
        let symbols = symbols_in_window(cfg)?;
        let v = cfg.offset();
        if !v.is_multiple_of(pattern.period()) {
            return Err(Error::config(format!(
                "v = {v} is not a multiple of the pilot period {}",
                pattern.period()
            )));
        }
        let tdsc = TdscConfig::new(
            v,
            accumulation_length(cfg)?,
            ofdm.num_subcarriers,
            ofdm.symbol_len(),
        )?;
        // passband edge sits N/32 bins beyond the outermost used subcarrier
        let edge_bins = pattern.used_subcarriers().len() as f64 / 2.0 + cfg.fft_size as f64 / 32.0;
        let passband = edge_bins * ofdm.subcarrier_spacing();
        let channel = Channel::new(
            named_profile(&cfg.channel, cfg.rician_k_db)?,
            cfg.sample_rate,
            Some(passband),
        )?;
        let reference_power = pattern.mean_symbol_power();
        Ok(Scenario {
            cfg: cfg.clone(),
            pattern,
            tdsc,
            modulator: OfdmModulator::new(ofdm)?,
            channel,
            symbols,
            reference_power,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn pattern(&self) -> &PilotPattern {
        &self.pattern
    }

    pub fn tdsc(&self) -> &TdscConfig {
        &self.tdsc
    }

    pub fn ofdm(&self) -> &OfdmConfig {
        self.modulator.config()
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Nominal per-sample power of the transmitted burst.
    pub fn reference_power(&self) -> f64 {
        self.reference_power
    }

    /// Per-sample noise power used at `snr_db`.
    pub fn noise_power(&self, snr_db: f64) -> Result<f64> {
        crate::channel::NoiseCalibration {
            reference_power: self.reference_power,
            snr_db,
            bandwidth_fraction: self.channel.noise_bandwidth_fraction(),
        }
        .noise_power()
    }

    pub fn sigma_h0_sq(&self, snr_db: f64) -> Result<f64> {
        detector::sigma_h0_sq(self.noise_power(snr_db)?, &self.tdsc)
    }

    pub fn threshold(&self, snr_db: f64, p_fa: f64) -> Result<f64> {
        detector::threshold(self.sigma_h0_sq(snr_db)?, p_fa)
    }

    /// Analytic model, only for channels with a fixed unit gain.
    pub fn theory(&self, snr_db: f64) -> Result<Option<HypothesisParams>> {
        if !self.channel.profile().is_identity() {
            return Ok(None);
        }
        HypothesisParams::new(self.sigma_h0_sq(snr_db)?, lambda_mean_flat(&self.pattern)).map(Some)
    }

    /// The noiseless transmitted burst for `payload_seed`.
    pub fn transmit(&self, payload_seed: u64) -> Result<Baseband> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(payload_seed);
        self.modulator.burst(&self.pattern, self.symbols, &mut rng)
    }

    /// The received stream of one trial and the noise power it carries.
    pub fn received(
        &self,
        hypothesis: Hypothesis,
        snr_db: f64,
        seed: u64,
    ) -> Result<(Baseband, f64)> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let payload_seed = rng.next_u64();
        let phase = random_phase(&mut rng);
        let chain_seed = rng.next_u64();
        match hypothesis {
            Hypothesis::H0 => {
                let sigma2 = self.noise_power(snr_db)?;
                let m = self.ofdm().symbol_len();
                let mut samples = vec![Complex64::default(); self.symbols * m];
                fill_noise(
                    &mut samples,
                    sigma2,
                    &mut Xoshiro256PlusPlus::seed_from_u64(chain_seed),
                );
                let starts = (0..self.symbols).map(|l| l * m).collect();
                Ok((
                    Baseband::new(samples, self.cfg.sample_rate, starts, m)?,
                    sigma2,
                ))
            }
            Hypothesis::H1 => {
                let burst = self.transmit(payload_seed)?;
                let impairment = ImpairmentConfig {
                    cfo_normalized: self.cfg.cfo_normalized,
                    phase,
                    snr_db,
                };
                self.channel.apply(
                    burst,
                    &impairment,
                    self.cfg.fft_size,
                    self.reference_power,
                    chain_seed,
                )
            }
        }
    }

    pub fn run_trial(
        &self,
        hypothesis: Hypothesis,
        snr_db: f64,
        seed: u64,
    ) -> Result<DetectionResult> {
        let (stream, sigma2) = self.received(hypothesis, snr_db, seed)?;
        detector::sense(&stream, &self.tdsc, &self.pattern, sigma2, self.cfg.p_fa)
    }

    /// Test statistics of `trials` independent trials at SNR index `snr_index`.
    pub fn pool(
        &self,
        exec: &Executor,
        hypothesis: Hypothesis,
        snr_index: usize,
    ) -> Result<Vec<f64>> {
        let snr = *self
            .cfg
            .snr_db_list
            .get(snr_index)
            .ok_or_else(|| Error::config("SNR index out of range"))?;
        exec.map(self.cfg.trials, |t| {
            let seed = trial_seed(self.cfg.seed, hypothesis, snr_index, t);
            let (stream, _) = self.received(hypothesis, snr, seed)?;
            Ok(detector::accumulate(&stream, &self.tdsc, self.pattern.period())?.norm())
        })
    }
}

fn rate_at_or_above(stats: &[f64], gamma: f64) -> f64 {
    stats.iter().filter(|&&s| s >= gamma).count() as f64 / stats.len() as f64
}

/// One trial of `cfg` at `snr_db`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    hypothesis: Hypothesis,
    snr_db: f64,
    seed: u64,
) -> Result<DetectionResult> {
    Scenario::new(cfg)?.run_trial(hypothesis, snr_db, seed)
}

fn executor_for(cfg: &ExperimentConfig) -> Result<Executor> {
    Executor::new(Execution::from_workers(cfg.workers))
}

pub fn sweep_snr(cfg: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    sweep_snr_with(cfg, &executor_for(cfg)?, |p| {
        out.push(*p);
        Ok(())
    })?;
    Ok(out)
}

/// Runs the sweep, handing each point to `on_point` as soon as it is ready.
pub fn sweep_snr_with(
    cfg: &ExperimentConfig,
    exec: &Executor,
    mut on_point: impl FnMut(&CurvePoint) -> Result<()>,
) -> Result<()> {
    let scenario = Scenario::new(cfg)?;
    for (i, &snr) in cfg.snr_db_list.iter().enumerate() {
        let h1 = scenario.pool(exec, Hypothesis::H1, i)?;
        let h0 = scenario.pool(exec, Hypothesis::H0, i)?;
        let gamma = scenario.threshold(snr, cfg.p_fa)?;
        let pmd = 1.0 - rate_at_or_above(&h1, gamma);
        let pmd_theory = scenario
            .theory(snr)?
            .map(|params| pmd_analytic(gamma, &params))
            .transpose()?;
        on_point(&CurvePoint {
            snr_db: snr,
            pmd_empirical: pmd,
            pmd_theory,
            pfa_empirical: rate_at_or_above(&h0, gamma),
            trials: cfg.trials,
            ci_halfwidth: binomial_halfwidth(pmd, cfg.trials),
        })?;
    }
    Ok(())
}

pub fn sweep_roc(cfg: &ExperimentConfig, pfa_grid: &[f64]) -> Result<Vec<RocPoint>> {
    let mut out = Vec::new();
    sweep_roc_with(cfg, pfa_grid, &executor_for(cfg)?, |p| {
        out.push(*p);
        Ok(())
    })?;
    Ok(out)
}

/// ROC by threshold sweep: one H0 and one H1 pool per SNR, every grid point
/// evaluated against the same pools.
pub fn sweep_roc_with(
    cfg: &ExperimentConfig,
    pfa_grid: &[f64],
    exec: &Executor,
    mut on_point: impl FnMut(&RocPoint) -> Result<()>,
) -> Result<()> {
    if pfa_grid.is_empty() {
        return Err(Error::config("pfa_grid is empty"));
    }
    if let Some(bad) = pfa_grid.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::out_of_range("p_fa", *bad));
    }
    let scenario = Scenario::new(cfg)?;
    for (i, &snr) in cfg.snr_db_list.iter().enumerate() {
        let h1 = scenario.pool(exec, Hypothesis::H1, i)?;
        let h0 = scenario.pool(exec, Hypothesis::H0, i)?;
        let theory = scenario.theory(snr)?;
        for &p in pfa_grid {
            let gamma = scenario.threshold(snr, p)?;
            let p_d_theory = theory
                .map(|params| pmd_analytic(gamma, &params).map(|pmd| 1.0 - pmd))
                .transpose()?;
            on_point(&RocPoint {
                snr_db: snr,
                p_fa_target: p,
                p_fa_empirical: rate_at_or_above(&h0, gamma),
                p_d_empirical: rate_at_or_above(&h1, gamma),
                p_d_theory,
            })?;
        }
    }
    Ok(())
}

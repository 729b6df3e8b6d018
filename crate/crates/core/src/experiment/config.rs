//! Experiment configuration and the `key = value` file format.
//!
//! `standard`, `cp_ratio` and `channel` accept comma-separated lists; a
//! [`SweepPlan`] expands them into one [`ExperimentConfig`] per combination.
//! `snr_db_list` takes either a comma list or an inclusive `start:step:end`
//! range.

use std::fs;
use std::path::{Path, PathBuf};

use crate::channel::{named_profile, DEFAULT_RICIAN_K_DB};
use crate::pilot_grid::{wimax_used_subcarriers, Standard};
use crate::waveform::{CpRatio, DEFAULT_FFT_SIZE, DEFAULT_ROLLOFF, DEFAULT_SAMPLE_RATE};
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_PFA: f64 = 0.01;
pub const DEFAULT_SENSING_TIME: f64 = 0.050;
pub const DEFAULT_CFO: f64 = 0.5;
pub const DEFAULT_PFA_GRID: [f64; 12] = [
    0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0,
];

/// Every key accepted in a config file, with its default as shown in `--help`.
pub const CONFIG_KEYS: [(&str, &str); 18] = [
    ("standard", "wimax"),
    ("fft_size", "1024"),
    ("cp_ratio", "1/4"),
    ("sample_rate", "8400000"),
    ("snr_db_list", "-23:1:-14"),
    ("p_fa", "0.01"),
    ("sensing_time", "0.05"),
    ("channel", "awgn"),
    ("cfo_normalized", "0.5"),
    ("trials", "1000"),
    ("seed", "1"),
    ("output_path", "(stdout)"),
    ("v", "2 for wimax, 7 for lte"),
    ("rolloff", "0.1"),
    ("rician_k_db", "6"),
    ("pilot_amplitude", "2.5 dB boost for wimax, 1 for lte"),
    ("workers", "all cores"),
    (
        "pfa_grid",
        "0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.3,0.5,0.7,1",
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub standard: Standard,
    pub fft_size: usize,
    pub cp_ratio: CpRatio,
    pub sample_rate: f64,
    pub snr_db_list: Vec<f64>,
    pub p_fa: f64,
    /// Seconds.
    pub sensing_time: f64,
    pub channel: String,
    pub cfo_normalized: f64,
    pub trials: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Symbol offset; the standard's pilot period when unset.
    pub v: Option<usize>,
    pub rolloff: f64,
    pub rician_k_db: f64,
    /// Overrides the standard's pilot amplitude.
    pub pilot_amplitude: Option<f64>,
    pub workers: Option<usize>,
    pub pfa_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            standard: Standard::Wimax,
            fft_size: DEFAULT_FFT_SIZE,
            cp_ratio: CpRatio::Quarter,
            sample_rate: DEFAULT_SAMPLE_RATE,
            snr_db_list: (-23..=-14).map(f64::from).collect(),
            p_fa: DEFAULT_PFA,
            sensing_time: DEFAULT_SENSING_TIME,
            channel: "awgn".to_string(),
            cfo_normalized: DEFAULT_CFO,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            output_path: None,
            v: None,
            rolloff: DEFAULT_ROLLOFF,
            rician_k_db: DEFAULT_RICIAN_K_DB,
            pilot_amplitude: None,
            workers: None,
            pfa_grid: DEFAULT_PFA_GRID.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn offset(&self) -> usize {
        self.v.unwrap_or_else(|| self.standard.default_offset())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !(self.sensing_time > 0.0 && self.sensing_time.is_finite()) {
            return Err(Error::out_of_range("sensing_time", self.sensing_time));
        }
        if self.snr_db_list.is_empty() {
            return Err(Error::config("snr_db_list is empty"));
        }
        if self
            .snr_db_list
            .iter()
            .any(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return Err(Error::config("snr_db_list holds an invalid value"));
        }
        if !(self.p_fa > 0.0 && self.p_fa <= 1.0) {
            return Err(Error::out_of_range("p_fa", self.p_fa));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::out_of_range("sample_rate", self.sample_rate));
        }
        if !self.cfo_normalized.is_finite() {
            return Err(Error::out_of_range("cfo_normalized", self.cfo_normalized));
        }
        if self.pfa_grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::config("pfa_grid values must lie in (0, 1]"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be at least 1"));
        }
        wimax_used_subcarriers(self.fft_size)?;
        named_profile(&self.channel, self.rician_k_db)?;
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "standard" => self.standard = value.parse()?,
            "fft_size" => self.fft_size = parse_num(key, value)?,
            "cp_ratio" => self.cp_ratio = value.parse()?,
            "sample_rate" => self.sample_rate = parse_num(key, value)?,
            "snr_db_list" => self.snr_db_list = parse_snr_list(value)?,
            "p_fa" => self.p_fa = parse_num(key, value)?,
            "sensing_time" => self.sensing_time = parse_num(key, value)?,
            "channel" => {
                named_profile(value, self.rician_k_db)?;
                self.channel = value.to_string();
            }
            "cfo_normalized" => self.cfo_normalized = parse_num(key, value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            "v" => self.v = Some(parse_num(key, value)?),
            "rolloff" => self.rolloff = parse_num(key, value)?,
            "rician_k_db" => self.rician_k_db = parse_num(key, value)?,
            "pilot_amplitude" => self.pilot_amplitude = Some(parse_num(key, value)?),
            "workers" => self.workers = Some(parse_num(key, value)?),
            "pfa_grid" => self.pfa_grid = parse_list(key, value)?,
            other => return Err(Error::config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: cannot parse '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// Comma list, or `start:step:end` with both ends included.
pub fn parse_snr_list(value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        [single] => parse_list("snr_db_list", single),
        [start, step, end] => {
            let start: f64 = parse_num("snr_db_list", start)?;
            let step: f64 = parse_num("snr_db_list", step)?;
            let end: f64 = parse_num("snr_db_list", end)?;
            let span = (end - start) / step;
            if !(step != 0.0 && span.is_finite() && span >= -1e-9) {
                return Err(Error::Parse(format!("bad SNR range '{value}'")));
            }
            let count = (span + 1e-9).floor() as usize + 1;
            Ok((0..count)
                .map(|i| {
                    let v = start + i as f64 * step;
                    (v * 1e9).round() / 1e9
                })
                .collect())
        }
        _ => Err(Error::Parse(format!("bad SNR list '{value}'"))),
    }
}

/// A base configuration plus the list-valued axes to sweep over.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: ExperimentConfig,
    pub standards: Vec<Standard>,
    pub cp_ratios: Vec<CpRatio>,
    pub channels: Vec<String>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self::from_config(ExperimentConfig::default())
    }
}

impl SweepPlan {
    pub fn from_config(base: ExperimentConfig) -> Self {
        SweepPlan {
            standards: vec![base.standard],
            cp_ratios: vec![base.cp_ratio],
            channels: vec![base.channel.clone()],
            base,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let items = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
        match key.trim() {
            "standard" => {
                self.standards = items().map(str::parse).collect::<Result<_>>()?;
                self.base.standard = *self
                    .standards
                    .first()
                    .ok_or_else(|| Error::config("empty standard list"))?;
            }
            "cp_ratio" => {
                self.cp_ratios = items().map(str::parse).collect::<Result<_>>()?;
                self.base.cp_ratio = *self
                    .cp_ratios
                    .first()
                    .ok_or_else(|| Error::config("empty cp_ratio list"))?;
            }
            "channel" => {
                let names: Vec<String> = items().map(String::from).collect();
                for n in &names {
                    named_profile(n, self.base.rician_k_db)?;
                }
                self.base.channel = names
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::config("empty channel list"))?;
                self.channels = names;
            }
            _ => self.base.set(key, value)?,
        }
        Ok(())
    }

    /// Applies every setting of a config file's text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(k, v)
                .map_err(|e| Error::config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// One configuration per (standard, cp_ratio, channel), in that nesting order.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let mut out = Vec::new();
        for &standard in &self.standards {
            for &cp_ratio in &self.cp_ratios {
                for channel in &self.channels {
                    let cfg = ExperimentConfig {
                        standard,
                        cp_ratio,
                        channel: channel.clone(),
                        ..self.base.clone()
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

//! Baseband OFDM synthesis: 16-QAM payload, pilot insertion, IFFT, cyclic
//! prefix with raised-cosine edge windowing, and TDD frame assembly.

mod iq;
mod qam;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rustfft::{Fft, FftPlanner};

use crate::pilot_grid::PilotPattern;
use crate::{Error, Result};

pub use iq::{read_iq, read_starts, write_iq, write_starts, IqMetadata};
pub use qam::{fill_random_qam16, map_qam16, qam16_point};

pub const DEFAULT_SAMPLE_RATE: f64 = 8.4e6;
pub const DEFAULT_FFT_SIZE: usize = 1024;
/// Largest edge roll-off used by the reference setup.
pub const DEFAULT_ROLLOFF: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Qam16,
}

/// Cyclic-prefix length as a fraction of the FFT size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CpRatio {
    Quarter,
    Eighth,
}

impl CpRatio {
    pub fn cp_len(self, fft_size: usize) -> usize {
        match self {
            CpRatio::Quarter => fft_size / 4,
            CpRatio::Eighth => fft_size / 8,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            CpRatio::Quarter => 0.25,
            CpRatio::Eighth => 0.125,
        }
    }
}

impl fmt::Display for CpRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CpRatio::Quarter => "1/4",
            CpRatio::Eighth => "1/8",
        })
    }
}

impl FromStr for CpRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/4" | "0.25" | "4" => Ok(CpRatio::Quarter),
            "1/8" | "0.125" | "8" => Ok(CpRatio::Eighth),
            other => Err(Error::Parse(format!(
                "unknown CP ratio '{other}', expected 1/4 or 1/8"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub num_subcarriers: usize,
    pub cp_len: usize,
    pub sample_rate: f64,
    pub rolloff: f64,
    pub modulation: Modulation,
}

impl OfdmConfig {
    pub fn new(
        num_subcarriers: usize,
        cp_len: usize,
        sample_rate: f64,
        rolloff: f64,
    ) -> Result<Self> {
        let cfg = OfdmConfig {
            num_subcarriers,
            cp_len,
            sample_rate,
            rolloff,
            modulation: Modulation::Qam16,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference numerology: 8.4 MHz sampling, roll-off 0.1.
    pub fn standard(fft_size: usize, cp: CpRatio) -> Result<Self> {
        Self::new(
            fft_size,
            cp.cp_len(fft_size),
            DEFAULT_SAMPLE_RATE,
            DEFAULT_ROLLOFF,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(Error::config("FFT size must be positive"));
        }
        if self.cp_len > self.num_subcarriers {
            return Err(Error::config("cyclic prefix longer than the symbol"));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::out_of_range("sample_rate", self.sample_rate));
        }
        let max = self.cp_len as f64 / self.num_subcarriers as f64;
        if !(self.rolloff >= 0.0 && self.rolloff <= max + 1e-12) {
            return Err(Error::out_of_range("rolloff", self.rolloff));
        }
        Ok(())
    }

    /// M = N + L.
    pub fn symbol_len(&self) -> usize {
        self.num_subcarriers + self.cp_len
    }

    /// Edge-taper length `floor(rolloff * N)`.
    pub fn window_len(&self) -> usize {
        ((self.rolloff * self.num_subcarriers as f64) + 1e-9).floor() as usize
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.sample_rate / self.num_subcarriers as f64
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate
    }
}

/// TDD frame layout: DL subframe, TTG, UL subframe, RTG.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub dl_symbols: usize,
    pub ul_symbols: usize,
    /// Receive/transmit transition gap, seconds.
    pub rtg: f64,
    /// Transmit/receive transition gap, seconds.
    pub ttg: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            dl_symbols: 12,
            ul_symbols: 35,
            rtg: 60e-6,
            ttg: 107.225e-6,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dl_symbols == 0 || self.ul_symbols == 0 {
            return Err(Error::config(
                "frames need at least one DL and one UL symbol",
            ));
        }
        for (name, v) in [("rtg", self.rtg), ("ttg", self.ttg)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::out_of_range(name, v));
            }
        }
        Ok(())
    }

    pub fn ttg_samples(&self, sample_rate: f64) -> usize {
        (self.ttg * sample_rate).round() as usize
    }

    pub fn rtg_samples(&self, sample_rate: f64) -> usize {
        (self.rtg * sample_rate).round() as usize
    }

    pub fn symbols_per_frame(&self) -> usize {
        self.dl_symbols + self.ul_symbols
    }

    pub fn frame_len(&self, cfg: &OfdmConfig) -> usize {
        self.symbols_per_frame() * cfg.symbol_len()
            + self.ttg_samples(cfg.sample_rate)
            + self.rtg_samples(cfg.sample_rate)
    }

    /// Whether the `i`-th symbol of a frame sequence belongs to a DL subframe.
    pub fn is_downlink(&self, i: usize) -> bool {
        i % self.symbols_per_frame() < self.dl_symbols
    }
}

/// A sampled complex baseband stream with known OFDM symbol boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseband {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub symbol_starts: Vec<usize>,
    /// M, the length of one CP-extended symbol.
    pub symbol_len: usize,
}

impl Baseband {
    pub fn new(
        samples: Vec<Complex64>,
        sample_rate: f64,
        symbol_starts: Vec<usize>,
        symbol_len: usize,
    ) -> Result<Self> {
        if symbol_starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("symbol starts must be strictly increasing"));
        }
        if let Some(&last) = symbol_starts.last() {
            if last + symbol_len > samples.len() {
                return Err(Error::LengthMismatch {
                    expected: last + symbol_len,
                    actual: samples.len(),
                });
            }
        }
        Ok(Baseband {
            samples,
            sample_rate,
            symbol_starts,
            symbol_len,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Merged sample ranges covered by symbols.
    pub fn occupied_ranges(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for &s in &self.symbol_starts {
            let end = (s + self.symbol_len).min(self.samples.len());
            match out.last_mut() {
                Some(r) if s <= r.end => r.end = r.end.max(end),
                _ => out.push(s..end),
            }
        }
        out
    }

    /// Mean `|x[n]|^2` over the occupied symbol extents.
    pub fn occupied_power(&self) -> f64 {
        let (sum, count) =
            self.occupied_ranges()
                .into_iter()
                .fold((0.0, 0usize), |(sum, count), r| {
                    let len = r.len();
                    (
                        sum + self.samples[r].iter().map(|x| x.norm_sqr()).sum::<f64>(),
                        count + len,
                    )
                });
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

/// Assembles `X_l`: `rho * pilot` on the pilot bins of symbol `l`, `data` on
/// the remaining used bins in ascending order, zero elsewhere.
pub fn build_freq_symbol(
    cfg: &OfdmConfig,
    pattern: &PilotPattern,
    l: usize,
    data: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_grid(cfg, pattern)?;
    let bins = pattern.data_subcarriers(l);
    if data.len() != bins.len() {
        return Err(Error::LengthMismatch {
            expected: bins.len(),
            actual: data.len(),
        });
    }
    let mut x = vec![Complex64::default(); cfg.num_subcarriers];
    for (&k, &d) in bins.iter().zip(data) {
        x[k] = d;
    }
    insert_pilots(pattern, l, &mut x);
    Ok(x)
}

fn insert_pilots(pattern: &PilotPattern, l: usize, x: &mut [Complex64]) {
    let rho = pattern.pilot_amplitude();
    for (&k, &p) in pattern
        .pilots_for_symbol(l)
        .iter()
        .zip(pattern.pilot_values_for_symbol(l))
    {
        x[k] = p * rho;
    }
}

fn check_grid(cfg: &OfdmConfig, pattern: &PilotPattern) -> Result<()> {
    if pattern.num_subcarriers() != cfg.num_subcarriers {
        return Err(Error::LengthMismatch {
            expected: cfg.num_subcarriers,
            actual: pattern.num_subcarriers(),
        });
    }
    Ok(())
}

/// `x[n] = (1/N) sum_k X[k] e^{j 2 pi k n / N}`.
pub fn ofdm_modulate(cfg: &OfdmConfig, x: &[Complex64]) -> Result<Vec<Complex64>> {
    OfdmModulator::new(cfg.clone())?.modulate(x)
}

/// CP-extends one N-sample symbol and applies the raised-cosine edge taper.
///
/// The result has `M + W` samples, `W = floor(rolloff * N)`: the CP, the
/// untouched core, and a W-sample cyclic postfix that ramps down and is meant to
/// be overlap-added onto the first W samples of the following symbol, which
/// ramp up. With zero roll-off this is the plain CP extension.
pub fn add_cp_and_window(cfg: &OfdmConfig, symbol: &[Complex64]) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if symbol.len() != cfg.num_subcarriers {
        return Err(Error::LengthMismatch {
            expected: cfg.num_subcarriers,
            actual: symbol.len(),
        });
    }
    let ramp = ramp_up(cfg.window_len());
    let mut out = vec![Complex64::default(); cfg.symbol_len() + ramp.len()];
    extend_symbol(cfg, &ramp, symbol, &mut out);
    Ok(out)
}

/// Rising half of the edge window; the falling half is `1 - ramp[i]`.
pub fn ramp_up(w: usize) -> Vec<f64> {
    (0..w)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * (i as f64 + 0.5) / w as f64).cos()))
        .collect()
}

fn extend_symbol(cfg: &OfdmConfig, ramp: &[f64], symbol: &[Complex64], out: &mut [Complex64]) {
    let (n, l, m) = (cfg.num_subcarriers, cfg.cp_len, cfg.symbol_len());
    out[..l].copy_from_slice(&symbol[n - l..]);
    out[l..m].copy_from_slice(symbol);
    let w = ramp.len();
    out[m..m + w].copy_from_slice(&symbol[..w]);
    for (i, &r) in ramp.iter().enumerate() {
        out[i] *= r;
        out[m + i] *= 1.0 - r;
    }
}

/// Reusable IFFT plan plus window for one numerology.
#[derive(Clone)]
pub struct OfdmModulator {
    cfg: OfdmConfig,
    ifft: Arc<dyn Fft<f64>>,
    ramp: Vec<f64>,
}

impl fmt::Debug for OfdmModulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OfdmModulator")
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl OfdmModulator {
    pub fn new(cfg: OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let ifft = FftPlanner::new().plan_fft_inverse(cfg.num_subcarriers);
        let ramp = ramp_up(cfg.window_len());
        Ok(OfdmModulator { cfg, ifft, ramp })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.cfg
    }

    pub fn modulate(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cfg.num_subcarriers {
            return Err(Error::LengthMismatch {
                expected: self.cfg.num_subcarriers,
                actual: x.len(),
            });
        }
        let mut buf = x.to_vec();
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        self.modulate_in_place(&mut buf, &mut scratch);
        Ok(buf)
    }

    fn modulate_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.ifft.process_with_scratch(buf, scratch);
        let scale = 1.0 / self.cfg.num_subcarriers as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Writes the windowed extended symbol at `start`, adding into `out` and
    /// clipping anything past its end.
    fn place(
        &self,
        symbol: &[Complex64],
        ext: &mut [Complex64],
        out: &mut [Complex64],
        start: usize,
    ) {
        extend_symbol(&self.cfg, &self.ramp, symbol, ext);
        let end = (start + ext.len()).min(out.len());
        for (o, e) in out[start..end].iter_mut().zip(ext.iter()) {
            *o += *e;
        }
    }

    /// Random-payload symbols with the given pilot phases, placed at `starts`
    /// inside a zeroed buffer of `len` samples.
    fn synthesize<R: RngCore>(
        &self,
        pattern: &PilotPattern,
        symbols: &[(usize, usize)],
        len: usize,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        check_grid(&self.cfg, pattern)?;
        let n = self.cfg.num_subcarriers;
        let mut out = vec![Complex64::default(); len];
        let mut freq = vec![Complex64::default(); n];
        let mut data = Vec::with_capacity(n);
        let mut ext = vec![Complex64::default(); self.cfg.symbol_len() + self.ramp.len()];
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        for &(start, phase) in symbols {
            freq.fill(Complex64::default());
            let bins = pattern.data_subcarriers(phase);
            data.resize(bins.len(), Complex64::default());
            fill_random_qam16(rng, &mut data);
            for (&k, &d) in bins.iter().zip(&data) {
                freq[k] = d;
            }
            insert_pilots(pattern, phase, &mut freq);
            self.modulate_in_place(&mut freq, &mut scratch);
            self.place(&freq, &mut ext, &mut out, start);
        }
        Ok(out)
    }

    /// `count` back-to-back symbols with pilot phases `0, 1, 2, ...`, as seen
    /// inside one long downlink burst. Length is `count * M`.
    pub fn burst<R: RngCore>(
        &self,
        pattern: &PilotPattern,
        count: usize,
        rng: &mut R,
    ) -> Result<Baseband> {
        let m = self.cfg.symbol_len();
        let symbols: Vec<(usize, usize)> = (0..count).map(|l| (l * m, l)).collect();
        let samples = self.synthesize(pattern, &symbols, count * m, rng)?;
        Baseband::new(
            samples,
            self.cfg.sample_rate,
            symbols.iter().map(|s| s.0).collect(),
            m,
        )
    }

    /// `frames` consecutive TDD frames. Pilot phases restart at every subframe.
    pub fn frames<R: RngCore>(
        &self,
        frame: &FrameConfig,
        pattern: &PilotPattern,
        frames: usize,
        rng: &mut R,
    ) -> Result<Baseband> {
        frame.validate()?;
        let m = self.cfg.symbol_len();
        let ttg = frame.ttg_samples(self.cfg.sample_rate);
        let rtg = frame.rtg_samples(self.cfg.sample_rate);
        let mut symbols = Vec::with_capacity(frames * frame.symbols_per_frame());
        let mut pos = 0;
        for _ in 0..frames {
            for (count, gap) in [(frame.dl_symbols, ttg), (frame.ul_symbols, rtg)] {
                for phase in 0..count {
                    symbols.push((pos, phase));
                    pos += m;
                }
                pos += gap;
            }
        }
        let samples = self.synthesize(pattern, &symbols, pos, rng)?;
        Baseband::new(
            samples,
            self.cfg.sample_rate,
            symbols.iter().map(|s| s.0).collect(),
            m,
        )
    }
}

/// One DL+UL frame with payload drawn from `seed`.
pub fn build_frame(
    cfg: &OfdmConfig,
    frame: &FrameConfig,
    pattern: &PilotPattern,
    seed: u64,
) -> Result<Baseband> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    OfdmModulator::new(cfg.clone())?.frames(frame, pattern, 1, &mut rng)
}

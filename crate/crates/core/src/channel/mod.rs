//! Impairment chain applied to a transmitted [`Baseband`].
//!
//! The stages always run in this order: multipath fading, CFO and phase
//! rotation, receive filtering, AWGN. [`Channel`] bundles them.

mod fading;
mod filter;
mod noise;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::waveform::Baseband;
use crate::{Error, Result};

pub use fading::{apply_multipath, Multipath};
pub use filter::{receive_filter, ReceiveFilter};
pub use noise::{add_awgn, add_awgn_calibrated, fill_noise, NoiseCalibration};

pub const PEDESTRIAN_DOPPLER_HZ: f64 = 7.28;
pub const VEHICULAR_DOPPLER_HZ: f64 = 145.69;
pub const DEFAULT_RICIAN_K_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    Static,
    Rayleigh,
    /// Line-of-sight component on the first tap with this K factor in dB.
    Rician {
        k_factor_db: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Seconds.
    pub delay: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub name: String,
    pub taps: Vec<Tap>,
    pub fading: Fading,
    pub max_doppler: f64,
}

impl ChannelProfile {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .taps
            .first()
            .ok_or_else(|| Error::config("channel profile needs at least one tap"))?;
        if first.delay != 0.0 {
            return Err(Error::config("first tap delay must be zero"));
        }
        if self
            .taps
            .windows(2)
            .any(|w| w[1].delay.partial_cmp(&w[0].delay) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::config("tap delays must be strictly increasing"));
        }
        if self.taps.iter().any(|t| !t.power_db.is_finite()) {
            return Err(Error::config("tap powers must be finite"));
        }
        if !(self.max_doppler.is_finite() && self.max_doppler >= 0.0) {
            return Err(Error::out_of_range("max_doppler", self.max_doppler));
        }
        Ok(())
    }

    /// Linear tap powers scaled to sum to one.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self
            .taps
            .iter()
            .map(|t| 10f64.powf(t.power_db / 10.0))
            .collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.last().map_or(0.0, |t| t.delay)
    }

    /// A channel whose gains never change: the theory overlay only applies here.
    pub fn is_static(&self) -> bool {
        self.fading == Fading::Static
    }

    /// Single unit tap, no fading.
    pub fn is_identity(&self) -> bool {
        self.is_static() && self.taps.len() == 1
    }

    fn flat(name: &str, fading: Fading, max_doppler: f64) -> Self {
        ChannelProfile {
            name: name.to_string(),
            taps: vec![Tap {
                delay: 0.0,
                power_db: 0.0,
            }],
            fading,
            max_doppler,
        }
    }

    fn with_fading(mut self, name: &str, fading: Fading) -> Self {
        self.name = name.to_string();
        self.fading = fading;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItuProfile {
    PedestrianA,
    VehicularA,
}

/// ITU-R M.1225 tapped-delay-line tables with Rayleigh fading.
pub fn itu_profile(name: ItuProfile) -> ChannelProfile {
    let (label, delays_ns, powers, doppler): (&str, &[f64], &[f64], f64) = match name {
        ItuProfile::PedestrianA => (
            "ped_a",
            &[0.0, 110.0, 190.0, 410.0],
            &[0.0, -9.7, -19.2, -22.8],
            PEDESTRIAN_DOPPLER_HZ,
        ),
        ItuProfile::VehicularA => (
            "veh_a",
            &[0.0, 310.0, 710.0, 1090.0, 1730.0, 2510.0],
            &[0.0, -1.0, -9.0, -10.0, -15.0, -20.0],
            VEHICULAR_DOPPLER_HZ,
        ),
    };
    ChannelProfile {
        name: label.to_string(),
        taps: delays_ns
            .iter()
            .zip(powers)
            .map(|(&d, &p)| Tap {
                delay: d * 1e-9,
                power_db: p,
            })
            .collect(),
        fading: Fading::Rayleigh,
        max_doppler: doppler,
    }
}

/// Channel names accepted in configuration files.
pub const CHANNEL_NAMES: [&str; 7] = [
    "awgn",
    "rayleigh_ped_a",
    "rician_ped_a",
    "rayleigh_veh_a",
    "rician_veh_a",
    "flat_rayleigh",
    "flat_static",
];

/// Looks up a named profile. Rician variants use `k_factor_db` on the first tap.
pub fn named_profile(name: &str, k_factor_db: f64) -> Result<ChannelProfile> {
    let rician = Fading::Rician { k_factor_db };
    let ped = || itu_profile(ItuProfile::PedestrianA);
    let veh = || itu_profile(ItuProfile::VehicularA);
    Ok(match name.trim() {
        "awgn" => ChannelProfile::flat("awgn", Fading::Static, 0.0),
        "flat_static" => ChannelProfile::flat("flat_static", Fading::Static, 0.0),
        "flat_rayleigh" => {
            ChannelProfile::flat("flat_rayleigh", Fading::Rayleigh, PEDESTRIAN_DOPPLER_HZ)
        }
        "rayleigh_ped_a" => ped().with_fading("rayleigh_ped_a", Fading::Rayleigh),
        "rician_ped_a" => ped().with_fading("rician_ped_a", rician),
        "rayleigh_veh_a" => veh().with_fading("rayleigh_veh_a", Fading::Rayleigh),
        "rician_veh_a" => veh().with_fading("rician_veh_a", rician),
        other => {
            return Err(Error::Parse(format!(
                "unknown channel '{other}', expected one of {}",
                CHANNEL_NAMES.join(", ")
            )))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentConfig {
    /// CFO as a fraction of the subcarrier spacing.
    pub cfo_normalized: f64,
    /// Stream-level phase offset, radians in `[-pi, pi]`.
    pub phase: f64,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
}

impl ImpairmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.cfo_normalized.is_finite() {
            return Err(Error::out_of_range("cfo_normalized", self.cfo_normalized));
        }
        if !(-PI..=PI).contains(&self.phase) {
            return Err(Error::out_of_range("phase", self.phase));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::out_of_range("snr_db", self.snr_db));
        }
        Ok(())
    }
}

const CFO_BLOCK: usize = 256;

/// Rotates sample `n` by `exp(j(2 pi f n / N + theta))`, `n` counted from the
/// start of the stream.
pub fn apply_cfo_phase(
    signal: &Baseband,
    cfg: &ImpairmentConfig,
    fft_size: usize,
) -> Result<Baseband> {
    let mut out = signal.clone();
    rotate_in_place(&mut out.samples, cfg, fft_size)?;
    Ok(out)
}

pub(crate) fn rotate_in_place(
    samples: &mut [Complex64],
    cfg: &ImpairmentConfig,
    fft_size: usize,
) -> Result<()> {
    cfg.validate()?;
    if fft_size == 0 {
        return Err(Error::config("FFT size must be positive"));
    }
    let f = cfg.cfo_normalized;
    if f == 0.0 && cfg.phase == 0.0 {
        return Ok(());
    }
    let n = fft_size as f64;
    let step = Complex64::from_polar(1.0, TAU * (f / n).fract());
    for (b, block) in samples.chunks_mut(CFO_BLOCK).enumerate() {
        // exact phase at every block head keeps recursion drift negligible
        let cycles = (f * (b * CFO_BLOCK) as f64 / n).fract();
        let mut rot = Complex64::from_polar(1.0, TAU * cycles + cfg.phase);
        for x in block {
            *x *= rot;
            rot *= step;
        }
    }
    Ok(())
}

/// Draws a stream phase uniformly in `[-pi, pi)`.
pub fn random_phase<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(-PI..PI)
}

/// Multipath plus receive filter, prepared once and reused across trials.
#[derive(Debug, Clone)]
pub struct Channel {
    multipath: Multipath,
    filter: Option<ReceiveFilter>,
}

impl Channel {
    pub fn new(profile: ChannelProfile, sample_rate: f64, passband: Option<f64>) -> Result<Self> {
        let multipath = Multipath::new(profile, sample_rate)?;
        let filter = passband
            .map(|b| ReceiveFilter::new(sample_rate, b))
            .transpose()?;
        Ok(Channel { multipath, filter })
    }

    pub fn profile(&self) -> &ChannelProfile {
        self.multipath.profile()
    }

    pub fn filter(&self) -> Option<&ReceiveFilter> {
        self.filter.as_ref()
    }

    /// Fraction of white-noise power that falls inside the receive passband.
    pub fn noise_bandwidth_fraction(&self) -> f64 {
        self.filter
            .as_ref()
            .map_or(1.0, ReceiveFilter::bandwidth_fraction)
    }

    /// Runs the whole chain. Returns the received stream and the per-sample
    /// noise power that was added.
    pub fn apply(
        &self,
        signal: Baseband,
        impairment: &ImpairmentConfig,
        fft_size: usize,
        reference_power: f64,
        seed: u64,
    ) -> Result<(Baseband, f64)> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let fading_seed = rng.gen();
        let noise_seed = rng.gen();
        let mut out = signal;
        self.multipath
            .apply_in_place(&mut out.samples, fading_seed)?;
        rotate_in_place(&mut out.samples, impairment, fft_size)?;
        if let Some(f) = &self.filter {
            f.apply(&mut out.samples);
        }
        let cal = NoiseCalibration {
            reference_power,
            snr_db: impairment.snr_db,
            bandwidth_fraction: self.noise_bandwidth_fraction(),
        };
        let sigma2 = add_awgn_calibrated(&mut out, &cal, noise_seed)?;
        Ok((out, sigma2))
    }
}

impl fmt::Display for ChannelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for ItuProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pedestrian_a" | "ped_a" | "pedestriana" => Ok(ItuProfile::PedestrianA),
            "vehicular_a" | "veh_a" | "vehiculara" => Ok(ItuProfile::VehicularA),
            other => Err(Error::Parse(format!("unknown ITU profile '{other}'"))),
        }
    }
}

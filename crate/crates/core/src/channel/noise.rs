//! Calibrated complex AWGN.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::waveform::Baseband;
use crate::{Error, Result};

/// How to turn an SNR into a per-sample noise power.
///
/// SNR is measured inside the receive passband: `reference_power` is the
/// in-band signal power and only `bandwidth_fraction` of the white noise
/// falls in band, so `sigma^2 = P / (10^(snr/10) * fraction)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCalibration {
    pub reference_power: f64,
    pub snr_db: f64,
    pub bandwidth_fraction: f64,
}

impl NoiseCalibration {
    pub fn noise_power(&self) -> Result<f64> {
        if self.snr_db == f64::INFINITY {
            return Ok(0.0);
        }
        if !self.snr_db.is_finite() {
            return Err(Error::out_of_range("snr_db", self.snr_db));
        }
        if !(self.bandwidth_fraction > 0.0 && self.bandwidth_fraction <= 1.0) {
            return Err(Error::out_of_range(
                "bandwidth_fraction",
                self.bandwidth_fraction,
            ));
        }
        if !(self.reference_power > 0.0 && self.reference_power.is_finite()) {
            return Err(Error::ZeroPower);
        }
        Ok(self.reference_power / (10f64.powf(self.snr_db / 10.0) * self.bandwidth_fraction))
    }
}

/// Adds circularly-symmetric complex Gaussian noise of power `sigma2`.
pub fn fill_noise<R: Rng>(samples: &mut [Complex64], sigma2: f64, rng: &mut R) {
    let scale = (sigma2 / 2.0).sqrt();
    for s in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(re * scale, im * scale);
    }
}

/// Adds noise over the occupied symbol extents of `signal`. Returns `sigma^2`.
pub fn add_awgn_calibrated(
    signal: &mut Baseband,
    cal: &NoiseCalibration,
    seed: u64,
) -> Result<f64> {
    let sigma2 = cal.noise_power()?;
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for r in signal.occupied_ranges() {
        fill_noise(&mut signal.samples[r], sigma2, &mut rng);
    }
    Ok(sigma2)
}

/// Adds noise at `snr_db` relative to the measured occupied-symbol power of
/// `signal`, with no receive filter. `f64::INFINITY` leaves it untouched.
pub fn add_awgn(signal: &Baseband, snr_db: f64, seed: u64) -> Result<(Baseband, f64)> {
    let mut out = signal.clone();
    if snr_db == f64::INFINITY {
        return Ok((out, 0.0));
    }
    let cal = NoiseCalibration {
        reference_power: signal.occupied_power(),
        snr_db,
        bandwidth_fraction: 1.0,
    };
    let sigma2 = add_awgn_calibrated(&mut out, &cal, seed)?;
    Ok((out, sigma2))
}

//! Tapped-delay-line multipath with sum-of-sinusoids (Jakes) fading.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{ChannelProfile, Fading};
use crate::waveform::Baseband;
use crate::{Error, Result};

const OSCILLATORS: usize = 32;
/// Gains are evaluated exactly on this sample grid and interpolated between.
const GAIN_STEP: usize = 64;

#[derive(Debug, Clone)]
pub struct Multipath {
    profile: ChannelProfile,
    sample_rate: f64,
    delays: Vec<usize>,
    amplitudes: Vec<f64>,
}

impl Multipath {
    pub fn new(profile: ChannelProfile, sample_rate: f64) -> Result<Self> {
        profile.validate()?;
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::out_of_range("sample_rate", sample_rate));
        }
        let delays = profile
            .taps
            .iter()
            .map(|t| (t.delay * sample_rate).round() as usize)
            .collect();
        let amplitudes = profile
            .normalized_powers()
            .into_iter()
            .map(f64::sqrt)
            .collect();
        Ok(Multipath {
            profile,
            sample_rate,
            delays,
            amplitudes,
        })
    }

    pub fn profile(&self) -> &ChannelProfile {
        &self.profile
    }

    /// Tap delays rounded to whole samples.
    pub fn delay_samples(&self) -> &[usize] {
        &self.delays
    }

    pub fn apply(&self, signal: &Baseband, seed: u64) -> Result<Baseband> {
        let mut out = signal.clone();
        self.apply_in_place(&mut out.samples, seed)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, samples: &mut [Complex64], seed: u64) -> Result<()> {
        let max_delay = self.delays.iter().copied().max().unwrap_or(0);
        if max_delay > 0 && max_delay >= samples.len() {
            return Err(Error::config(format!(
                "channel delay of {max_delay} samples exceeds the {}-sample signal",
                samples.len()
            )));
        }
        if self.profile.is_identity() {
            return Ok(());
        }
        let input = samples.to_vec();
        samples.fill(Complex64::default());
        let mut base = Xoshiro256PlusPlus::seed_from_u64(seed);
        for (tap, (&delay, &amp)) in self.delays.iter().zip(&self.amplitudes).enumerate() {
            let mut rng = base.clone();
            base.jump();
            let process = TapProcess::new(self, tap, amp, &mut rng);
            let grid = process.gains(input.len());
            accumulate_tap(samples, &input, delay, &grid);
        }
        Ok(())
    }
}

/// Complex gain of one tap over time.
struct TapProcess {
    los: Complex64,
    scatter: f64,
    phasors: Vec<Complex64>,
    steps: Vec<Complex64>,
}

impl TapProcess {
    fn new(mp: &Multipath, tap: usize, amp: f64, rng: &mut Xoshiro256PlusPlus) -> Self {
        let (los, scatter) = match mp.profile.fading {
            Fading::Static => (Complex64::new(amp, 0.0), 0.0),
            Fading::Rayleigh => (Complex64::default(), amp),
            Fading::Rician { k_factor_db } if tap == 0 => {
                let k = 10f64.powf(k_factor_db / 10.0);
                (
                    Complex64::new(amp * (k / (k + 1.0)).sqrt(), 0.0),
                    amp * (1.0 / (k + 1.0)).sqrt(),
                )
            }
            Fading::Rician { .. } => (Complex64::default(), amp),
        };
        let (mut phasors, mut steps) = (Vec::new(), Vec::new());
        if scatter > 0.0 {
            let theta: f64 = rng.gen_range(-PI..PI);
            let fd = mp.profile.max_doppler;
            for n in 1..=OSCILLATORS {
                let alpha = (TAU * n as f64 - PI + theta) / OSCILLATORS as f64;
                let phi: f64 = rng.gen_range(0.0..TAU);
                let cycles_per_step = fd * alpha.cos() * GAIN_STEP as f64 / mp.sample_rate;
                phasors.push(Complex64::from_polar(1.0, phi));
                steps.push(Complex64::from_polar(1.0, TAU * cycles_per_step));
            }
        }
        TapProcess {
            los,
            scatter: scatter / (OSCILLATORS as f64).sqrt(),
            phasors,
            steps,
        }
    }

    fn is_constant(&self) -> bool {
        self.steps.iter().all(|s| s.im == 0.0 && s.re == 1.0)
    }

    /// Gains at samples `0, GAIN_STEP, 2*GAIN_STEP, ...` covering `len`.
    fn gains(mut self, len: usize) -> Vec<Complex64> {
        let points = if self.is_constant() {
            1
        } else {
            len / GAIN_STEP + 2
        };
        let mut out = Vec::with_capacity(points);
        for _ in 0..points {
            let sum: Complex64 = self.phasors.iter().sum();
            out.push(self.los + sum * self.scatter);
            for (p, s) in self.phasors.iter_mut().zip(&self.steps) {
                *p *= s;
            }
        }
        out
    }
}

fn accumulate_tap(out: &mut [Complex64], input: &[Complex64], delay: usize, grid: &[Complex64]) {
    let len = out.len();
    if delay >= len {
        return;
    }
    if let [g] = grid {
        for (o, x) in out[delay..].iter_mut().zip(input) {
            *o += g * x;
        }
        return;
    }
    let inv = 1.0 / GAIN_STEP as f64;
    for (b, w) in grid.windows(2).enumerate() {
        let start = (b * GAIN_STEP).max(delay);
        let end = ((b + 1) * GAIN_STEP).min(len);
        if start >= end {
            continue;
        }
        let slope = (w[1] - w[0]) * inv;
        for n in start..end {
            let g = w[0] + slope * (n - b * GAIN_STEP) as f64;
            out[n] += g * input[n - delay];
        }
    }
}

/// Passes `signal` through `profile` with fading drawn from `seed`.
pub fn apply_multipath(signal: &Baseband, profile: &ChannelProfile, seed: u64) -> Result<Baseband> {
    Multipath::new(profile.clone(), signal.sample_rate)?.apply(signal, seed)
}

#[cfg(test)]
mod tests {
    use super::super::{itu_profile, named_profile, ItuProfile, Tap};
    use super::*;

    fn ones(len: usize) -> Baseband {
        Baseband::new(vec![Complex64::new(1.0, 0.0); len], 8.4e6, vec![0], len).unwrap()
    }

    fn noise(len: usize, seed: u64) -> Baseband {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let s = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Baseband::new(s, 8.4e6, vec![0], len).unwrap()
    }

    #[test]
    fn static_single_tap_is_identity() {
        let s = noise(300, 1);
        for name in ["awgn", "flat_static"] {
            let p = named_profile(name, 6.0).unwrap();
            assert_eq!(apply_multipath(&s, &p, 9).unwrap(), s);
        }
    }

    #[test]
    fn ped_a_delays_round_to_samples() {
        let mp = Multipath::new(itu_profile(ItuProfile::PedestrianA), 8.4e6).unwrap();
        assert_eq!(mp.delay_samples(), &[0, 1, 2, 3]);
        let mp = Multipath::new(itu_profile(ItuProfile::VehicularA), 8.4e6).unwrap();
        assert_eq!(mp.delay_samples(), &[0, 3, 6, 9, 15, 21]);
    }

    #[test]
    fn static_multitap_is_a_fixed_convolution() {
        let mut p = itu_profile(ItuProfile::PedestrianA);
        p.fading = Fading::Static;
        let s = noise(100, 2);
        let a = apply_multipath(&s, &p, 1).unwrap();
        let b = apply_multipath(&s, &p, 2).unwrap();
        assert_eq!(a, b);
        let amps: Vec<f64> = p.normalized_powers().iter().map(|x| x.sqrt()).collect();
        let n = 50;
        let expect = s.samples[n] * amps[0]
            + s.samples[n - 1] * amps[1]
            + s.samples[n - 2] * amps[2]
            + s.samples[n - 3] * amps[3];
        assert!((a.samples[n] - expect).norm() < 1e-12);
    }

    #[test]
    fn delay_beyond_signal_is_rejected() {
        let p = itu_profile(ItuProfile::VehicularA);
        assert!(apply_multipath(&ones(21), &p, 0).is_err());
        assert!(apply_multipath(&ones(22), &p, 0).is_ok());
    }

    #[test]
    fn frozen_rayleigh_gain_has_unit_power() {
        let p = ChannelProfile {
            name: "frozen".into(),
            taps: vec![Tap {
                delay: 0.0,
                power_db: 0.0,
            }],
            fading: Fading::Rayleigh,
            max_doppler: 0.0,
        };
        let mp = Multipath::new(p, 8.4e6).unwrap();
        let s = ones(200);
        let trials = 10_000;
        let mut acc = 0.0;
        for seed in 0..trials {
            let out = mp.apply(&s, seed).unwrap();
            assert!(out
                .samples
                .iter()
                .all(|g| (g - out.samples[0]).norm() < 1e-12));
            acc += out.samples[0].norm_sqr();
        }
        let mean = acc / trials as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn gains_vary_smoothly_with_doppler() {
        let p = named_profile("flat_rayleigh", 6.0).unwrap();
        let mut p = p;
        p.max_doppler = 2000.0;
        let out = apply_multipath(&ones(20_000), &p, 4).unwrap();
        let first = out.samples[0];
        assert!(out.samples.iter().any(|g| (g - first).norm() > 0.1));
        assert!(out.samples.windows(2).all(|w| (w[1] - w[0]).norm() < 1e-2));
    }

    #[test]
    fn received_power_is_preserved_on_average() {
        for name in [
            "rayleigh_ped_a",
            "rician_ped_a",
            "rayleigh_veh_a",
            "rician_veh_a",
            "flat_rayleigh",
        ] {
            let mp = Multipath::new(named_profile(name, 6.0).unwrap(), 8.4e6).unwrap();
            let s = noise(256, 77);
            let pin: f64 = s.samples[32..].iter().map(|x| x.norm_sqr()).sum();
            let trials = 10_000;
            let mut pout = 0.0;
            for seed in 0..trials {
                let out = mp.apply(&s, seed).unwrap();
                pout += out.samples[32..].iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
            let ratio = pout / trials as f64 / pin;
            assert!((ratio - 1.0).abs() < 0.03, "{name}: {ratio}");
        }
    }
}

//! Spectrum sensing of pilot-bearing OFDM signals by time-domain symbol
//! cross-correlation (TDSC).
//!
//! Two OFDM symbols that share a pilot-tone configuration correlate through
//! their pilots even when the data and noise do not. Accumulating that
//! correlation over many symbol pairs and comparing its magnitude against a
//! Neyman-Pearson threshold yields a detector that works far below 0 dB SNR.
//!
//! The crate is organized bottom-up:
//!
//! - [`pilot_grid`]: WiMAX- and LTE-style periodic pilot layouts.
//! - [`waveform`]: 16-QAM OFDM symbol and frame synthesis, IQ file I/O.
//! - [`channel`]: multipath fading, CFO/phase rotation, receive filter, AWGN.
//! - [`detector`]: the TDSC statistic, threshold and decision.
//! - [`theory`]: closed-form mean, Marcum-Q tail, analytic P_MD and ROC.
//! - [`experiment`]: Monte-Carlo sweeps with CSV output.
//! - [`cli`]: the `tdsc` command-line front end.

pub mod channel;
pub mod cli;
pub mod detector;
mod error;
pub mod experiment;
pub mod pilot_grid;
pub mod theory;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

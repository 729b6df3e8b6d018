//! Periodic pilot-tone layouts.
//!
//! A [`PilotPattern`] holds `A` pilot-index sets `P_0 .. P_{A-1}`; OFDM symbol
//! `l` carries pilots on `P_{l mod A}`. Two symbols whose index difference is a
//! multiple of `A` therefore share pilot positions *and* pilot values, which is
//! what the cross-correlation detector relies on.
//!
//! Indices are FFT bins in `[0, N)`. Negative frequencies live in the upper
//! half of the grid, as produced by an unshifted inverse FFT.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::{Error, Result};

/// Pilot boost for WiMAX, 2.5 dB above unit data power.
pub const WIMAX_PILOT_BOOST_DB: f64 = 2.5;

/// Subcarriers per LTE resource block.
pub const LTE_SUBCARRIERS_PER_RB: usize = 12;

/// OFDM symbols per normal-CP LTE slot.
pub const LTE_SYMBOLS_PER_SLOT: usize = 7;

const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Standard {
    Wimax,
    Lte,
}

impl Standard {
    /// Default symbol-index difference used by the detector: one pilot period.
    pub fn default_offset(self) -> usize {
        match self {
            Standard::Wimax => 2,
            Standard::Lte => LTE_SYMBOLS_PER_SLOT,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Standard::Wimax => "wimax",
            Standard::Lte => "lte",
        }
    }
}

impl fmt::Display for Standard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Standard {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wimax" => Ok(Standard::Wimax),
            "lte" => Ok(Standard::Lte),
            other => Err(Error::Parse(format!("unknown standard '{other}'"))),
        }
    }
}

/// Used (data + pilot) subcarrier count of the DL-PUSC-style layout.
///
/// Matches the 802.16e OFDMA used-carrier counts, excluding the DC null.
pub fn wimax_used_subcarriers(fft_size: usize) -> Result<usize> {
    match fft_size {
        128 => Ok(84),
        512 => Ok(420),
        1024 => Ok(840),
        2048 => Ok(1680),
        other => Err(Error::config(format!(
            "unsupported WiMAX FFT size {other}; expected 128, 512, 1024 or 2048"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    standard: Standard,
    num_subcarriers: usize,
    used: Vec<usize>,
    configs: Vec<Vec<usize>>,
    values: Vec<Vec<Complex64>>,
    data: Vec<Vec<usize>>,
    pilot_amplitude: f64,
}

impl PilotPattern {
    /// Builds a pattern from explicit sets.
    ///
    /// `used` lists every bin that carries data or pilots. Each pilot set must be
    /// non-empty and contained in `used`; `values` must be unit-modulus and align
    /// with `configs`.
    pub fn new(
        standard: Standard,
        num_subcarriers: usize,
        used: Vec<usize>,
        configs: Vec<Vec<usize>>,
        values: Vec<Vec<Complex64>>,
        pilot_amplitude: f64,
    ) -> Result<Self> {
        if configs.iter().any(|c| c.is_empty()) {
            return Err(Error::config("every pilot set must be non-empty"));
        }
        Self::build(
            standard,
            num_subcarriers,
            used,
            configs,
            values,
            pilot_amplitude,
        )
    }

    fn build(
        standard: Standard,
        num_subcarriers: usize,
        mut used: Vec<usize>,
        configs: Vec<Vec<usize>>,
        values: Vec<Vec<Complex64>>,
        pilot_amplitude: f64,
    ) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::config("pattern needs at least one subcarrier"));
        }
        if configs.is_empty() {
            return Err(Error::config("pattern period must be at least 1"));
        }
        if configs.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: configs.len(),
                actual: values.len(),
            });
        }
        used.sort_unstable();
        used.dedup();
        if used.last().is_some_and(|&k| k >= num_subcarriers) {
            return Err(Error::config("used subcarrier outside the FFT grid"));
        }
        let mut data = Vec::with_capacity(configs.len());
        for (set, vals) in configs.iter().zip(&values) {
            if set.len() != vals.len() {
                return Err(Error::LengthMismatch {
                    expected: set.len(),
                    actual: vals.len(),
                });
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config(
                    "pilot indices must be strictly ascending and unique",
                ));
            }
            if set.iter().any(|k| used.binary_search(k).is_err()) {
                return Err(Error::config("pilot index not among used subcarriers"));
            }
            if vals.iter().any(|v| (v.norm() - 1.0).abs() > 1e-12) {
                return Err(Error::config("pilot values must be unit-modulus"));
            }
            data.push(
                used.iter()
                    .copied()
                    .filter(|k| set.binary_search(k).is_err())
                    .collect(),
            );
        }
        let mut pattern = PilotPattern {
            standard,
            num_subcarriers,
            used,
            configs,
            values,
            data,
            pilot_amplitude: 1.0,
        };
        pattern.set_pilot_amplitude(pilot_amplitude)?;
        Ok(pattern)
    }

    /// Same layout with a different pilot amplitude `rho`.
    ///
    /// Zero is accepted so that pilot-free signals can be generated.
    pub fn with_pilot_amplitude(mut self, rho: f64) -> Result<Self> {
        self.set_pilot_amplitude(rho)?;
        Ok(self)
    }

    fn set_pilot_amplitude(&mut self, rho: f64) -> Result<()> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::out_of_range("pilot amplitude", rho));
        }
        self.pilot_amplitude = rho;
        Ok(())
    }

    pub fn standard(&self) -> Standard {
        self.standard
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// Pilot period `A`.
    pub fn period(&self) -> usize {
        self.configs.len()
    }

    pub fn pilot_amplitude(&self) -> f64 {
        self.pilot_amplitude
    }

    pub fn configs(&self) -> &[Vec<usize>] {
        &self.configs
    }

    /// Bins carrying data or pilots, ascending.
    pub fn used_subcarriers(&self) -> &[usize] {
        &self.used
    }

    pub fn pilots_for_symbol(&self, l: usize) -> &[usize] {
        &self.configs[l % self.period()]
    }

    /// Unit-modulus pilot values aligned with [`pilots_for_symbol`](Self::pilots_for_symbol).
    pub fn pilot_values_for_symbol(&self, l: usize) -> &[Complex64] {
        &self.values[l % self.period()]
    }

    /// Used bins of symbol `l` that carry data.
    pub fn data_subcarriers(&self, l: usize) -> &[usize] {
        &self.data[l % self.period()]
    }

    /// All offsets `v` in `[1, max_v]` at which pilot configurations coincide.
    pub fn matching_offsets(&self, max_v: usize) -> Vec<usize> {
        let a = self.period();
        (1..=max_v).filter(|v| v % a == 0).collect()
    }

    /// Expected per-sample power of one time-domain symbol, averaged over the
    /// pilot period, for unit-power data.
    pub fn mean_symbol_power(&self) -> f64 {
        let n2 = (self.num_subcarriers as f64).powi(2);
        let rho2 = self.pilot_amplitude * self.pilot_amplitude;
        let total: f64 = (0..self.period())
            .map(|a| self.data[a].len() as f64 + rho2 * self.configs[a].len() as f64)
            .sum();
        total / (self.period() as f64 * n2)
    }

    /// Renders the versioned layout file: one `symbol_phase,index` line per pilot.
    pub fn layout_text(&self) -> String {
        let mut out = format!(
            "# tdsc pilot layout v{LAYOUT_VERSION} standard={} fft_size={} period={}\n",
            self.standard,
            self.num_subcarriers,
            self.period()
        );
        for (phase, set) in self.configs.iter().enumerate() {
            for k in set {
                out.push_str(&format!("{phase},{k}\n"));
            }
        }
        out
    }
}

/// A layout file parsed back into its pilot sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotLayout {
    pub standard: Standard,
    pub fft_size: usize,
    pub configs: Vec<Vec<usize>>,
}

/// Parses the text produced by [`PilotPattern::layout_text`].
pub fn parse_layout(text: &str) -> Result<PilotLayout> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty layout file".into()))?;
    let mut standard = None;
    let mut fft_size = None;
    let mut period = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = field.split_once('=') {
            match k {
                "standard" => standard = Some(v.parse::<Standard>()?),
                "fft_size" => fft_size = v.parse::<usize>().ok(),
                "period" => period = v.parse::<usize>().ok(),
                _ => {}
            }
        }
    }
    let (standard, fft_size, period) = match (standard, fft_size, period) {
        (Some(s), Some(n), Some(a)) if a > 0 => (s, n, a),
        _ => return Err(Error::Parse(format!("bad layout header '{header}'"))),
    };
    let mut configs = vec![Vec::new(); period];
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (phase, index) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad layout line '{line}'")))?;
        let phase: usize = phase
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad symbol phase in '{line}'")))?;
        let index: usize = index
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad subcarrier index in '{line}'")))?;
        if phase >= period || index >= fft_size {
            return Err(Error::Parse(format!("layout entry out of range: '{line}'")));
        }
        configs[phase].push(index);
    }
    Ok(PilotLayout {
        standard,
        fft_size,
        configs,
    })
}

/// Maps used-offset `u` (ascending frequency, DC skipped) to an FFT bin.
fn centered_bin(fft_size: usize, used: usize, u: usize) -> usize {
    let half = used / 2;
    if u < half {
        fft_size - (half - u)
    } else {
        u - half + 1
    }
}

fn centered_bins(fft_size: usize, used: usize) -> Vec<usize> {
    (0..used).map(|u| centered_bin(fft_size, used, u)).collect()
}

/// Pilot signs from the 802.16 PRBS `1 + x^9 + x^11`, seeded with all ones.
fn wimax_prbs(len: usize) -> Vec<f64> {
    let mut state: u16 = 0x7ff;
    (0..len)
        .map(|_| {
            let bit = ((state >> 10) ^ (state >> 8)) & 1;
            state = ((state << 1) | bit) & 0x7ff;
            1.0 - 2.0 * f64::from(bit)
        })
        .collect()
}

/// DL-PUSC-style WiMAX layout with even/odd pilot alternation.
///
/// The used subcarriers sit symmetrically around a DC null. Pilots fall on
/// every 14th used subcarrier, starting at used-offset 4 on even symbols and 8
/// on odd symbols. Pilot values are PRBS-derived BPSK, boosted by
/// [`WIMAX_PILOT_BOOST_DB`].
pub fn wimax_pattern(fft_size: usize) -> Result<PilotPattern> {
    let used = wimax_used_subcarriers(fft_size)?;
    let prbs = wimax_prbs(used);
    let sets: Vec<(Vec<usize>, Vec<Complex64>)> = [4usize, 8]
        .iter()
        .map(|&first| {
            let mut pilots: Vec<(usize, Complex64)> = (first..used)
                .step_by(14)
                .map(|u| {
                    (
                        centered_bin(fft_size, used, u),
                        Complex64::new(prbs[u], 0.0),
                    )
                })
                .collect();
            pilots.sort_by_key(|p| p.0);
            pilots.into_iter().unzip()
        })
        .collect();
    let (configs, values) = sets.into_iter().unzip();
    PilotPattern::new(
        Standard::Wimax,
        fft_size,
        centered_bins(fft_size, used),
        configs,
        values,
        10f64.powf(WIMAX_PILOT_BOOST_DB / 20.0),
    )
}

fn qpsk_values(count: usize, rng: &mut Xoshiro256PlusPlus) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let bits: u8 = rng.gen_range(0..4);
            let re = if bits & 1 == 0 { s } else { -s };
            let im = if bits & 2 == 0 { s } else { -s };
            Complex64::new(re, im)
        })
        .collect()
}

/// Slot-periodic LTE layout: reference signals on every 6th subcarrier of
/// slot-symbol 0 (offset 0) and slot-symbol 4 (offset 3); other slot symbols
/// carry no pilots.
fn lte_layout(
    fft_size: usize,
    used: Vec<usize>,
    symbols_per_slot: usize,
    cell_id: u32,
) -> Result<PilotPattern> {
    if symbols_per_slot != LTE_SYMBOLS_PER_SLOT {
        return Err(Error::config(format!(
            "LTE slots have {LTE_SYMBOLS_PER_SLOT} symbols with normal CP, got {symbols_per_slot}"
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x4c54_4552_5300_0000 ^ u64::from(cell_id));
    let mut configs = vec![Vec::new(); symbols_per_slot];
    let mut values = vec![Vec::new(); symbols_per_slot];
    for (symbol, offset) in [(0usize, 0usize), (4, 3)] {
        let mut set: Vec<usize> = used.iter().skip(offset).step_by(6).copied().collect();
        set.sort_unstable();
        values[symbol] = qpsk_values(set.len(), &mut rng);
        configs[symbol] = set;
    }
    PilotPattern::build(Standard::Lte, fft_size, used, configs, values, 1.0)
}

/// LTE layout over the whole FFT grid: bin `k` is subcarrier `k` of the
/// resource grid.
///
/// The reference-signal values are pseudo-random QPSK points drawn from a
/// generator seeded by `cell_id`, see [`lte_pattern_for_cell`].
pub fn lte_pattern(fft_size: usize, symbols_per_slot: usize) -> Result<PilotPattern> {
    lte_pattern_for_cell(fft_size, symbols_per_slot, 0)
}

pub fn lte_pattern_for_cell(
    fft_size: usize,
    symbols_per_slot: usize,
    cell_id: u32,
) -> Result<PilotPattern> {
    if fft_size < LTE_SUBCARRIERS_PER_RB || !fft_size.is_multiple_of(LTE_SUBCARRIERS_PER_RB) {
        return Err(Error::config(format!(
            "LTE grid size {fft_size} is not a positive multiple of {LTE_SUBCARRIERS_PER_RB}"
        )));
    }
    lte_layout(fft_size, (0..fft_size).collect(), symbols_per_slot, cell_id)
}

/// LTE layout of `resource_blocks` RBs centered on a DC null inside a larger
/// FFT, the way a real downlink occupies its channel.
pub fn lte_pattern_in_band(
    fft_size: usize,
    resource_blocks: usize,
    cell_id: u32,
) -> Result<PilotPattern> {
    let used = resource_blocks * LTE_SUBCARRIERS_PER_RB;
    if resource_blocks == 0 || used >= fft_size {
        return Err(Error::config(format!(
            "{resource_blocks} resource blocks do not fit an FFT of {fft_size}"
        )));
    }
    lte_layout(
        fft_size,
        centered_bins(fft_size, used),
        LTE_SYMBOLS_PER_SLOT,
        cell_id,
    )
}

/// The pattern the experiment harness uses for `standard` at `fft_size`.
///
/// LTE occupies the same used bandwidth as the WiMAX layout of that FFT size,
/// so both standards are compared over identical spectrum.
pub fn pattern_for(standard: Standard, fft_size: usize) -> Result<PilotPattern> {
    match standard {
        Standard::Wimax => wimax_pattern(fft_size),
        Standard::Lte => {
            let used = wimax_used_subcarriers(fft_size)?;
            lte_pattern_in_band(fft_size, used / LTE_SUBCARRIERS_PER_RB, 0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lte_24_matches_resource_element_map() {
        let p = lte_pattern(24, 7).unwrap();
        assert_eq!(p.period(), 7);
        assert_eq!(p.pilots_for_symbol(0), &[0, 6, 12, 18]);
        assert_eq!(p.pilots_for_symbol(4), &[3, 9, 15, 21]);
        for l in [1, 2, 3, 5, 6] {
            assert!(p.pilots_for_symbol(l).is_empty());
        }
        assert_eq!(p.pilot_amplitude(), 1.0);
    }

    #[test]
    fn lte_single_resource_block() {
        let p = lte_pattern(12, 7).unwrap();
        assert_eq!(p.pilots_for_symbol(0), &[0, 6]);
        assert_eq!(p.pilots_for_symbol(4), &[3, 9]);
    }

    #[test]
    fn lte_rejects_bad_grid() {
        assert!(lte_pattern(13, 7).is_err());
        assert!(lte_pattern(0, 7).is_err());
        assert!(lte_pattern(24, 6).is_err());
    }

    #[test]
    fn lte_symbol_lookup_wraps_by_slot() {
        let p = lte_pattern(24, 7).unwrap();
        assert_eq!(p.pilots_for_symbol(14), p.pilots_for_symbol(0));
        assert_eq!(p.pilots_for_symbol(11), &[3, 9, 15, 21]);
        assert_eq!(p.pilot_values_for_symbol(7), p.pilot_values_for_symbol(0));
    }

    #[test]
    fn lte_cell_id_changes_values_not_positions() {
        let a = lte_pattern_for_cell(24, 7, 1).unwrap();
        let b = lte_pattern_for_cell(24, 7, 2).unwrap();
        assert_eq!(a.configs(), b.configs());
        assert_ne!(a.pilot_values_for_symbol(0), b.pilot_values_for_symbol(0));
    }

    #[test]
    fn wimax_1024_structure() {
        let p = wimax_pattern(1024).unwrap();
        assert_eq!(p.period(), 2);
        let (even, odd) = (p.pilots_for_symbol(0), p.pilots_for_symbol(1));
        assert_eq!(even.len(), 60);
        assert_eq!(odd.len(), 60);
        assert!(even.iter().all(|k| odd.binary_search(k).is_err()));
        assert!(even.iter().chain(odd).all(|&k| k < 1024 && k != 0));
        assert_eq!(p.pilots_for_symbol(0), p.pilots_for_symbol(2));
        assert_eq!(p.pilots_for_symbol(5), p.pilots_for_symbol(1));
        assert_eq!(p.used_subcarriers().len(), 840);
        assert!((p.pilot_amplitude() - 1.333521432).abs() < 1e-8);
    }

    #[test]
    fn wimax_first_pilots_sit_at_used_offsets_4_and_8() {
        let p = wimax_pattern(1024).unwrap();
        // used-offset 0 is bin 1024 - 420 = 604
        assert!(p.pilots_for_symbol(0).contains(&608));
        assert!(p.pilots_for_symbol(1).contains(&612));
        // used-offset 424 is the 4th positive bin after the DC null
        assert!(p.pilots_for_symbol(0).contains(&5));
    }

    #[test]
    fn wimax_rejects_unsupported_size() {
        assert!(wimax_pattern(96).is_err());
        assert!(wimax_pattern(256).is_err());
    }

    #[test]
    fn matching_offsets_are_multiples_of_period() {
        assert_eq!(
            wimax_pattern(128).unwrap().matching_offsets(7),
            vec![2, 4, 6]
        );
        assert_eq!(lte_pattern(12, 7).unwrap().matching_offsets(7), vec![7]);
        let single = PilotPattern::new(
            Standard::Wimax,
            8,
            (0..8).collect(),
            vec![vec![1, 5]],
            vec![vec![Complex64::new(1.0, 0.0); 2]],
            1.0,
        )
        .unwrap();
        assert_eq!(single.matching_offsets(3), vec![1, 2, 3]);
    }

    #[test]
    fn constructor_rejects_invalid_sets() {
        let one = Complex64::new(1.0, 0.0);
        let make = |configs: Vec<Vec<usize>>, values: Vec<Vec<Complex64>>| {
            PilotPattern::new(Standard::Wimax, 8, (0..8).collect(), configs, values, 1.0)
        };
        assert!(make(vec![vec![]], vec![vec![]]).is_err());
        assert!(make(vec![vec![9]], vec![vec![one]]).is_err());
        assert!(make(vec![vec![3, 3]], vec![vec![one, one]]).is_err());
        assert!(make(vec![vec![1]], vec![vec![Complex64::new(2.0, 0.0)]]).is_err());
        assert!(make(vec![], vec![]).is_err());
        assert!(PilotPattern::new(
            Standard::Wimax,
            8,
            (0..8).collect(),
            vec![vec![1]],
            vec![vec![one]],
            -1.0
        )
        .is_err());
    }

    #[test]
    fn layout_text_round_trips() {
        for p in [wimax_pattern(128).unwrap(), lte_pattern(24, 7).unwrap()] {
            let parsed = parse_layout(&p.layout_text()).unwrap();
            assert_eq!(parsed.standard, p.standard());
            assert_eq!(parsed.fft_size, p.num_subcarriers());
            assert_eq!(parsed.configs, p.configs());
        }
    }

    #[test]
    fn mean_symbol_power_counts_boosted_pilots() {
        let p = wimax_pattern(1024).unwrap();
        let rho2 = p.pilot_amplitude().powi(2);
        let expected = (780.0 + 60.0 * rho2) / (1024.0f64 * 1024.0);
        assert!((p.mean_symbol_power() - expected).abs() < 1e-18);
    }

    #[test]
    fn pattern_for_lte_matches_wimax_bandwidth() {
        let lte = pattern_for(Standard::Lte, 1024).unwrap();
        let wimax = pattern_for(Standard::Wimax, 1024).unwrap();
        assert_eq!(lte.used_subcarriers(), wimax.used_subcarriers());
        assert_eq!(lte.pilots_for_symbol(0).len(), 140);
        assert_eq!(lte.pilots_for_symbol(4).len(), 140);
    }
}

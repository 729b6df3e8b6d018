//! Gray-coded 16-QAM.
//!
//! Each axis takes two bits: `00 -> +1`, `01 -> +3`, `11 -> -3`, `10 -> -1`.
//! The first bit pair drives I, the second Q, and the result is scaled by
//! `1/sqrt(10)` for unit average power.

use num_complex::Complex64;
use rand::RngCore;

use crate::{Error, Result};

const AXIS: [f64; 4] = [1.0, 3.0, -1.0, -3.0];

fn axis(b0: bool, b1: bool) -> f64 {
    AXIS[(usize::from(b0) << 1) | usize::from(b1)]
}

/// Constellation point for a nibble whose most significant bit is the first bit.
pub fn qam16_point(nibble: u8) -> Complex64 {
    table()[usize::from(nibble & 0xf)]
}

fn table() -> &'static [Complex64; 16] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[Complex64; 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let scale = 10f64.sqrt().recip();
        std::array::from_fn(|n| {
            let bit = |i: u32| (n >> (3 - i)) & 1 == 1;
            Complex64::new(axis(bit(0), bit(1)) * scale, axis(bit(2), bit(3)) * scale)
        })
    })
}

pub fn map_qam16(bits: &[bool]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(4) {
        return Err(Error::LengthMismatch {
            expected: bits.len().next_multiple_of(4),
            actual: bits.len(),
        });
    }
    let scale = 10f64.sqrt().recip();
    Ok(bits
        .chunks_exact(4)
        .map(|b| Complex64::new(axis(b[0], b[1]) * scale, axis(b[2], b[3]) * scale))
        .collect())
}

/// Fills `out` with uniformly random 16-QAM symbols, 16 per generator draw.
pub fn fill_random_qam16<R: RngCore + ?Sized>(rng: &mut R, out: &mut [Complex64]) {
    let table = table();
    for chunk in out.chunks_mut(16) {
        let mut word = rng.next_u64();
        for slot in chunk {
            *slot = table[(word & 0xf) as usize];
            word >>= 4;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn golden_gray_table() {
        let s = 10f64.sqrt();
        let golden = [
            ("0000", 1.0, 1.0),
            ("0001", 1.0, 3.0),
            ("0011", 1.0, -3.0),
            ("0010", 1.0, -1.0),
            ("0100", 3.0, 1.0),
            ("1100", -3.0, 1.0),
            ("1000", -1.0, 1.0),
            ("1111", -3.0, -3.0),
            ("1010", -1.0, -1.0),
            ("0110", 3.0, -1.0),
        ];
        for (b, i, q) in golden {
            let p = map_qam16(&bits(b)).unwrap()[0];
            assert_eq!(p, Complex64::new(i / s, q / s), "{b}");
        }
    }

    #[test]
    fn unit_mean_power() {
        let all: Vec<bool> = (0u8..16)
            .flat_map(|n| (0..4).map(move |i| (n >> (3 - i)) & 1 == 1))
            .collect();
        let pts = map_qam16(&all).unwrap();
        let power: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        assert!((power - 1.0).abs() < 1e-15);
        for (n, p) in pts.iter().enumerate() {
            assert_eq!(*p, qam16_point(n as u8));
        }
    }

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        for a in 0u8..16 {
            for b in 0u8..16 {
                let d = (qam16_point(a) - qam16_point(b)).norm() * 10f64.sqrt();
                if (d - 2.0).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn rejects_partial_symbol() {
        assert!(map_qam16(&bits("10110")).is_err());
        assert!(map_qam16(&[]).unwrap().is_empty());
    }

    #[test]
    fn random_fill_is_seeded() {
        let mut a = vec![Complex64::default(); 37];
        let mut b = a.clone();
        fill_random_qam16(&mut Xoshiro256PlusPlus::seed_from_u64(5), &mut a);
        fill_random_qam16(&mut Xoshiro256PlusPlus::seed_from_u64(5), &mut b);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| table().contains(p)));
    }
}

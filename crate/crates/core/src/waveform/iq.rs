//! IQ capture files: interleaved little-endian `f32` I/Q pairs, a `key=value`
//! metadata sidecar, and an optional symbol-start list (one offset per line).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::{Error, Result};

pub fn write_iq(path: &Path, samples: &[Complex64]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        w.write_all(&(s.re as f32).to_le_bytes())
            .and_then(|_| w.write_all(&(s.im as f32).to_le_bytes()))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_iq(path: &Path) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "{}: {} bytes is not a whole number of I/Q pairs",
            path.display(),
            bytes.len()
        )));
    }
    let f = |b: &[u8]| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    Ok(bytes
        .chunks_exact(8)
        .map(|c| Complex64::new(f(&c[..4]), f(&c[4..])))
        .collect())
}

pub fn write_starts(path: &Path, starts: &[usize]) -> Result<()> {
    let text: String = starts.iter().map(|s| format!("{s}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_starts(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse()
                .map_err(|_| Error::Parse(format!("{}: bad symbol start '{l}'", path.display())))
        })
        .collect()
}

/// Sidecar describing an IQ file.
#[derive(Debug, Clone, PartialEq)]
pub struct IqMetadata {
    pub sample_rate: f64,
    pub fft_size: usize,
    pub cp_len: usize,
    pub standard: String,
    pub seed: u64,
    /// Any further keys, kept in sorted order.
    pub extra: BTreeMap<String, String>,
}

impl IqMetadata {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "sample_rate={}\nfft_size={}\ncp_len={}\nstandard={}\nseed={}\n",
            self.sample_rate, self.fft_size, self.cp_len, self.standard, self.seed
        );
        for (k, v) in &self.extra {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata line '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn take<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = map
                .remove(key)
                .ok_or_else(|| Error::Parse(format!("metadata missing '{key}'")))?;
            raw.parse()
                .map_err(|_| Error::Parse(format!("metadata '{key}' has bad value '{raw}'")))
        }
        Ok(IqMetadata {
            sample_rate: take(&mut map, "sample_rate")?,
            fft_size: take(&mut map, "fft_size")?,
            cp_len: take(&mut map, "cp_len")?,
            standard: take(&mut map, "standard")?,
            seed: take(&mut map, "seed")?,
            extra: map,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iq_round_trip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iq");
        let x = vec![Complex64::new(0.25, -1.5), Complex64::new(1e-3, 3.0)];
        write_iq(&path, &x).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 16);
        let raw = fs::read(&path).unwrap();
        assert_eq!(&raw[..4], &0.25f32.to_le_bytes());
        assert_eq!(&raw[4..8], &(-1.5f32).to_le_bytes());
        let y = read_iq(&path).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn truncated_iq_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.iq");
        fs::write(&path, [0u8; 12]).unwrap();
        assert!(read_iq(&path).is_err());
        assert!(matches!(
            read_iq(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn metadata_round_trip() {
        let mut extra = BTreeMap::new();
        extra.insert("noise_power".to_string(), "0.5".to_string());
        let m = IqMetadata {
            sample_rate: 8.4e6,
            fft_size: 1024,
            cp_len: 256,
            standard: "wimax".into(),
            seed: 42,
            extra,
        };
        let text = m.to_text();
        assert!(text.starts_with("sample_rate=8400000\nfft_size=1024\n"));
        assert_eq!(IqMetadata::parse(&text).unwrap(), m);
        assert!(IqMetadata::parse("fft_size=8\n").is_err());
    }

    #[test]
    fn starts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        write_starts(&path, &[0, 1280, 2560]).unwrap();
        assert_eq!(read_starts(&path).unwrap(), vec![0, 1280, 2560]);
    }
}

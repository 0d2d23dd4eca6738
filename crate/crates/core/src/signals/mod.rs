//! Wave-excited response synthesis and peak-frequency extraction.

pub mod filter;
pub mod jonswap;
pub mod psd;

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::Metadata;

pub use jonswap::{jonswap_density, synthesize_response, JonswapConfig};
pub use psd::{averaged_psd, estimate_peak_frequency, PeakEstimate, Psd, PsdConfig};

pub const DEFAULT_SAMPLE_RATE: f64 = 2048.0;
pub const DEFAULT_DURATION: f64 = 1200.0;
pub const DEFAULT_DAMPING: f64 = 0.01;

const BINARY_MAGIC: &[u8; 8] = b"SHMTS\x00\x01\x00";

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("angular frequency {0} must be positive")]
    NonPositiveFrequency(f64),
    #[error("frequency {freq} Hz is not below the Nyquist frequency {nyquist} Hz")]
    AboveNyquist { freq: f64, nyquist: f64 },
    #[error("signal too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("signal has no energy in the analysis band")]
    AllZero,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    #[default]
    Csv,
    Binary,
}

impl TimeSeries {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(SignalError::InvalidSeries(format!("sample rate {}", self.sample_rate)));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::InvalidSeries(format!("sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn write<W: Write>(&self, w: W, format: SeriesFormat, meta: Option<&Metadata>) -> Result<(), SignalError> {
        match format {
            SeriesFormat::Csv => self.write_csv(w, meta),
            SeriesFormat::Binary => self.write_binary(w),
        }
    }

    pub fn read<R: Read>(r: R, format: SeriesFormat) -> Result<Self, SignalError> {
        match format {
            SeriesFormat::Csv => Self::read_csv(r),
            SeriesFormat::Binary => Self::read_binary(r),
        }
    }

    /// `# sample_rate_hz=<fs>` followed by a `displacement` column.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: Option<&Metadata>) -> Result<(), SignalError> {
        if let Some(m) = meta {
            m.write_comment(&mut w)?;
        }
        writeln!(w, "# sample_rate_hz={}", self.sample_rate)?;
        writeln!(w, "displacement")?;
        for v in &self.samples {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SignalError> {
        let mut sample_rate = None;
        let mut samples = Vec::new();
        let mut header = false;
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("sample_rate_hz=") {
                    sample_rate =
                        Some(v.trim().parse::<f64>().map_err(|_| {
                            SignalError::InvalidSeries(format!("line {}: bad sample rate '{v}'", i + 1))
                        })?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !header {
                header = true;
                if line.parse::<f64>().is_err() {
                    continue;
                }
            }
            samples.push(
                line.parse::<f64>()
                    .map_err(|_| SignalError::InvalidSeries(format!("line {}: '{line}' is not a number", i + 1)))?,
            );
        }
        let sample_rate = sample_rate.ok_or_else(|| SignalError::InvalidSeries("missing sample_rate_hz".into()))?;
        let ts = Self { sample_rate, samples };
        ts.validate()?;
        Ok(ts)
    }

    /// Magic, sample rate (f64), count (u64), samples (f64); little endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), SignalError> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for v in &self.samples {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, SignalError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(SignalError::InvalidSeries("not a binary time series".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let sample_rate = f64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(SignalError::InvalidSeries(format!("expected {n} samples, found {} bytes", bytes.len())));
        }
        let samples = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let ts = Self { sample_rate, samples };
        ts.validate()?;
        Ok(ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> TimeSeries {
        TimeSeries { sample_rate: 2048.0, samples: vec![0.0, -1.5e-3, 2.25, 1e-300, -0.1] }
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        series().write_csv(&mut buf, Some(&Metadata::new(b"x", Some(1)))).unwrap();
        assert_eq!(TimeSeries::read_csv(buf.as_slice()).unwrap(), series());
    }

    #[test]
    fn binary_round_trip() {
        let mut buf = Vec::new();
        series().write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 5);
        assert_eq!(TimeSeries::read_binary(buf.as_slice()).unwrap(), series());
        buf.truncate(buf.len() - 3);
        assert!(TimeSeries::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn invalid_series() {
        assert!(TimeSeries::read_csv("displacement\n1.0\n".as_bytes()).is_err());
        assert!(TimeSeries::read_csv("# sample_rate_hz=10\ndisplacement\nNaN\n".as_bytes()).is_err());
        assert!(TimeSeries { sample_rate: 0.0, samples: vec![] }.validate().is_err());
    }
}

//! Block-averaged, zero-padded periodogram and peak picking.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::filter::{bandpass, sosfiltfilt};
use super::{SignalError, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdConfig {
    /// Band-pass corners in Hz; `None` skips filtering.
    pub pass_band: Option<[f64; 2]>,
    pub filter_order: usize,
    pub block_seconds: f64,
    /// Fractional overlap between consecutive blocks.
    pub overlap: f64,
    /// Each windowed block is zero-padded to this length before the FFT.
    pub padded_seconds: f64,
    /// Peak search band in Hz.
    pub search_band: [f64; 2],
    /// Peak-to-median ratio below which the peak is flagged as weak.
    pub prominence_threshold: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            pass_band: Some([0.1, 20.0]),
            filter_order: 4,
            block_seconds: 60.0,
            overlap: 0.5,
            padded_seconds: 500.0,
            search_band: [0.2, 3.0],
            prominence_threshold: 10.0,
        }
    }
}

/// One-sided PSD on the grid `k * df`, k = 0..=n_fft/2.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub df: f64,
    pub values: Vec<f64>,
    pub n_blocks: usize,
}

impl Psd {
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    fn band_range(&self, band: [f64; 2]) -> std::ops::RangeInclusive<usize> {
        let lo = (band[0] / self.df).ceil() as usize;
        let hi = ((band[1] / self.df).floor() as usize).min(self.values.len() - 1);
        lo..=hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub frequency_hz: f64,
    /// Peak PSD over the median PSD in the search band.
    pub prominence: f64,
    pub low_prominence: bool,
}

/// Symmetric Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Window-power-corrected one-sided PSD of one block, zero-padded to `n_fft`.
pub fn block_psd(block: &[f64], window: &[f64], sample_rate: f64, n_fft: usize) -> Vec<f64> {
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for (b, (x, w)) in buf.iter_mut().zip(block.iter().zip(window)) {
        b.re = x * w;
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    one_sided(&buf, window, sample_rate)
}

fn one_sided(spectrum: &[Complex<f64>], window: &[f64], sample_rate: f64) -> Vec<f64> {
    let n_fft = spectrum.len();
    let scale = 1.0 / (sample_rate * window.iter().map(|w| w * w).sum::<f64>());
    (0..=n_fft / 2)
        .map(|k| {
            let edge = k == 0 || (n_fft % 2 == 0 && k == n_fft / 2);
            spectrum[k].norm_sqr() * scale * if edge { 1.0 } else { 2.0 }
        })
        .collect()
}

/// Filter, split into overlapping Hann blocks, zero-pad, and average.
pub fn averaged_psd(ts: &TimeSeries, cfg: &PsdConfig) -> Result<Psd, SignalError> {
    ts.validate()?;
    if ts.samples.iter().all(|&v| v == 0.0) {
        return Err(SignalError::AllZero);
    }
    let fs = ts.sample_rate;
    let n_block = (cfg.block_seconds * fs).round() as usize;
    let hop = ((1.0 - cfg.overlap) * n_block as f64).round() as usize;
    let n_fft = ((cfg.padded_seconds * fs).round() as usize).max(n_block);
    if n_block < 2 || hop == 0 || !(0.0..1.0).contains(&cfg.overlap) {
        return Err(SignalError::InvalidConfig(format!("{cfg:?}")));
    }
    let needed = n_block + hop;
    if ts.samples.len() < needed {
        return Err(SignalError::TooShort { needed, got: ts.samples.len() });
    }

    let x = match cfg.pass_band {
        Some([lo, hi]) => sosfiltfilt(&bandpass(cfg.filter_order, lo, hi, fs)?, &ts.samples)?,
        None => ts.samples.clone(),
    };
    let window = hann(n_block);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut acc = vec![0.0; n_fft / 2 + 1];
    let n_blocks = (x.len() - n_block) / hop + 1;
    for b in 0..n_blocks {
        let start = b * hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, (v, w)) in x[start..start + n_block].iter().zip(&window).enumerate() {
            buf[i].re = v * w;
        }
        fft.process(&mut buf);
        for (a, p) in acc.iter_mut().zip(one_sided(&buf, &window, fs)) {
            *a += p;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n_blocks as f64);
    Ok(Psd { df: fs / n_fft as f64, values: acc, n_blocks })
}

/// Frequency of the largest averaged-PSD bin inside the search band.
pub fn estimate_peak_frequency(ts: &TimeSeries, cfg: &PsdConfig) -> Result<PeakEstimate, SignalError> {
    let psd = averaged_psd(ts, cfg)?;
    peak_of(&psd, cfg)
}

pub fn peak_of(psd: &Psd, cfg: &PsdConfig) -> Result<PeakEstimate, SignalError> {
    let range = psd.band_range(cfg.search_band);
    let band = &psd.values[range.clone()];
    if band.is_empty() {
        return Err(SignalError::InvalidConfig(format!("empty search band {:?}", cfg.search_band)));
    }
    let (idx, &peak) =
        band.iter().enumerate().fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(peak > 0.0) {
        return Err(SignalError::AllZero);
    }
    let mut sorted = band.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let prominence = if median > 0.0 { peak / median } else { f64::INFINITY };
    Ok(PeakEstimate {
        frequency_hz: psd.frequency(range.start() + idx),
        prominence,
        low_prominence: prominence < cfg.prominence_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn parseval_per_block() {
        let fs = 100.0;
        let x = noise(6000, 1);
        let w = hann(x.len());
        for n_fft in [x.len(), 4 * x.len()] {
            let p = block_psd(&x, &w, fs, n_fft);
            let power: f64 = p.iter().sum::<f64>() * fs / n_fft as f64;
            let direct: f64 =
                x.iter().zip(&w).map(|(v, w)| (v * w).powi(2)).sum::<f64>() / w.iter().map(|w| w * w).sum::<f64>();
            assert!((power - direct).abs() / direct < 1e-9, "{power} {direct}");
        }
    }

    #[test]
    fn resolution_and_block_count() {
        let fs = 64.0;
        let ts = TimeSeries { sample_rate: fs, samples: noise(64 * 1200, 2) };
        let psd = averaged_psd(&ts, &PsdConfig::default()).unwrap();
        assert!((psd.df - 0.002).abs() < 1e-15);
        assert_eq!(psd.n_blocks, 39);
    }

    #[test]
    fn white_noise_is_flagged() {
        let ts = TimeSeries { sample_rate: 64.0, samples: noise(64 * 1200, 3) };
        let peak = estimate_peak_frequency(&ts, &PsdConfig::default()).unwrap();
        assert!(peak.low_prominence, "{peak:?}");
    }

    #[test]
    fn rejects_short_and_silent_signals() {
        let cfg = PsdConfig::default();
        let short = TimeSeries { sample_rate: 10.0, samples: noise(10 * 80, 4) };
        assert!(matches!(estimate_peak_frequency(&short, &cfg), Err(SignalError::TooShort { .. })));
        let silent = TimeSeries { sample_rate: 10.0, samples: vec![0.0; 10 * 200] };
        assert!(matches!(estimate_peak_frequency(&silent, &cfg), Err(SignalError::AllZero)));
        let ok = TimeSeries { sample_rate: 64.0, samples: noise(64 * 90, 5) };
        assert!(averaged_psd(&ok, &cfg).is_ok());
    }
}

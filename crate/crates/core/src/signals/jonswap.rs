//! JONSWAP wave spectrum and a wave-excited single-mode response generator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{SignalError, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonswapConfig {
    pub alpha: f64,
    /// Peak frequency in Hz.
    pub omega_p: f64,
    pub gamma_peak: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub g: f64,
    /// Truncation band in Hz; the density is zero outside it.
    pub band: [f64; 2],
}

impl Default for JonswapConfig {
    fn default() -> Self {
        Self { alpha: 0.0081, omega_p: 0.7, gamma_peak: 2.0, sigma_a: 0.07, sigma_b: 0.09, g: 9.81, band: [0.2, 3.0] }
    }
}

impl JonswapConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        let pos = [self.alpha, self.omega_p, self.gamma_peak, self.sigma_a, self.sigma_b, self.g, self.band[0]]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if pos && self.band[0] < self.omega_p && self.omega_p < self.band[1] {
            Ok(())
        } else {
            Err(SignalError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn peak_rad(&self) -> f64 {
        2.0 * PI * self.omega_p
    }
}

/// Spectral density at angular frequency `omega` (rad/s).
pub fn jonswap_density(cfg: &JonswapConfig, omega: f64) -> Result<f64, SignalError> {
    if !(omega > 0.0) {
        return Err(SignalError::NonPositiveFrequency(omega));
    }
    let f = omega / (2.0 * PI);
    if f < cfg.band[0] || f > cfg.band[1] {
        return Ok(0.0);
    }
    let wp = cfg.peak_rad();
    let sigma = if omega <= wp { cfg.sigma_a } else { cfg.sigma_b };
    let r = (-(omega - wp).powi(2) / (2.0 * sigma * sigma * wp * wp)).exp();
    Ok(cfg.alpha * cfg.g * cfg.g / omega.powi(5) * (-1.25 * (wp / omega).powi(4)).exp() * cfg.gamma_peak.powf(r))
}

/// Displacement of a single-mode resonator driven by a random-phase JONSWAP
/// sea. Components sit on the `1/duration` frequency grid with amplitudes
/// `sqrt(2 S(w) dw)`; the resonator gain is normalised to 1 at zero frequency.
pub fn synthesize_response(
    cfg: &JonswapConfig,
    modal_freq: f64,
    damping_ratio: f64,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<TimeSeries, SignalError> {
    cfg.validate()?;
    if !(sample_rate > 0.0 && duration > 0.0 && damping_ratio >= 0.0) {
        return Err(SignalError::InvalidConfig(format!(
            "duration {duration}, sample rate {sample_rate}, damping {damping_ratio}"
        )));
    }
    if !(modal_freq > 0.0 && modal_freq < 0.5 * sample_rate) {
        return Err(SignalError::AboveNyquist { freq: modal_freq, nyquist: 0.5 * sample_rate });
    }
    let n = (duration * sample_rate).round() as usize;
    if n < 2 {
        return Err(SignalError::TooShort { needed: 2, got: n });
    }
    let df = sample_rate / n as f64;
    let dw = 2.0 * PI * df;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for j in 1..n.div_ceil(2) {
        let phase = rng.random::<f64>() * 2.0 * PI;
        let f = j as f64 * df;
        if f < cfg.band[0] || f > cfg.band[1] {
            continue;
        }
        let w = 2.0 * PI * f;
        let amp = (2.0 * jonswap_density(cfg, w)? * dw).sqrt();
        let r = f / modal_freq;
        let h = Complex::new(1.0 - r * r, 2.0 * damping_ratio * r).inv();
        let x = 0.5 * amp * h * Complex::from_polar(1.0, phase);
        spec[j] = x;
        spec[n - j] = x.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    Ok(TimeSeries { sample_rate, samples: spec.into_iter().map(|c| c.re).collect() })
}

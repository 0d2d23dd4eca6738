//! Butterworth band-pass as cascaded biquads, applied forward and backward.

use std::f64::consts::PI;

use super::SignalError;

/// One second-order section `[b0, b1, b2, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state for a unit step already in steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + z[0];
            z[0] = b1 * *v - a1 * y + z[1];
            z[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    LowPass,
    HighPass,
}

/// Even-order digital Butterworth by the bilinear transform with prewarping.
pub fn butterworth(order: usize, cutoff: f64, sample_rate: f64, kind: Kind) -> Result<Vec<Biquad>, SignalError> {
    if order == 0 || order % 2 != 0 {
        return Err(SignalError::InvalidConfig(format!("filter order {order} must be even and positive")));
    }
    if !(cutoff > 0.0 && cutoff < 0.5 * sample_rate) {
        return Err(SignalError::AboveNyquist { freq: cutoff, nyquist: 0.5 * sample_rate });
    }
    let k = (PI * cutoff / sample_rate).tan();
    let k2 = k * k;
    Ok((0..order / 2)
        .map(|i| {
            // Quality factor of the i-th conjugate pole pair.
            let q = 1.0 / (2.0 * ((2 * i + 1) as f64 * PI / (2 * order) as f64).cos());
            let norm = 1.0 / (1.0 + k / q + k2);
            let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm];
            let b = match kind {
                Kind::LowPass => [k2 * norm, 2.0 * k2 * norm, k2 * norm],
                Kind::HighPass => [norm, -2.0 * norm, norm],
            };
            Biquad { b, a }
        })
        .collect())
}

/// High-pass at `lo` cascaded with low-pass at `hi`, each of `order`.
pub fn bandpass(order: usize, lo: f64, hi: f64, sample_rate: f64) -> Result<Vec<Biquad>, SignalError> {
    if !(lo < hi) {
        return Err(SignalError::InvalidConfig(format!("pass band [{lo}, {hi}]")));
    }
    let mut sos = butterworth(order, lo, sample_rate, Kind::HighPass)?;
    sos.extend(butterworth(order, hi, sample_rate, Kind::LowPass)?);
    Ok(sos)
}

/// Single pass with initial state matched to a constant input at `x[0]`.
pub fn sosfilt_steady(sos: &[Biquad], x: &mut [f64]) {
    let Some(&x0) = x.first() else { return };
    let mut level = x0;
    for s in sos {
        let z = s.step_state().map(|v| v * level);
        level *= s.dc_gain();
        s.run(x, z);
    }
}

/// Zero-phase filtering with odd-reflection padding at both ends.
pub fn sosfiltfilt(sos: &[Biquad], x: &[f64]) -> Result<Vec<f64>, SignalError> {
    let pad = 3 * (2 * sos.len() + 1);
    if x.len() <= pad {
        return Err(SignalError::TooShort { needed: pad + 1, got: x.len() });
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    sosfilt_steady(sos, &mut ext);
    ext.reverse();
    sosfilt_steady(sos, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

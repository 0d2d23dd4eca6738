//! Polynomial surrogate of the first bending frequency as a function of
//! foundation stiffness per unit length, and FE stiffness tuning.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{self, FemError, FoundationModel, StructureTemplate};

pub const DEFAULT_DEGREE: usize = 5;
pub const DEFAULT_TRAINING_POINTS: usize = 30;
/// Stiffness domains (N/m^2) of the built-in templates.
pub const NREL_DOMAIN: (f64, f64) = (1.5e6, 8e6);
pub const WAVETANK_DOMAIN: (f64, f64) = (3e5, 1.6e6);
const MONOTONE_GRID: usize = 1000;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("need at least {need} distinct stiffness values, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-finite sample ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("least-squares system is rank deficient")]
    RankDeficient,
    #[error("fitted polynomial is not strictly increasing near s = {0:e}")]
    NonMonotone(f64),
    #[error("stiffness {s:e} outside surrogate domain [{lo:e}, {hi:e}]")]
    OutOfDomain { s: f64, lo: f64, hi: f64 },
    #[error("target {target} Hz not bracketed by [{f_lo}, {f_hi}] Hz")]
    NotBracketed { target: f64, f_lo: f64, f_hi: f64 },
    #[error("invalid bracket [{0:e}, {1:e}]")]
    InvalidBracket(f64, f64),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Something that maps stiffness per length to a first natural frequency.
pub trait FrequencyModel {
    fn frequency(&self, stiffness: f64) -> Result<f64, SurrogateError>;
    /// Stiffness interval on which the model is valid.
    fn domain(&self) -> (f64, f64);
}

/// Affine map from stiffness onto [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub center: f64,
    pub half_width: f64,
}

impl Scaling {
    pub fn from_domain(lo: f64, hi: f64) -> Self {
        Self { center: 0.5 * (lo + hi), half_width: 0.5 * (hi - lo) }
    }

    pub fn forward(&self, s: f64) -> f64 {
        (s - self.center) / self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    /// Ascending-order coefficients in the normalised input.
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    pub scaling: Scaling,
    /// Largest absolute training residual, Hz.
    pub max_abs_residual: f64,
    /// Largest relative training residual.
    pub max_rel_residual: f64,
}

impl Surrogate {
    /// Least-squares polynomial of `degree` through `(stiffness, frequency)` samples.
    pub fn fit(samples: &[(f64, f64)], degree: usize) -> Result<Self, SurrogateError> {
        if let Some(&(s, f)) = samples.iter().find(|(s, f)| !s.is_finite() || !f.is_finite()) {
            return Err(SurrogateError::NonFinite(s, f));
        }
        let mut distinct: Vec<f64> = samples.iter().map(|p| p.0).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < degree + 1 {
            return Err(SurrogateError::TooFewPoints { need: degree + 1, got: distinct.len() });
        }
        let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
        let scaling = Scaling::from_domain(lo, hi);

        let n = samples.len();
        let vander = DMatrix::from_fn(n, degree + 1, |r, c| scaling.forward(samples[r].0).powi(c as i32));
        let rhs = DVector::from_iterator(n, samples.iter().map(|p| p.1));
        let qr = vander.qr();
        let r = qr.r();
        let rmax = r.diagonal().amax();
        if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * rmax) {
            return Err(SurrogateError::RankDeficient);
        }
        let qtb = qr.q().transpose() * rhs;
        let coef = r.solve_upper_triangular(&qtb).ok_or(SurrogateError::RankDeficient)?;

        let mut out = Self {
            coefficients: coef.iter().copied().collect(),
            domain: [lo, hi],
            scaling,
            max_abs_residual: 0.0,
            max_rel_residual: 0.0,
        };
        for &(s, f) in samples {
            let e = (out.poly(scaling.forward(s)) - f).abs();
            out.max_abs_residual = out.max_abs_residual.max(e);
            out.max_rel_residual = out.max_rel_residual.max(e / f.abs());
        }
        out.check_monotone()?;
        Ok(out)
    }

    fn check_monotone(&self) -> Result<(), SurrogateError> {
        for i in 0..=MONOTONE_GRID {
            let x = -1.0 + 2.0 * i as f64 / MONOTONE_GRID as f64;
            if self.poly_derivative(x) <= 0.0 {
                return Err(SurrogateError::NonMonotone(self.scaling.center + x * self.scaling.half_width));
            }
        }
        Ok(())
    }

    fn poly(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn poly_derivative(&self, x: f64) -> f64 {
        self.coefficients.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c)
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.domain[0] && s <= self.domain[1]
    }

    fn check(&self, s: f64) -> Result<f64, SurrogateError> {
        if self.contains(s) {
            Ok(self.scaling.forward(s))
        } else {
            Err(SurrogateError::OutOfDomain { s, lo: self.domain[0], hi: self.domain[1] })
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64, SurrogateError> {
        self.check(s).map(|x| self.poly(x))
    }

    /// df/ds in Hz per (N/m^2).
    pub fn eval_grad(&self, s: f64) -> Result<f64, SurrogateError> {
        self.check(s).map(|x| self.poly_derivative(x) / self.scaling.half_width)
    }

    /// Value and slope, or `None` outside the domain.
    pub fn value_and_slope(&self, s: f64) -> Option<(f64, f64)> {
        if !self.contains(s) {
            return None;
        }
        let x = self.scaling.forward(s);
        Some((self.poly(x), self.poly_derivative(x) / self.scaling.half_width))
    }

    /// Stiffness whose surrogate frequency is `freq`, clamped to the domain.
    pub fn invert(&self, freq: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        if freq <= self.poly(lo) {
            return self.domain[0];
        }
        if freq >= self.poly(hi) {
            return self.domain[1];
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.poly(mid) < freq {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (self.scaling.center + 0.5 * (lo + hi) * self.scaling.half_width).clamp(self.domain[0], self.domain[1])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surrogate serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl FrequencyModel for Surrogate {
    fn frequency(&self, stiffness: f64) -> Result<f64, SurrogateError> {
        self.eval(stiffness)
    }

    fn domain(&self) -> (f64, f64) {
        (self.domain[0], self.domain[1])
    }
}

/// Full FE evaluation at a given stiffness.
#[derive(Debug, Clone)]
pub struct FeModel {
    pub template: StructureTemplate,
    /// Foundation settings; `stiffness_per_length` is overwritten per call.
    pub foundation: FoundationModel,
    pub n_elements: usize,
    pub water_density: f64,
    pub domain: (f64, f64),
}

impl FeModel {
    pub fn new(template: StructureTemplate, domain: (f64, f64)) -> Self {
        let water_density = fem::default_water_density(&template);
        Self {
            template,
            foundation: FoundationModel::winkler(0.0, 0.0),
            n_elements: fem::DEFAULT_ELEMENTS,
            water_density,
            domain,
        }
    }

    pub fn fe_frequency(&self, stiffness: f64) -> Result<f64, FemError> {
        let f = FoundationModel { stiffness_per_length: stiffness, ..self.foundation };
        fem::first_frequency(&self.template, &f, self.n_elements, self.water_density)
    }

    /// Log-uniform stiffness grid over the domain.
    pub fn training_grid(&self, n: usize) -> Vec<f64> {
        log_grid(self.domain.0, self.domain.1, n)
    }

    pub fn samples(&self, stiffness: &[f64]) -> Result<Vec<(f64, f64)>, FemError> {
        stiffness.iter().map(|&s| Ok((s, self.fe_frequency(s)?))).collect()
    }

    /// Fit a surrogate on `n_points` log-uniform FE samples.
    pub fn fit_surrogate(&self, n_points: usize, degree: usize) -> Result<Surrogate, SurrogateError> {
        let samples = self.samples(&self.training_grid(n_points))?;
        Surrogate::fit(&samples, degree)
    }

    /// Largest relative surrogate error on `n` linearly spaced hold-out stiffnesses.
    pub fn holdout_error(&self, surrogate: &Surrogate, n: usize) -> Result<f64, SurrogateError> {
        let (lo, hi) = (surrogate.domain[0], surrogate.domain[1]);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            // Offset by half a step so no point coincides with the log-uniform training grid ends.
            let s = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            let fe = self.fe_frequency(s)?;
            worst = worst.max((surrogate.eval(s)? - fe).abs() / fe);
        }
        Ok(worst)
    }
}

impl FrequencyModel for FeModel {
    fn frequency(&self, stiffness: f64) -> Result<f64, SurrogateError> {
        if stiffness < self.domain.0 || stiffness > self.domain.1 {
            return Err(SurrogateError::OutOfDomain { s: stiffness, lo: self.domain.0, hi: self.domain.1 });
        }
        Ok(self.fe_frequency(stiffness)?)
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    _ if i == n - 1 => hi,
                    _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TuneOptions {
    pub tolerance_hz: f64,
    pub max_iter: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self { tolerance_hz: 1e-6, max_iter: 200 }
    }
}

/// Bisect the foundation stiffness until the FE first frequency is within
/// `opts.tolerance_hz` of `target`.
pub fn tune_stiffness(
    model: &FeModel,
    target: f64,
    bracket: (f64, f64),
    opts: TuneOptions,
) -> Result<f64, SurrogateError> {
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(SurrogateError::InvalidBracket(lo, hi));
    }
    let f_lo = model.fe_frequency(lo)?;
    if (f_lo - target).abs() < opts.tolerance_hz {
        return Ok(lo);
    }
    let f_hi = model.fe_frequency(hi)?;
    if (f_hi - target).abs() < opts.tolerance_hz {
        return Ok(hi);
    }
    if !(f_lo < target && target < f_hi) {
        return Err(SurrogateError::NotBracketed { target, f_lo, f_hi });
    }
    let geometric = lo > 0.0;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..opts.max_iter {
        mid = if geometric { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let f = model.fe_frequency(mid)?;
        if (f - target).abs() < opts.tolerance_hz {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quintic() -> Vec<f64> {
        vec![1.0, 0.3, -0.02, 0.01, -0.004, 0.001]
    }

    fn from_coef(c: &[f64], lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        let sc = Scaling::from_domain(lo, hi);
        (0..n)
            .map(|i| {
                let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let x = sc.forward(s);
                (s, c.iter().rev().fold(0.0, |a, &k| a * x + k))
            })
            .collect()
    }

    #[test]
    fn recovers_exact_quintic() {
        let c = quintic();
        let sur = Surrogate::fit(&from_coef(&c, 1e6, 8e6, 30), 5).unwrap();
        for (a, b) in sur.coefficients.iter().zip(&c) {
            assert!((a - b).abs() <= 1e-10 * b.abs(), "{a} vs {b}");
        }
        assert!(sur.max_abs_residual < 1e-12);
    }

    #[test]
    fn constant_samples_rejected() {
        let samples: Vec<_> = (0..10).map(|i| (1e6 + i as f64 * 1e5, 0.3)).collect();
        let err = Surrogate::fit(&samples, 5).unwrap_err();
        assert!(matches!(err, SurrogateError::NonMonotone(_) | SurrogateError::RankDeficient), "{err:?}");
    }

    #[test]
    fn too_few_or_non_finite_points() {
        let s: Vec<_> = (0..5).map(|i| (i as f64, i as f64)).collect();
        assert!(matches!(Surrogate::fit(&s, 5), Err(SurrogateError::TooFewPoints { .. })));
        let dup: Vec<_> = (0..12).map(|i| ((i % 3) as f64, i as f64)).collect();
        assert!(matches!(Surrogate::fit(&dup, 5), Err(SurrogateError::TooFewPoints { .. })));
        let mut bad = from_coef(&quintic(), 1.0, 2.0, 10);
        bad[3].1 = f64::NAN;
        assert!(matches!(Surrogate::fit(&bad, 5), Err(SurrogateError::NonFinite(..))));
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let sur = Surrogate::fit(&from_coef(&quintic(), 1e6, 8e6, 30), 5).unwrap();
        assert!(matches!(sur.eval(9e6), Err(SurrogateError::OutOfDomain { .. })));
        assert!(sur.eval_grad(0.5e6).is_err());
        assert!(sur.value_and_slope(8.0001e6).is_none());
        assert!(sur.eval(8e6).is_ok() && sur.eval(1e6).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let sur = Surrogate::fit(&from_coef(&quintic(), 1e6, 8e6, 30), 5).unwrap();
        assert_eq!(Surrogate::from_json(&sur.to_json()).unwrap(), sur);
    }

    #[test]
    fn log_grid_endpoints_exact() {
        let g = log_grid(1.5e6, 8e6, 30);
        assert_eq!(g.len(), 30);
        assert_eq!(g[0], 1.5e6);
        assert_eq!(g[29], 8e6);
        assert!(g.windows(2).all(|w| w[1] / w[0] > 1.0));
    }

    proptest! {
        #[test]
        fn gradient_matches_central_difference(x in -0.95f64..0.95) {
            let sur = Surrogate::fit(&from_coef(&quintic(), 1e6, 8e6, 30), 5).unwrap();
            let s = sur.scaling.center + x * sur.scaling.half_width;
            let h = 1e-3 * sur.scaling.half_width;
            let fd = (sur.eval(s + h).unwrap() - sur.eval(s - h).unwrap()) / (2.0 * h);
            let g = sur.eval_grad(s).unwrap();
            prop_assert!((g - fd).abs() <= 1e-6 * g.abs());
        }

        #[test]
        fn invert_round_trips(x in -1.0f64..1.0) {
            let sur = Surrogate::fit(&from_coef(&quintic(), 1e6, 8e6, 30), 5).unwrap();
            let s = sur.scaling.center + x * sur.scaling.half_width;
            let back = sur.invert(sur.eval(s).unwrap());
            prop_assert!((back - s).abs() < 1e-6 * sur.scaling.half_width);
        }
    }
}

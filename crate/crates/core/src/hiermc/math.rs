//! Log densities with hand-written gradients.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ln of the upper tail Q(x) = P(Z > x) of a standard normal.
pub fn ln_upper_tail(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < 35.0 {
        (0.5 * erfc(x / std::f64::consts::SQRT_2)).ln()
    } else {
        let r = 1.0 / (x * x);
        -0.5 * x * x - x.ln() - LN_SQRT_2PI + (1.0 - r + 3.0 * r * r - 15.0 * r * r * r).ln()
    }
}

/// ln of the standard normal density.
pub fn ln_std_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

fn ln_diff_exp(a: f64, b: f64) -> f64 {
    // ln(e^a - e^b) for a >= b
    a + (-(b - a).exp()).ln_1p()
}

/// ln P(a < Z < b) and its partial derivatives with respect to `a` and `b`.
pub fn ln_interval(a: f64, b: f64) -> (f64, f64, f64) {
    let ln_z = if a >= 0.0 {
        ln_diff_exp(ln_upper_tail(a), ln_upper_tail(b))
    } else if b <= 0.0 {
        ln_diff_exp(ln_upper_tail(-b), ln_upper_tail(-a))
    } else {
        (-(ln_upper_tail(-a).exp()) - ln_upper_tail(b).exp()).ln_1p()
    };
    let ratio = |x: f64| if x.is_finite() { (ln_std_pdf(x) - ln_z).exp() } else { 0.0 };
    (ln_z, -ratio(a), ratio(b))
}

/// Gradient of a scalar log density with respect to (x, mean, variance).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Partials {
    pub value: f64,
    pub d_x: f64,
    pub d_mean: f64,
    pub d_var: f64,
}

/// Normal(mean, var) log density, `var` being the variance.
pub fn normal_lpdf(x: f64, mean: f64, var: f64) -> Partials {
    let r = x - mean;
    Partials {
        value: -0.5 * r * r / var - 0.5 * var.ln() - LN_SQRT_2PI,
        d_x: -r / var,
        d_mean: r / var,
        d_var: 0.5 * r * r / (var * var) - 0.5 / var,
    }
}

/// Normal(mean, var) truncated to [lo, hi], normalising constant included.
/// Either bound may be infinite.
pub fn truncated_normal_lpdf(x: f64, mean: f64, var: f64, lo: f64, hi: f64) -> Partials {
    if !(x >= lo && x <= hi) {
        return Partials { value: f64::NEG_INFINITY, ..Default::default() };
    }
    let mut p = normal_lpdf(x, mean, var);
    let sd = var.sqrt();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let (ln_z, da, db) = ln_interval(a, b);
    // da/dmean = db/dmean = -1/sd; da/dvar = -a/(2 var).
    let a_term = if a.is_finite() { da * a } else { 0.0 };
    let b_term = if b.is_finite() { db * b } else { 0.0 };
    p.value -= ln_z;
    p.d_mean += (da + db) / sd;
    p.d_var += (a_term + b_term) / (2.0 * var);
    p
}

/// Gamma(shape, rate) log density and its derivative in x.
pub fn gamma_lpdf(x: f64, shape: f64, rate: f64) -> (f64, f64) {
    let v = (shape - 1.0) * x.ln() - rate * x + shape * rate.ln() - ln_gamma(shape);
    (v, (shape - 1.0) / x - rate)
}

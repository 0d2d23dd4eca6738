//! Two-node Timoshenko beam element in a single bending plane.
//!
//! DOF order per element is `[v1, theta1, v2, theta2]`. Stiffness and
//! consistent mass use the interdependent interpolation (shear-locking free)
//! shape functions; with `phi = 0` they reduce to the Euler-Bernoulli forms.

use nalgebra::Matrix4;

/// Sectional properties entering one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementProps {
    /// Bending rigidity EI.
    pub bending_rigidity: f64,
    /// Effective shear rigidity kappa * G * A. `f64::INFINITY` gives a
    /// shear-rigid (Rayleigh) element.
    pub shear_rigidity: f64,
    /// Translating mass per unit length (structure plus any added mass).
    pub mass_per_length: f64,
    /// Rotary inertia per unit length, rho * I.
    pub rotary_inertia: f64,
}

fn shear_parameter(p: &ElementProps, length: f64) -> f64 {
    if p.shear_rigidity.is_infinite() {
        0.0
    } else {
        12.0 * p.bending_rigidity / (p.shear_rigidity * length * length)
    }
}

#[rustfmt::skip]
pub fn stiffness(p: &ElementProps, l: f64) -> Matrix4<f64> {
    let phi = shear_parameter(p, l);
    let c = p.bending_rigidity / ((1.0 + phi) * l * l * l);
    let l2 = l * l;
    c * Matrix4::new(
        12.0, 6.0 * l, -12.0, 6.0 * l,
        6.0 * l, (4.0 + phi) * l2, -6.0 * l, (2.0 - phi) * l2,
        -12.0, -6.0 * l, 12.0, -6.0 * l,
        6.0 * l, (2.0 - phi) * l2, -6.0 * l, (4.0 + phi) * l2,
    )
}

#[rustfmt::skip]
pub fn mass(p: &ElementProps, l: f64) -> Matrix4<f64> {
    let phi = shear_parameter(p, l);
    let q = phi * phi;
    let l2 = l * l;
    let d = (1.0 + phi) * (1.0 + phi);

    let ft = p.mass_per_length * l / (210.0 * d);
    let m11 = 70.0 * q + 147.0 * phi + 78.0;
    let m12 = (35.0 * q + 77.0 * phi + 44.0) * l / 4.0;
    let m13 = 35.0 * q + 63.0 * phi + 27.0;
    let m14 = -(35.0 * q + 63.0 * phi + 26.0) * l / 4.0;
    let m22 = (7.0 * q + 14.0 * phi + 8.0) * l2 / 4.0;
    let m24 = -(7.0 * q + 14.0 * phi + 6.0) * l2 / 4.0;
    let translational = ft * Matrix4::new(
        m11, m12, m13, m14,
        m12, m22, -m14, m24,
        m13, -m14, m11, -m12,
        m14, m24, -m12, m22,
    );

    let fr = p.rotary_inertia / (30.0 * d * l);
    let a = (3.0 - 15.0 * phi) * l;
    let b = (10.0 * q + 5.0 * phi + 4.0) * l2;
    let e = (5.0 * q - 5.0 * phi - 1.0) * l2;
    let rotary = fr * Matrix4::new(
        36.0, a, -36.0, a,
        a, b, -a, e,
        -36.0, -a, 36.0, -a,
        a, e, -a, b,
    );

    translational + rotary
}

/// Winkler foundation of stiffness `k` per unit length integrated with the
/// cubic Hermite shape functions.
#[rustfmt::skip]
pub fn foundation(k: f64, l: f64) -> Matrix4<f64> {
    let l2 = l * l;
    (k * l / 420.0) * Matrix4::new(
        156.0, 22.0 * l, 54.0, -13.0 * l,
        22.0 * l, 4.0 * l2, 13.0 * l, -3.0 * l2,
        54.0, 13.0 * l, 156.0, -22.0 * l,
        -13.0 * l, -3.0 * l2, -22.0 * l, 4.0 * l2,
    )
}

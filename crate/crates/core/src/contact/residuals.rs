//! Closed-form contact conditions between isotropic circles and a graph.

use crate::jets::Jet4;

/// Height and inclination `(z, a, b)` of the osculating conic in direction
/// `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Osculation {
    pub z: f64,
    pub a: f64,
    pub b: f64,
}

pub fn osculation_coeffs(_x: f64, _y: f64, j: &Jet4, u: f64, v: f64) -> Osculation {
    Osculation {
        z: j.f,
        a: j.fx * v - j.fy * u,
        b: j.fx * u + j.fy * v + j.fxx * v * v - 2.0 * j.fxy * u * v + j.fyy * u * u,
    }
}

/// `x² + y² + 1 + 2xu + 2yv`.
pub fn circle_term(x: f64, y: f64, u: f64, v: f64) -> f64 {
    x * x + y * y + 1.0 + 2.0 * x * u + 2.0 * y * v
}

/// Opening-angle condition on the top-view circle.
pub fn theta_residual(x: f64, y: f64, u: f64, v: f64, theta: f64) -> f64 {
    let a = circle_term(x, y, u, v);
    let t = theta.tan();
    a * a - 4.0 * t * t * (u * u + v * v)
}

/// Sum of the magnitudes of the terms of [`theta_residual`].
pub fn theta_scale(x: f64, y: f64, u: f64, v: f64, theta: f64) -> f64 {
    let a = circle_term(x, y, u, v);
    let t = theta.tan();
    a * a + 4.0 * t * t * (u * u + v * v)
}

/// Gradient of [`theta_residual`] in `(u, v)`.
pub fn theta_gradient(x: f64, y: f64, u: f64, v: f64, theta: f64) -> (f64, f64) {
    let a = circle_term(x, y, u, v);
    let t2 = theta.tan().powi(2);
    (4.0 * x * a - 8.0 * t2 * u, 4.0 * y * a - 8.0 * t2 * v)
}

/// Hyperosculation (contact order 3) cubic.
pub fn hyper_residual(j: &Jet4, u: f64, v: f64) -> f64 {
    hyper_terms(j, u, v).iter().sum()
}

fn hyper_terms(j: &Jet4, u: f64, v: f64) -> [f64; 6] {
    [
        j.fxxx * v * v * v,
        -3.0 * j.fxxy * v * v * u,
        3.0 * j.fxyy * v * u * u,
        -j.fyyy * u * u * u,
        3.0 * (j.fxx - j.fyy) * u * v,
        3.0 * j.fxy * (v * v - u * u),
    ]
}

/// Sum of the magnitudes of the terms of [`hyper_residual`].
pub fn hyper_scale(j: &Jet4, u: f64, v: f64) -> f64 {
    hyper_terms(j, u, v).iter().map(|t| t.abs()).sum()
}

pub fn hyper_gradient(j: &Jet4, u: f64, v: f64) -> (f64, f64) {
    let du = -3.0 * j.fxxy * v * v + 6.0 * j.fxyy * u * v - 3.0 * j.fyyy * u * u
        + 3.0 * (j.fxx - j.fyy) * v
        - 6.0 * j.fxy * u;
    let dv = 3.0 * j.fxxx * v * v - 6.0 * j.fxxy * u * v + 3.0 * j.fxyy * u * u
        + 3.0 * (j.fxx - j.fyy) * u
        + 6.0 * j.fxy * v;
    (du, dv)
}

/// Contact order 4 quartic.
pub fn order4_residual(j: &Jet4, u: f64, v: f64) -> f64 {
    let (u2, v2) = (u * u, v * v);
    j.fxxxx * v2 * v2 - 4.0 * j.fxxxy * v2 * v * u + 6.0 * j.fxxyy * v2 * u2
        - 4.0 * j.fxyyy * v * u2 * u
        + j.fyyyy * u2 * u2
        + 6.0 * u * v2 * j.fxxx
        + 6.0 * v * (v2 - 2.0 * u2) * j.fxxy
        + 6.0 * u * (u2 - 2.0 * v2) * j.fxyy
        + 6.0 * u2 * v * j.fyyy
        + 3.0 * (u2 - v2) * (j.fxx - j.fyy)
        + 12.0 * u * v * j.fxy
}

/// One twelfth of the Jacobian determinant of the order-3 system
/// (θ-condition, hyperosculation cubic) in `(u, v)`. It vanishes exactly at
/// multiple common roots.
pub fn multiplicity_jacobian(x: f64, y: f64, j: &Jet4, u: f64, v: f64, theta: f64) -> f64 {
    let a = circle_term(x, y, u, v);
    let t2 = theta.tan().powi(2);
    let ut = x * a - 2.0 * u * t2;
    let vt = y * a - 2.0 * v * t2;
    j.fxxx * v * v * ut
        + j.fxxy * v * (v * vt - 2.0 * u * ut)
        + j.fxyy * u * (u * ut - 2.0 * v * vt)
        + j.fyyy * u * u * vt
        + (j.fxx - j.fyy) * (u * ut - v * vt)
        + 2.0 * j.fxy * (u * vt + v * ut)
}

//! Contact conditions between isotropic circles (images of cones) and the
//! isotropic graph of a surface, and their solution.

pub mod oracle;
pub mod residuals;
pub mod solve;

use serde::{Deserialize, Serialize};

pub use oracle::oracle_solve;
pub use residuals::{
    hyper_residual, multiplicity_jacobian, order4_residual, osculation_coeffs, theta_residual,
    Osculation,
};
pub use solve::{
    direction_to_uv, hyper_polynomial, newton_polish, scaled_residuals, solve_hyperosculating,
    solve_hyperosculating_with,
    HyperRoot, SolveConfig, SolveReport,
};

use crate::jets::Jet4;

/// An isotropic circle through `(x, y, z)` whose top view is centered at
/// `(x + u, y + v)`, lying in the plane selected by `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicCandidate {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl ConicCandidate {
    /// The conic through the jet's base point osculating the graph in
    /// direction `(u, v)`.
    pub fn osculating(j: &Jet4, u: f64, v: f64, theta: f64) -> Self {
        let o = osculation_coeffs(j.x, j.y, j, u, v);
        ConicCandidate {
            x: j.x,
            y: j.y,
            z: o.z,
            u,
            v,
            a: o.a,
            b: o.b,
            theta,
        }
    }

    pub fn point_at(&self, t: f64) -> (f64, f64, f64) {
        let (s, c) = t.sin_cos();
        (
            self.x + self.v * s + self.u * (1.0 - c),
            self.y - self.u * s + self.v * (1.0 - c),
            self.z + self.a * s + self.b * (1.0 - c),
        )
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.u, self.y + self.v)
    }

    pub fn radius(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn theta_residual(&self) -> f64 {
        theta_residual(self.x, self.y, self.u, self.v, self.theta)
    }

    /// The same conic with its parameter origin moved to `t0`.
    pub fn reparametrized(&self, t0: f64) -> Self {
        let (x, y, z) = self.point_at(t0);
        let (cx, cy) = self.center();
        let (u, v) = (cx - x, cy - y);
        // z is affine in the top view: z = z0 + α (X - x0) + β (Y - y0)
        let r2 = self.u * self.u + self.v * self.v;
        let alpha = (self.a * self.v + self.b * self.u) / r2;
        let beta = (self.b * self.v - self.a * self.u) / r2;
        ConicCandidate {
            x,
            y,
            z,
            u,
            v,
            a: alpha * v - beta * u,
            b: alpha * u + beta * v,
            theta: self.theta,
        }
    }
}

/// Result of [`contact_order_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "slope")]
pub enum ContactOrder {
    /// The gap stayed below 1e-12 at every probe.
    Contained,
    /// Fitted slope of `log|gap|` against `log|t|`.
    Slope(f64),
}

impl ContactOrder {
    pub fn slope(&self) -> Option<f64> {
        match self {
            ContactOrder::Contained => None,
            ContactOrder::Slope(s) => Some(*s),
        }
    }
}

/// Estimates how fast the conic leaves the graph near `t = 0`.
pub fn contact_order_estimate(c: &ConicCandidate, f_eval: impl Fn(f64, f64) -> f64) -> ContactOrder {
    const PROBES: usize = 12;
    let mut pts = Vec::with_capacity(PROBES);
    let mut contained = true;
    // one decade of arc lengths below 0.03, so large conics are probed
    // locally too
    let scale = c.radius().max(1.0);
    for k in 0..PROBES {
        let t = 10f64.powf(-2.5 + k as f64 / (PROBES - 1) as f64) / scale;
        let (x, y, z) = c.point_at(t);
        let gap = (z - f_eval(x, y)).abs();
        if gap >= 1e-12 {
            contained = false;
        }
        // gaps at rounding level carry no slope
        if gap > 1e-14 {
            pts.push((t.ln(), gap.ln()));
        }
    }
    if contained || pts.len() < 2 {
        return ContactOrder::Contained;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    ContactOrder::Slope(sxy / sxx)
}

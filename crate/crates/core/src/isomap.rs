//! The isotropic model: oriented planes as points, oriented surfaces as graphs.
//!
//! An oriented plane `n·p + h = 0` maps to `(n1, n2, h) / (n3 + 1)`. The top
//! view of that point is the stereographic image of the normal.

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::Jet4;

/// Half-width of the excluded zone around the normal (0, 0, -1).
pub const SOUTH_POLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IsoError {
    #[error("normal {n3} is within the excluded zone around (0, 0, -1)")]
    NormalAtSouthPole { n3: f64 },
    #[error("mean normal has length {norm:e}; no alignment exists")]
    DegenerateMeanNormal { norm: f64 },
    #[error("normal has length {norm}, expected 1")]
    NonUnitNormal { norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedPlane {
    pub n: Vector3<f64>,
    pub h: f64,
}

impl OrientedPlane {
    pub fn new(n: Vector3<f64>, h: f64) -> Result<Self, IsoError> {
        let norm = n.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(IsoError::NonUnitNormal { norm });
        }
        Ok(OrientedPlane { n, h })
    }

    /// Plane through `p` with normal direction `n` (normalized here).
    pub fn through(p: &Vector3<f64>, n: &Vector3<f64>) -> Self {
        let n = n.normalize();
        OrientedPlane { n, h: -n.dot(p) }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.n.dot(p) + self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub r: Vector3<f64>,
    pub n: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicSample {
    pub x: f64,
    pub y: f64,
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
}

/// `z = c2 (x² + y²) + l1 x + l2 y + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParaboloidCoeffs {
    pub c2: f64,
    pub l1: f64,
    pub l2: f64,
    pub c0: f64,
}

impl ParaboloidCoeffs {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.c2 * (x * x + y * y) + self.l1 * x + self.l2 * y + self.c0
    }

    pub fn is_plane(&self) -> bool {
        self.c2 == 0.0
    }

    /// Exact 4-jet of the paraboloid at `(x, y)`.
    pub fn jet(&self, x: f64, y: f64) -> Jet4 {
        Jet4 {
            x,
            y,
            f: self.eval(x, y),
            fx: 2.0 * self.c2 * x + self.l1,
            fy: 2.0 * self.c2 * y + self.l2,
            fxx: 2.0 * self.c2,
            fyy: 2.0 * self.c2,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Normals point toward the sphere center.
    #[default]
    Inward,
    Outward,
}

pub fn plane_to_isotropic(p: &OrientedPlane) -> Result<IsotropicPoint, IsoError> {
    plane_to_isotropic_eps(p, SOUTH_POLE_EPS)
}

pub fn plane_to_isotropic_eps(p: &OrientedPlane, eps: f64) -> Result<IsotropicPoint, IsoError> {
    let d = p.n.z + 1.0;
    if p.n.z <= -1.0 + eps {
        return Err(IsoError::NormalAtSouthPole { n3: p.n.z });
    }
    Ok(IsotropicPoint {
        x: p.n.x / d,
        y: p.n.y / d,
        z: p.h / d,
    })
}

pub fn isotropic_to_plane(q: &IsotropicPoint) -> OrientedPlane {
    let n = inverse_stereographic(q.x, q.y);
    OrientedPlane {
        n,
        h: q.z * (n.z + 1.0),
    }
}

pub fn inverse_stereographic(x: f64, y: f64) -> Vector3<f64> {
    let d = x * x + y * y + 1.0;
    Vector3::new(2.0 * x / d, 2.0 * y / d, (1.0 - x * x - y * y) / d)
}

/// Isotropic image of the tangent planes of an oriented sphere.
pub fn sphere_to_paraboloid(
    center: &Vector3<f64>,
    radius: f64,
    orientation: Orientation,
) -> ParaboloidCoeffs {
    let r = match orientation {
        Orientation::Inward => radius,
        Orientation::Outward => -radius,
    };
    ParaboloidCoeffs {
        c2: (r + center.z) / 2.0,
        l1: -center.x,
        l2: -center.y,
        c0: (r - center.z) / 2.0,
    }
}

pub fn sample_to_isotropic(s: &SurfaceSample) -> Result<IsotropicSample, IsoError> {
    let n = &s.n;
    let r = &s.r;
    if n.z <= -1.0 + SOUTH_POLE_EPS {
        return Err(IsoError::NormalAtSouthPole { n3: n.z });
    }
    let d = n.z + 1.0;
    Ok(IsotropicSample {
        x: n.x / d,
        y: n.y / d,
        f: -n.dot(r) / d,
        fx: n.x * r.z / d - r.x,
        fy: n.y * r.z / d - r.y,
    })
}

/// Point of tangency of the plane `(x, y, f)` with the surface.
pub fn isotropic_to_contact_point(x: f64, y: f64, j: &Jet4) -> Vector3<f64> {
    contact_point(x, y, j.f, j.fx, j.fy)
}

pub fn contact_point(x: f64, y: f64, f: f64, fx: f64, fy: f64) -> Vector3<f64> {
    let s = 1.0 / (x * x + y * y + 1.0);
    Vector3::new(
        s * ((x * x - y * y - 1.0) * fx + 2.0 * x * y * fy - 2.0 * x * f),
        s * ((y * y - x * x - 1.0) * fy + 2.0 * x * y * fx - 2.0 * y * f),
        s * (2.0 * x * fx + 2.0 * y * fy - 2.0 * f),
    )
}

/// Rotates all samples so their normalized mean normal becomes (0, 0, 1).
pub fn align_to_mean_normal(
    samples: &[SurfaceSample],
) -> Result<(Rotation3<f64>, Vec<SurfaceSample>), IsoError> {
    let sum: Vector3<f64> = samples.iter().map(|s| s.n).sum();
    let mean = if samples.is_empty() {
        Vector3::zeros()
    } else {
        sum / samples.len() as f64
    };
    let norm = mean.norm();
    if norm < 1e-9 {
        return Err(IsoError::DegenerateMeanNormal { norm });
    }
    let m = mean / norm;
    let z = Vector3::z();
    let rot = match Rotation3::rotation_between(&m, &z) {
        Some(r) => r,
        // antiparallel: any half-turn about a horizontal axis is minimal
        None => Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::x()), std::f64::consts::PI),
    };
    let out = samples
        .iter()
        .map(|s| SurfaceSample {
            r: rot * s.r,
            n: rot * s.n,
        })
        .collect();
    Ok((rot, out))
}

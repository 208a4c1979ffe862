//! From isotropic conics back to cones in design space, and integral curves
//! of the ruling and conic fields.

pub mod trace;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassifyError, ToolParams};
use crate::contact::{solve_hyperosculating_with, ConicCandidate, HyperRoot, SolveConfig};
use crate::isomap::{inverse_stereographic, isotropic_to_contact_point};
use crate::jets::Jet4;

pub use trace::{
    integrate_isotropic_circle, integrate_ruling_developable, integrate_ruling_ruled, CurveTrace,
    CircleTraceOptions, TraceShape,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("vertex denominator vanishes")]
    DegenerateDenominator,
    #[error("axis system is singular (probe normals nearly dependent)")]
    SingularSystem,
    #[error("cone side is ambiguous (grazing configuration)")]
    AmbiguousSide,
    #[error("invalid tool bounds: r_min {r_min}, r_max {r_max}")]
    InvalidBounds { r_min: f64, r_max: f64 },
    #[error("all second partials vanish at the seed")]
    ZeroHessian,
    #[error("no real ruling: positive curvature at ({x}, {y})")]
    NoRealRuling { x: f64, y: f64 },
    #[error("ruling direction jumped by more than 30° at ({x}, {y})")]
    BranchJump { x: f64, y: f64 },
    #[error("tracked root became multiple at ({x}, {y})")]
    MultipleRoot { x: f64, y: f64 },
    #[error("tracked root lost at ({x}, {y})")]
    RootLost { x: f64, y: f64 },
    #[error("jet evaluation failed: {0}")]
    Jet(String),
    #[error(transparent)]
    Tool(#[from] ClassifyError),
}

/// Vertex of the cone whose isotropic image is `c`.
pub fn cone_vertex(c: &ConicCandidate) -> Result<Vector3<f64>, ReconstructError> {
    let ConicCandidate { x, y, z, u, v, a, b, .. } = *c;
    let w = u * u + v * v;
    let lin = x * x + y * y + 1.0 + 2.0 * u * x + 2.0 * v * y;
    let lin_scale = x * x + y * y + 1.0 + 2.0 * (u * x).abs() + 2.0 * (v * y).abs();
    if w == 0.0 || lin.abs() <= 1e-14 * lin_scale {
        return Err(ReconstructError::DegenerateDenominator);
    }
    let p = a * v + b * u;
    let q = b * v - a * u;
    let den = w * lin;
    Ok(Vector3::new(
        (x * x - y * y - 1.0) * p + 2.0 * x * y * q - 2.0 * w * (u * z + x * z + a * y),
        (y * y - x * x - 1.0) * q + 2.0 * x * y * p - 2.0 * w * (v * z + y * z - a * x),
        2.0 * x * p + 2.0 * y * q - 2.0 * w * z,
    ) / den)
}

/// Axis from the normals at parameters `ts` along the conic: the unit
/// vector making angle `π/2 − θ` with each of them.
pub fn cone_axis_from(c: &ConicCandidate, ts: [f64; 3]) -> Result<Vector3<f64>, ReconstructError> {
    let rows: Vec<Vector3<f64>> = ts
        .iter()
        .map(|&t| {
            let (px, py, _) = c.point_at(t);
            inverse_stereographic(px, py)
        })
        .collect();
    let m = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
    // normals are unit vectors, so |det| is a scale-free volume
    if m.determinant().abs() <= 1e-10 {
        return Err(ReconstructError::SingularSystem);
    }
    let s = c.theta.sin();
    let a = m
        .lu()
        .solve(&Vector3::new(s, s, s))
        .ok_or(ReconstructError::SingularSystem)?;
    Ok(a.normalize())
}

pub fn cone_axis(c: &ConicCandidate) -> Result<Vector3<f64>, ReconstructError> {
    use std::f64::consts::PI;
    cone_axis_from(c, [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0])
}

/// Half-space of the tangent plane the cone occupies near the contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Toward `n(x, y)`.
    Positive,
    Negative,
}

pub fn cone_side(c: &ConicCandidate, m: &Vector3<f64>, r: &Vector3<f64>) -> Result<Side, ReconstructError> {
    let n2 = inverse_stereographic(c.x + 2.0 * c.u, c.y + 2.0 * c.v);
    let d = r - m;
    let s = n2.dot(&d);
    if s.abs() < 1e-10 * d.norm() || d.norm() == 0.0 {
        return Err(ReconstructError::AmbiguousSide);
    }
    Ok(if s > 0.0 { Side::Positive } else { Side::Negative })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolBounds {
    pub r_min: f64,
    pub r_max: f64,
}

impl ToolBounds {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self, ReconstructError> {
        let b = ToolBounds { r_min, r_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ReconstructError> {
        if self.r_min >= 0.0 && self.r_min < self.r_max {
            Ok(())
        } else {
            Err(ReconstructError::InvalidBounds { r_min: self.r_min, r_max: self.r_max })
        }
    }
}

pub fn tool_length_check(m: &Vector3<f64>, r: &Vector3<f64>, b: &ToolBounds) -> Result<bool, ReconstructError> {
    b.validate()?;
    let d = (m - r).norm();
    Ok(b.r_min <= d && d <= b.r_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub vertex: Vector3<f64>,
    /// Unit axis pointing from the vertex into the nappe holding the contact.
    pub axis: Vector3<f64>,
    pub theta: f64,
    pub contact: Vector3<f64>,
    /// Surface normal at the contact.
    pub normal: Vector3<f64>,
    pub side: Side,
    /// Radius of the cone's cross-section circle through the contact.
    pub circle_radius: f64,
    /// `|m − r|`.
    pub length: f64,
    pub feasible: bool,
    pub conic: ConicCandidate,
    pub c3: f64,
    pub jacobian: f64,
}

impl ConeSpec {
    /// Angle between the axis and the ruling through the contact.
    pub fn ruling_angle(&self) -> f64 {
        let d = self.contact - self.vertex;
        (self.axis.dot(&d) / d.norm()).clamp(-1.0, 1.0).acos()
    }
}

/// Assembles the cone for one hyperosculating root.
pub fn cone_from_candidate(
    j: &Jet4,
    root: &HyperRoot,
    theta: f64,
    bounds: &ToolBounds,
) -> Result<ConeSpec, ReconstructError> {
    let conic = ConicCandidate::osculating(j, root.u, root.v, theta);
    let m = cone_vertex(&conic)?;
    let mut axis = cone_axis(&conic)?;
    let r = isotropic_to_contact_point(j.x, j.y, j);
    if axis.dot(&(r - m)) < 0.0 {
        axis = -axis;
    }
    let side = cone_side(&conic, &m, &r)?;
    let length = (m - r).norm();
    Ok(ConeSpec {
        vertex: m,
        axis,
        theta,
        contact: r,
        normal: inverse_stereographic(j.x, j.y),
        side,
        circle_radius: length * theta.sin(),
        length,
        feasible: tool_length_check(&m, &r, bounds)?,
        conic,
        c3: root.c3,
        jacobian: root.jacobian,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRoot {
    pub u: f64,
    pub v: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBuild {
    pub x: f64,
    pub y: f64,
    /// Sorted by `|c3|`.
    pub cones: Vec<ConeSpec>,
    pub dropped: Vec<DroppedRoot>,
    /// Why the list is empty when no root exists.
    pub reason: Option<String>,
}

pub fn build_cone_at(
    x: f64,
    y: f64,
    j: &Jet4,
    tool: &ToolParams,
    bounds: &ToolBounds,
) -> Result<ConeBuild, ReconstructError> {
    build_cone_at_with(x, y, j, tool, bounds, &SolveConfig::default())
}

pub fn build_cone_at_with(
    x: f64,
    y: f64,
    j: &Jet4,
    tool: &ToolParams,
    bounds: &ToolBounds,
    solve: &SolveConfig,
) -> Result<ConeBuild, ReconstructError> {
    let theta = tool.theta()?;
    bounds.validate()?;
    let rep = solve_hyperosculating_with(x, y, j, theta, solve);
    let mut out = ConeBuild { x, y, cones: Vec::new(), dropped: Vec::new(), reason: None };
    if rep.identically_zero && rep.roots.is_empty() {
        out.reason = Some("hyperosculation cubic vanishes identically".into());
        return Ok(out);
    }
    for root in &rep.roots {
        match cone_from_candidate(j, root, theta, bounds) {
            Ok(c) => out.cones.push(c),
            Err(e) => out.dropped.push(DroppedRoot { u: root.u, v: root.v, reason: e.to_string() }),
        }
    }
    out.cones.sort_by(|a, b| a.c3.abs().total_cmp(&b.c3.abs()));
    if out.cones.is_empty() && out.reason.is_none() {
        out.reason = Some(if rep.roots.is_empty() {
            "no real hyperosculating direction".into()
        } else {
            "every root was dropped".into()
        });
    }
    Ok(out)
}

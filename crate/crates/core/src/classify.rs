//! Pointwise recognition tests on isotropic 4-jets and their aggregation
//! over sampling grids.

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{solve_hyperosculating_with, HyperRoot, SolveConfig};
use crate::isomap::{
    align_to_mean_normal, contact_point, inverse_stereographic, sample_to_isotropic, Orientation,
    SurfaceSample,
};
use crate::jets::fit::{fit_jet_scattered, ScatterFitConfig};
use crate::jets::{Jet4, JetSource};
use crate::poly::Poly;

/// Default threshold on a verdict residual.
pub const DEFAULT_TOL: f64 = 1e-8;
/// `|K|` below this counts as zero in the millability check.
pub const MILL_K_TOL: f64 = 1e-9;
const MILL_STENCIL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("invalid tool parameters: {0}")]
    InvalidTool(String),
    #[error("the line x²+y²+1+2xu+2yv = 0 does not exist at the origin")]
    DegenerateLine,
    #[error("grid has no nodes")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceClass {
    Developable,
    Ruled,
    ConeEnvelope,
    CylinderEnvelope,
    Channel,
    Pipe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVerdict {
    pub class: SurfaceClass,
    /// Whether the residual passed [`DEFAULT_TOL`] (and, for ruled surfaces,
    /// the curvature sign condition).
    pub holds: bool,
    pub residual: f64,
    /// Candidate directions, best first.
    pub witnesses: Vec<[f64; 2]>,
    /// The test is a necessary condition only.
    pub necessary_only: bool,
    /// Multiplicity Jacobian at the cone witness.
    pub jacobian: Option<f64>,
    /// `fxx fyy − fxy²`, reported by the ruled test.
    pub gauss_numerator: Option<f64>,
}

impl ClassVerdict {
    fn new(class: SurfaceClass, residual: f64, witnesses: Vec<[f64; 2]>, necessary_only: bool) -> Self {
        ClassVerdict {
            class,
            holds: residual <= DEFAULT_TOL,
            residual,
            witnesses,
            necessary_only,
            jacobian: None,
            gauss_numerator: None,
        }
    }

    pub fn witness(&self) -> Option<[f64; 2]> {
        self.witnesses.first().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ToolParams {
    /// Cone opening angle in radians.
    pub theta: Option<f64>,
    /// Cylinder or sphere radius.
    pub radius: Option<f64>,
    #[serde(default)]
    pub orientation: Orientation,
}

impl ToolParams {
    pub fn cone(theta: f64) -> Self {
        ToolParams { theta: Some(theta), ..Default::default() }
    }

    pub fn with_radius(radius: f64, orientation: Orientation) -> Self {
        ToolParams { radius: Some(radius), orientation, ..Default::default() }
    }

    pub fn theta(&self) -> Result<f64, ClassifyError> {
        match self.theta {
            Some(t) if t > 0.0 && t < std::f64::consts::FRAC_PI_2 => Ok(t),
            Some(t) => Err(ClassifyError::InvalidTool(format!("theta {t} outside (0, π/2)"))),
            None => Err(ClassifyError::InvalidTool("theta not set".into())),
        }
    }

    pub fn radius(&self) -> Result<f64, ClassifyError> {
        match self.radius {
            Some(r) if r > 0.0 && r.is_finite() => Ok(r),
            Some(r) => Err(ClassifyError::InvalidTool(format!("radius {r} must be positive"))),
            None => Err(ClassifyError::InvalidTool("radius not set".into())),
        }
    }

    /// Radius with the orientation sign applied.
    pub fn signed_radius(&self) -> Result<f64, ClassifyError> {
        let r = self.radius()?;
        Ok(match self.orientation {
            Orientation::Inward => r,
            Orientation::Outward => -r,
        })
    }
}

pub fn developable_residual(j: &Jet4) -> f64 {
    j.fxx * j.fyy - j.fxy * j.fxy
}

/// Resultant of the quadratic and cubic ruling-direction equations.
pub fn ruled_resultant(j: &Jet4) -> f64 {
    let (a, b, c) = (j.fxx, j.fxy, j.fyy);
    let (p, q, r, s) = (j.fxxx, j.fxxy, j.fxyy, j.fyyy);
    c.powi(3) * p * p + 6.0 * c * p * s * b * a - 6.0 * c * c * p * r * a - 6.0 * s * b * a * a * r
        + 9.0 * c * r * r * a * a
        - 6.0 * b * c * c * q * p
        + 12.0 * b * b * q * s * a
        - 18.0 * b * c * q * r * a
        + 12.0 * c * r * b * b * p
        - 8.0 * s * b.powi(3) * p
        + 9.0 * a * c * c * q * q
        - 6.0 * c * q * s * a * a
        + s * s * a.powi(3)
}

/// Binary form `Σ c[k] u^(n−k) v^k`.
pub(crate) fn eval_form(c: &[f64], u: f64, v: f64) -> f64 {
    let n = c.len() - 1;
    c.iter()
        .enumerate()
        .map(|(k, ck)| ck * u.powi((n - k) as i32) * v.powi(k as i32))
        .sum()
}

fn inf_norm(c: &[f64]) -> f64 {
    c.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bombieri norm of a binary form; unchanged when the form is rotated.
fn form_norm(c: &[f64]) -> f64 {
    let n = c.len() - 1;
    c.iter()
        .enumerate()
        .map(|(k, ck)| ck * ck / binomial(n, k))
        .sum::<f64>()
        .sqrt()
}

/// Real zero directions of a nonzero binary form, as unit vectors.
pub(crate) fn form_directions(c: &[f64]) -> Vec<[f64; 2]> {
    let n = c.len() - 1;
    let m = inf_norm(c);
    if m == 0.0 {
        return Vec::new();
    }
    // in t = v/u the form is Σ c[k] t^k
    let mut dirs: Vec<[f64; 2]> = Poly::new(c.to_vec())
        .real_roots()
        .into_iter()
        .map(|t| {
            let h = 1f64.hypot(t);
            [1.0 / h, t / h]
        })
        .collect();
    if c[n].abs() <= 1e-14 * m {
        dirs.push([0.0, 1.0]);
    }
    dirs
}

/// Sylvester resultant of two binary forms.
fn form_resultant(a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len() - 1, b.len() - 1);
    let size = m + n;
    let mut s = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for (k, &ak) in a.iter().enumerate() {
            s[(i, i + k)] = ak;
        }
    }
    for i in 0..m {
        for (k, &bk) in b.iter().enumerate() {
            s[(n + i, i + k)] = bk;
        }
    }
    s.determinant()
}

/// Resultant of `a` and `b` divided by `‖a‖^deg b · ‖b‖^deg a` in the
/// Bombieri norm.
fn normalized_resultant(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (form_norm(a), form_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let an: Vec<f64> = a.iter().map(|x| x / na).collect();
    let bn: Vec<f64> = b.iter().map(|x| x / nb).collect();
    form_resultant(&an, &bn).abs()
}

/// Zero directions of `a` ranked by how well they annihilate `b` (unit
/// vectors, relative values).
fn ranked_common_directions(a: &[f64], b: &[f64]) -> Vec<([f64; 2], f64)> {
    let nb = form_norm(b);
    let dirs = if inf_norm(a) == 0.0 {
        if nb == 0.0 {
            vec![[1.0, 0.0]]
        } else {
            form_directions(b)
        }
    } else {
        form_directions(a)
    };
    let mut out: Vec<([f64; 2], f64)> = dirs
        .into_iter()
        .map(|d| {
            let r = if nb == 0.0 { 0.0 } else { eval_form(b, d[0], d[1]).abs() / nb };
            (d, r)
        })
        .collect();
    out.sort_by(|p, q| p.1.total_cmp(&q.1));
    out
}

pub(crate) fn ruling_forms(j: &Jet4) -> ([f64; 3], [f64; 4]) {
    (
        [j.fxx, 2.0 * j.fxy, j.fyy],
        [j.fxxx, 3.0 * j.fxxy, 3.0 * j.fxyy, j.fyyy],
    )
}

pub fn ruled_test(j: &Jet4) -> ClassVerdict {
    let (quad, cubic) = ruling_forms(j);
    let k = developable_residual(j);
    let nq = inf_norm(&quad);
    let elliptic = k > DEFAULT_TOL * nq * nq;
    // an elliptic point has no real asymptotic direction, whatever the
    // resultant says; report how far it is from parabolic instead
    let mut residual = normalized_resultant(&quad, &cubic);
    if elliptic {
        residual = residual.max(k / (nq * nq));
    }
    let witnesses = if elliptic {
        Vec::new()
    } else {
        ranked_common_directions(&quad, &cubic)
            .into_iter()
            .filter(|(_, r)| *r <= DEFAULT_TOL.sqrt())
            .map(|(d, _)| d)
            .collect()
    };
    let mut v = ClassVerdict::new(SurfaceClass::Ruled, residual, witnesses, false);
    v.holds = !elliptic && residual <= DEFAULT_TOL && !v.witnesses.is_empty();
    v.gauss_numerator = Some(k);
    v
}

pub fn cone_envelope_test(x: f64, y: f64, j: &Jet4, tool: &ToolParams) -> Result<ClassVerdict, ClassifyError> {
    cone_envelope_test_with(x, y, j, tool, &SolveConfig::default())
}

/// [`cone_envelope_test`] with explicit solver settings. On fitted jets the
/// contained direction of an envelope is a double root that noise turns
/// into a complex pair; a looser `near_double_rel` and `root_tol` keep it.
pub fn cone_envelope_test_with(
    x: f64,
    y: f64,
    j: &Jet4,
    tool: &ToolParams,
    solve: &SolveConfig,
) -> Result<ClassVerdict, ClassifyError> {
    let theta = tool.theta()?;
    let rep = solve_hyperosculating_with(x, y, j, theta, solve);
    let best: Option<&HyperRoot> = rep.min_order4();
    let mut v = match best {
        Some(r) => ClassVerdict::new(SurfaceClass::ConeEnvelope, r.c3.abs(), vec![[r.u, r.v]], false),
        None => ClassVerdict::new(SurfaceClass::ConeEnvelope, f64::INFINITY, Vec::new(), false),
    };
    v.jacobian = best.map(|r| r.jacobian.abs());
    Ok(v)
}

/// Plane condition for cylinders and spheres of radius `r` (signed by
/// orientation), at direction `(u, v)`.
pub fn offset_plane_residual(x: f64, y: f64, j: &Jet4, u: f64, v: f64, r: f64) -> f64 {
    let q = x * x + y * y + 1.0;
    2.0 * (u * u + v * v) * (j.f - x * j.fx - y * j.fy - r)
        + q * (j.fxx * v * v - 2.0 * j.fxy * u * v + j.fyy * u * u)
}

/// [`offset_plane_residual`] on the unit vector along `(u, v)`.
fn unit_plane_residual(x: f64, y: f64, j: &Jet4, u: f64, v: f64, r: f64) -> f64 {
    let h = u.hypot(v);
    offset_plane_residual(x, y, j, u / h, v / h, r)
}

/// The plane condition on unit directions is `c0 + c1 cos 2φ + c2 sin 2φ`.
fn plane_residual_harmonics(x: f64, y: f64, j: &Jet4, r: f64) -> (f64, f64, f64) {
    let q = x * x + y * y + 1.0;
    let alpha = 2.0 * (j.f - x * j.fx - y * j.fy - r);
    // fxx v² − 2 fxy uv + fyy u² at (cos φ, sin φ)
    let c0 = alpha + q * (j.fxx + j.fyy) / 2.0;
    let c1 = q * (j.fyy - j.fxx) / 2.0;
    let c2 = -q * j.fxy;
    (c0, c1, c2)
}

/// Smallest `|c0 + c1 cos ψ + c2 sin ψ|` over all ψ and an angle `φ = ψ/2`
/// attaining it.
fn min_harmonic(c0: f64, c1: f64, c2: f64) -> (f64, f64) {
    let amp = c1.hypot(c2);
    let base = c2.atan2(c1);
    if amp == 0.0 {
        return (c0.abs(), 0.0);
    }
    if c0.abs() <= amp {
        // cos(ψ − base) = −c0 / amp
        let psi = base + (-c0 / amp).clamp(-1.0, 1.0).acos();
        (0.0, psi / 2.0)
    } else if c0 > 0.0 {
        (c0 - amp, (base + std::f64::consts::PI) / 2.0)
    } else {
        (-c0 - amp, base / 2.0)
    }
}

/// Hyperosculation cubic along `(u, v) = p + s d` as a polynomial in `s`.
fn hyper_on_line(j: &Jet4, p: [f64; 2], d: [f64; 2]) -> Poly {
    let u = Poly::linear(p[0], d[0]);
    let v = Poly::linear(p[1], d[1]);
    let uu = &u * &u;
    let vv = &v * &v;
    let uv = &u * &v;
    (&vv * &v).scale(j.fxxx)
        - (&vv * &u).scale(3.0 * j.fxxy)
        + (&uu * &v).scale(3.0 * j.fxyy)
        - (&uu * &u).scale(j.fyyy)
        + uv.scale(3.0 * (j.fxx - j.fyy))
        + (vv - uu).scale(3.0 * j.fxy)
}

pub fn cylinder_envelope_test(x: f64, y: f64, j: &Jet4, tool: &ToolParams) -> Result<ClassVerdict, ClassifyError> {
    let r = tool.signed_radius()?;
    let rho2 = x * x + y * y;
    if rho2 == 0.0 {
        return Err(ClassifyError::DegenerateLine);
    }
    let q = rho2 + 1.0;
    // foot of the line nearest the origin and its direction
    let p = [-q * x / (2.0 * rho2), -q * y / (2.0 * rho2)];
    let rho = rho2.sqrt();
    let d = [-y / rho, x / rho];
    let cubic = hyper_on_line(j, p, d);
    let scale = cubic.max_abs_coeff();
    let reference = j.scale() * (1.0 + p[0].hypot(p[1])).powi(3);
    let mut cands: Vec<([f64; 2], f64)> = Vec::new();
    if scale <= 1e-12 * reference.max(f64::MIN_POSITIVE) {
        // every point of the line satisfies the cubic; directions of a line
        // avoiding the origin sweep a half-turn, so 2φ covers the full circle
        let (c0, c1, c2) = plane_residual_harmonics(x, y, j, r);
        let (res, phi) = min_harmonic(c0, c1, c2);
        let (dx, dy) = (phi.cos(), phi.sin());
        // intersect the ray through (dx, dy) with the line, flipping if needed
        let along = dx * p[0] + dy * p[1];
        let w = if along.abs() > 1e-300 {
            let s = (p[0] * p[0] + p[1] * p[1]) / along;
            [s * dx, s * dy]
        } else {
            p
        };
        cands.push((w, res));
    } else {
        for s in cubic.real_roots() {
            let w = [p[0] + s * d[0], p[1] + s * d[1]];
            cands.push((w, unit_plane_residual(x, y, j, w[0], w[1], r).abs()));
        }
    }
    cands.sort_by(|a, b| a.1.total_cmp(&b.1));
    let residual = cands.first().map_or(f64::INFINITY, |c| c.1);
    Ok(ClassVerdict::new(
        SurfaceClass::CylinderEnvelope,
        residual,
        cands.into_iter().map(|c| c.0).collect(),
        true,
    ))
}

fn channel_forms(j: &Jet4) -> ([f64; 3], [f64; 4]) {
    (
        [-j.fxy, j.fxx - j.fyy, j.fxy],
        [-j.fyyy, 3.0 * j.fxyy, -3.0 * j.fxxy, j.fxxx],
    )
}

pub fn channel_test(j: &Jet4) -> ClassVerdict {
    let (quad, cubic) = channel_forms(j);
    let residual = normalized_resultant(&quad, &cubic);
    let witnesses = ranked_common_directions(&quad, &cubic)
        .into_iter()
        .map(|(d, _)| d)
        .collect();
    ClassVerdict::new(SurfaceClass::Channel, residual, witnesses, true)
}

pub fn pipe_test(x: f64, y: f64, j: &Jet4, tool: &ToolParams) -> Result<ClassVerdict, ClassifyError> {
    let r = tool.signed_radius()?;
    let (quad, _) = channel_forms(j);
    let mut cands: Vec<([f64; 2], f64)> = if inf_norm(&quad) <= 1e-14 * (1.0 + j.scale()) {
        let (c0, c1, c2) = plane_residual_harmonics(x, y, j, r);
        let (res, phi) = min_harmonic(c0, c1, c2);
        vec![([phi.cos(), phi.sin()], res)]
    } else {
        form_directions(&quad)
            .into_iter()
            .map(|d| (d, unit_plane_residual(x, y, j, d[0], d[1], r).abs()))
            .collect()
    };
    cands.sort_by(|a, b| a.1.total_cmp(&b.1));
    let residual = cands.first().map_or(f64::INFINITY, |c| c.1);
    Ok(ClassVerdict::new(
        SurfaceClass::Pipe,
        residual,
        cands.into_iter().map(|c| c.0).collect(),
        true,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Millability {
    /// Positive curvature: the cone enters the material.
    Penetrates,
    /// Negative curvature.
    Candidate,
    /// Zero curvature: the isotropic image is not a graph.
    ExcludedByStar,
}

/// Design-space Gaussian curvature of the surface whose isotropic image has
/// jet `j`, by central differences on the reconstructed contact points.
pub fn design_gaussian_curvature(j: &Jet4) -> f64 {
    let h = MILL_STENCIL;
    let r = |dx: f64, dy: f64| {
        let (f, fx, fy) = j.eval_model(dx, dy);
        contact_point(j.x + dx, j.y + dy, f, fx, fy)
    };
    let n = |dx: f64, dy: f64| inverse_stereographic(j.x + dx, j.y + dy);
    let rx = (r(h, 0.0) - r(-h, 0.0)) / (2.0 * h);
    let ry = (r(0.0, h) - r(0.0, -h)) / (2.0 * h);
    let nx = (n(h, 0.0) - n(-h, 0.0)) / (2.0 * h);
    let ny = (n(0.0, h) - n(0.0, -h)) / (2.0 * h);
    let n0: Vector3<f64> = n(0.0, 0.0);
    nx.cross(&ny).dot(&n0) / rx.cross(&ry).dot(&n0)
}

pub fn millability_check(j: &Jet4) -> Millability {
    let k = design_gaussian_curvature(j);
    if !k.is_finite() || k.abs() <= MILL_K_TOL {
        Millability::ExcludedByStar
    } else if k > 0.0 {
        Millability::Penetrates
    } else {
        Millability::Candidate
    }
}

/// Millability of a design-space patch given as oriented samples; the
/// verdict refers to the sample nearest the centroid.
pub fn millability_of_patch(samples: &[SurfaceSample]) -> Millability {
    let Ok((_, aligned)) = align_to_mean_normal(samples) else {
        return Millability::ExcludedByStar;
    };
    let iso: Vec<_> = aligned.iter().filter_map(|s| sample_to_isotropic(s).ok()).collect();
    if iso.len() < 3 {
        return Millability::ExcludedByStar;
    }
    let nf = iso.len() as f64;
    let (mx, my) = (
        iso.iter().map(|s| s.x).sum::<f64>() / nf,
        iso.iter().map(|s| s.y).sum::<f64>() / nf,
    );
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in &iso {
        sxx += (s.x - mx).powi(2);
        sxy += (s.x - mx) * (s.y - my);
        syy += (s.y - my).powi(2);
    }
    let tr = (sxx + syy) / nf;
    let det = (sxx * syy - sxy * sxy) / (nf * nf);
    let lmin = tr / 2.0 - ((tr / 2.0).powi(2) - det).max(0.0).sqrt();
    // Gauss image spread against the spatial extent of the patch
    let centroid: Vector3<f64> = aligned.iter().map(|s| s.r).sum::<Vector3<f64>>() / aligned.len() as f64;
    let extent = aligned.iter().map(|s| (s.r - centroid).norm()).fold(0.0, f64::max);
    if lmin.max(0.0).sqrt() <= 1e-6 * extent.max(1e-300) {
        return Millability::ExcludedByStar;
    }
    let center = aligned
        .iter()
        .zip(&iso)
        .min_by(|a, b| (a.0.r - centroid).norm().total_cmp(&(b.0.r - centroid).norm()))
        .map(|(_, s)| (s.x, s.y))
        .unwrap();
    let cfg = ScatterFitConfig { k: iso.len().min(36), ..Default::default() };
    match fit_jet_scattered(&iso, center, &cfg) {
        Ok((j, _)) => millability_check(&j),
        Err(_) => Millability::ExcludedByStar,
    }
}

/// Which pointwise test a field evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "test")]
pub enum FieldTest {
    Developable,
    Ruled,
    Cone,
    Cylinder,
    Channel,
    Pipe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum GridSpec {
    Rect { x: [f64; 2], y: [f64; 2], nx: usize, ny: usize },
    Annulus { center: [f64; 2], radii: [f64; 2], nr: usize, nphi: usize },
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (n - 1) as f64 })
}

impl GridSpec {
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match *self {
            GridSpec::Rect { x, y, nx, ny } => linspace(y[0], y[1], ny)
                .flat_map(|yy| linspace(x[0], x[1], nx).map(move |xx| (xx, yy)))
                .collect(),
            GridSpec::Annulus { center, radii, nr, nphi } => linspace(radii[0], radii[1], nr)
                .flat_map(|r| {
                    (0..nphi).map(move |k| {
                        let phi = std::f64::consts::TAU * k as f64 / nphi as f64;
                        (center[0] + r * phi.cos(), center[1] + r * phi.sin())
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub verdict: Option<ClassVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldVerdict {
    Holds,
    Fails,
    /// No node produced a residual.
    NoData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldResult {
    pub test: FieldTest,
    pub nodes: Vec<NodeResult>,
    pub p95: Option<f64>,
    pub tolerance: f64,
    pub verdict: FieldVerdict,
}

/// Runs one pointwise test at a point.
pub fn run_test(test: FieldTest, x: f64, y: f64, j: &Jet4, tool: &ToolParams) -> Result<ClassVerdict, ClassifyError> {
    run_test_with(test, x, y, j, tool, &SolveConfig::default())
}

pub fn run_test_with(
    test: FieldTest,
    x: f64,
    y: f64,
    j: &Jet4,
    tool: &ToolParams,
    solve: &SolveConfig,
) -> Result<ClassVerdict, ClassifyError> {
    Ok(match test {
        FieldTest::Developable => {
            let k = developable_residual(j);
            let mut v = ClassVerdict::new(SurfaceClass::Developable, k.abs(), Vec::new(), false);
            v.gauss_numerator = Some(k);
            v
        }
        FieldTest::Ruled => ruled_test(j),
        FieldTest::Cone => cone_envelope_test_with(x, y, j, tool, solve)?,
        FieldTest::Cylinder => cylinder_envelope_test(x, y, j, tool)?,
        FieldTest::Channel => channel_test(j),
        FieldTest::Pipe => pipe_test(x, y, j, tool)?,
    })
}

/// 95th percentile by nearest rank.
pub fn percentile95(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub fn classify_field(
    source: &dyn JetSource,
    test: FieldTest,
    tool: &ToolParams,
    grid: &GridSpec,
    tolerance: f64,
) -> Result<FieldResult, ClassifyError> {
    classify_field_with(source, test, tool, grid, tolerance, &SolveConfig::default())
}

pub fn classify_field_with(
    source: &dyn JetSource,
    test: FieldTest,
    tool: &ToolParams,
    grid: &GridSpec,
    tolerance: f64,
    solve: &SolveConfig,
) -> Result<FieldResult, ClassifyError> {
    let pts = grid.nodes();
    if pts.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    match test {
        FieldTest::Cone => {
            tool.theta()?;
        }
        FieldTest::Cylinder | FieldTest::Pipe => {
            tool.radius()?;
        }
        _ => {}
    }
    let nodes: Vec<NodeResult> = pts
        .par_iter()
        .enumerate()
        .map(|(index, &(x, y))| {
            let out = source
                .jet_at(x, y)
                .map_err(|e| e.to_string())
                .and_then(|j| run_test_with(test, x, y, &j, tool, solve).map_err(|e| e.to_string()));
            match out {
                Ok(v) => NodeResult { index, x, y, verdict: Some(v), error: None },
                Err(e) => NodeResult { index, x, y, verdict: None, error: Some(e) },
            }
        })
        .collect();
    let residuals: Vec<f64> = nodes
        .iter()
        .filter_map(|n| n.verdict.as_ref().map(|v| v.residual))
        .collect();
    let p95 = percentile95(&residuals);
    let verdict = match p95 {
        None => FieldVerdict::NoData,
        Some(p) if p <= tolerance => FieldVerdict::Holds,
        Some(_) => FieldVerdict::Fails,
    };
    Ok(FieldResult { test, nodes, p95, tolerance, verdict })
}

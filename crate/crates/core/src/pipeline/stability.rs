//! Normal-noise stability experiment on an exact cone envelope.
//!
//! Around each test point the exact tangent planes are sampled on a small
//! isotropic patch, carried to design space as contact points with normals,
//! perturbed, mapped back and refitted. The hyperosculating cones from the
//! refitted jet are compared with the exact generator cone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::perturb::{perturb_normals, PerturbSpec};
use super::source::to_isotropic;
use super::PipelineError;
use crate::contact::{solve_hyperosculating, solve_hyperosculating_with, SolveConfig};
use crate::isomap::{inverse_stereographic, isotropic_to_contact_point, SurfaceSample};
use crate::jets::{fit_jet_scattered, parse_expression, ExprAst, JetSource, ScatterFitConfig};
use crate::reconstruct::{cone_from_candidate, ConeSpec, ToolBounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    pub f: String,
    pub theta_deg: f64,
    pub points: Vec<[f64; 2]>,
    /// Half-width of the square sampling patch around each point.
    pub patch_half_width: f64,
    /// The patch has `(2 n + 1)²` nodes.
    pub patch_nodes: usize,
    pub noise: Vec<f64>,
    pub seed: u64,
    /// Critical points of the root polynomial with `|P|` below this fraction
    /// of the term magnitude are kept as candidates, under the same relative
    /// residual gate; a double root splits into a complex pair under most
    /// perturbations.
    pub cluster_rel: f64,
    /// Use the sample gradients in the fit. A tilted plane through a fixed
    /// contact point keeps its old gradient at a moved isotropic location,
    /// so by default only values are fitted.
    pub hermite: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        let s3 = 3f64.sqrt();
        StabilityConfig {
            f: "y^2/(x^2+y^2)".into(),
            theta_deg: 30.0,
            // on the generator circle x² + y² = 3, away from the axes
            points: (0..20)
                .map(|k| {
                    let a = 0.2 + 0.3 * k as f64;
                    [s3 * a.cos(), s3 * a.sin()]
                })
                .collect(),
            patch_half_width: 0.05,
            patch_nodes: 8,
            noise: vec![0.0, 0.01, 0.05, 0.1],
            seed: 2024,
            cluster_rel: 1e-3,
            hermite: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub x: f64,
    pub y: f64,
    /// Angle between the exact generator ruling and the nearest recovered one.
    pub angular_error: Option<f64>,
    pub cones: Vec<ConeSpec>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub r: f64,
    pub median_error: Option<f64>,
    pub max_error: Option<f64>,
    pub points: Vec<PointOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: StabilityConfig,
    pub levels: Vec<NoiseLevel>,
}

fn ruling(c: &ConeSpec) -> nalgebra::Vector3<f64> {
    (c.contact - c.vertex).normalize()
}

fn patch(ast: &ExprAst, p: [f64; 2], w: f64, n: usize) -> Result<Vec<SurfaceSample>, PipelineError> {
    let n = n as i64;
    let mut out = Vec::with_capacity(((2 * n + 1) * (2 * n + 1)) as usize);
    for i in -n..=n {
        for k in -n..=n {
            let (x, y) = (p[0] + w * i as f64 / n as f64, p[1] + w * k as f64 / n as f64);
            let j = ast.jet_at(x, y).map_err(|e| PipelineError::Domain(e.to_string()))?;
            out.push(SurfaceSample { r: isotropic_to_contact_point(x, y, &j), n: inverse_stereographic(x, y) });
        }
    }
    Ok(out)
}

/// Exact generator cone at `p`: the root with the smallest order-4 residual.
fn exact_generator(ast: &ExprAst, p: [f64; 2], theta: f64) -> Result<ConeSpec, PipelineError> {
    let j = ast.jet_at(p[0], p[1]).map_err(|e| PipelineError::Domain(e.to_string()))?;
    let rep = solve_hyperosculating(p[0], p[1], &j, theta);
    let root = rep
        .roots
        .first()
        .ok_or_else(|| PipelineError::Input(format!("no hyperosculating root at ({}, {})", p[0], p[1])))?;
    cone_from_candidate(&j, root, theta, &ToolBounds { r_min: 0.0, r_max: f64::MAX }).map_err(PipelineError::from)
}

fn run_point(
    ast: &ExprAst,
    cfg: &StabilityConfig,
    idx: usize,
    r: f64,
) -> Result<(Option<f64>, Vec<ConeSpec>), PipelineError> {
    let p = cfg.points[idx];
    let theta = cfg.theta_deg.to_radians();
    let exact = exact_generator(ast, p, theta)?;
    let samples = patch(ast, p, cfg.patch_half_width, cfg.patch_nodes)?;
    let noisy = perturb_normals(&samples, &PerturbSpec { r, seed: cfg.seed.wrapping_add(idx as u64) })?;
    let (iso, _) = to_isotropic(&noisy);
    let fit = ScatterFitConfig { k: iso.len(), hermite: cfg.hermite, ..ScatterFitConfig::default() };
    let (j, _) = fit_jet_scattered(&iso, (p[0], p[1]), &fit).map_err(|e| PipelineError::Domain(e.to_string()))?;
    let solve = SolveConfig { near_double_rel: cfg.cluster_rel, root_tol: cfg.cluster_rel, ..SolveConfig::default() };
    let rep = solve_hyperosculating_with(p[0], p[1], &j, theta, &solve);
    let bounds = ToolBounds { r_min: 0.0, r_max: f64::MAX };
    let cones: Vec<ConeSpec> = rep
        .roots
        .iter()
        .filter_map(|root| cone_from_candidate(&j, root, theta, &bounds).ok())
        .collect();
    let target = ruling(&exact);
    let err = cones
        .iter()
        .map(|c| ruling(c).dot(&target).clamp(-1.0, 1.0).acos())
        .reduce(f64::min);
    Ok((err, cones))
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn run_stability(cfg: &StabilityConfig) -> Result<StabilityReport, PipelineError> {
    if cfg.noise.iter().any(|&r| !(r >= 0.0)) {
        return Err(PipelineError::NegativeNoise(cfg.noise.iter().copied().fold(0.0, f64::min)));
    }
    if cfg.patch_nodes == 0 || !(cfg.patch_half_width > 0.0) {
        return Err(PipelineError::Config("patch needs a positive width and at least one node".into()));
    }
    let ast = parse_expression(&cfg.f).map_err(|e| PipelineError::Parse(e.to_string()))?;
    let mut levels = Vec::new();
    for &r in &cfg.noise {
        let points: Vec<PointOutcome> = (0..cfg.points.len())
            .into_par_iter()
            .map(|i| {
                let [x, y] = cfg.points[i];
                match run_point(&ast, cfg, i, r) {
                    Ok((angular_error, cones)) => PointOutcome { x, y, angular_error, cones, error: None },
                    Err(e) => PointOutcome { x, y, angular_error: None, cones: Vec::new(), error: Some(e.to_string()) },
                }
            })
            .collect();
        let mut errs: Vec<f64> = points.iter().filter_map(|p| p.angular_error).collect();
        let max_error = errs.iter().copied().reduce(f64::max);
        levels.push(NoiseLevel { r, median_error: median(&mut errs), max_error, points });
    }
    Ok(StabilityReport { config: cfg.clone(), levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_generator_is_the_half_point_circle() {
        let ast = parse_expression("y^2/(x^2+y^2)").unwrap();
        let p = [3f64.sqrt() * 0.5f64.cos(), 3f64.sqrt() * 0.5f64.sin()];
        let c = exact_generator(&ast, p, 30f64.to_radians()).unwrap();
        assert!((c.conic.u + p[0] / 2.0).abs() < 1e-8 && (c.conic.v + p[1] / 2.0).abs() < 1e-8);
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = StabilityConfig { points: StabilityConfig::default().points[..3].to_vec(), noise: vec![0.0, 0.1], ..Default::default() };
        let a = run_stability(&cfg).unwrap();
        let b = run_stability(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.levels[0].points.iter().all(|p| p.error.is_none()));
        let bad = StabilityConfig { noise: vec![-0.1], ..cfg };
        assert!(matches!(run_stability(&bad), Err(PipelineError::NegativeNoise(_))));
    }
}

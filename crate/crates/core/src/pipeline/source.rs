//! Surface inputs and their conversion to jet providers.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::isomap::{sample_to_isotropic, IsotropicSample, Orientation, SurfaceSample};
use crate::jets::{parse_expression, parse_with_vars, ExprAst, Jet4, JetError, JetSource, ScatterFitConfig, ScatteredJets};

/// Parameter rectangle and node counts for a parametric chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub s: [f64; 2],
    pub t: [f64; 2],
    pub ns: usize,
    pub nt: usize,
}

impl ParamGrid {
    fn values(range: [f64; 2], n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| {
            if n == 1 {
                0.5 * (range[0] + range[1])
            } else {
                range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
            }
        })
    }

    /// Nodes in row-major order (`t` outer, `s` inner).
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        Self::values(self.t, self.nt)
            .flat_map(|t| Self::values(self.s, self.ns).map(move |s| (s, t)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceSource {
    /// Isotropic graph `z = f(x, y)`.
    IsotropicExpr { f: String },
    /// Design-space chart `(X, Y, Z)(s, t)`. `outward` keeps the normal
    /// `r_s × r_t`, `inward` reverses it.
    Parametric {
        x: String,
        y: String,
        z: String,
        #[serde(default)]
        orientation: Orientation,
        grid: ParamGrid,
    },
    /// Rows `[px, py, pz, nx, ny, nz]`.
    Cloud { points: Vec<[f64; 6]> },
}

/// A chart node whose normal could not be formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateNormal {
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricSamples {
    pub samples: Vec<SurfaceSample>,
    /// Chart parameters of each sample.
    pub params: Vec<(f64, f64)>,
    pub skipped: Vec<DegenerateNormal>,
}

/// Samples a chart with exact first partials from Taylor arithmetic.
pub fn sample_parametric(
    x: &str,
    y: &str,
    z: &str,
    orientation: Orientation,
    grid: &ParamGrid,
) -> Result<ParametricSamples, PipelineError> {
    let parse = |e: &str| parse_with_vars(e, ["s", "t"]).map_err(|err| PipelineError::Parse(format!("{e}: {err}")));
    let chart = [parse(x)?, parse(y)?, parse(z)?];
    let sign = match orientation {
        Orientation::Outward => 1.0,
        Orientation::Inward => -1.0,
    };
    let mut out = ParametricSamples { samples: Vec::new(), params: Vec::new(), skipped: Vec::new() };
    for (s, t) in grid.nodes() {
        let mut r = Vector3::zeros();
        let mut rs = Vector3::zeros();
        let mut rt = Vector3::zeros();
        for (k, ast) in chart.iter().enumerate() {
            let tay = ast
                .taylor(s, t)
                .map_err(|e| PipelineError::Domain(format!("chart at (s, t) = ({s}, {t}): {e}")))?;
            r[k] = tay.value();
            rs[k] = tay.partial(1, 0);
            rt[k] = tay.partial(0, 1);
        }
        let c = rs.cross(&rt);
        let norm = c.norm();
        if !(norm > 1e-12 * rs.norm() * rt.norm()) || !norm.is_finite() {
            out.skipped.push(DegenerateNormal { s, t });
            continue;
        }
        out.samples.push(SurfaceSample { r, n: c * (sign / norm) });
        out.params.push((s, t));
    }
    Ok(out)
}

impl SurfaceSource {
    pub fn isotropic(f: &str) -> Self {
        SurfaceSource::IsotropicExpr { f: f.to_string() }
    }

    pub fn cloud(samples: &[SurfaceSample]) -> Self {
        SurfaceSource::Cloud {
            points: samples
                .iter()
                .map(|s| [s.r.x, s.r.y, s.r.z, s.n.x, s.n.y, s.n.z])
                .collect(),
        }
    }

    pub fn is_sampled(&self) -> bool {
        !matches!(self, SurfaceSource::IsotropicExpr { .. })
    }

    /// Design-space samples of a sampled source, with degenerate chart nodes.
    pub fn samples(&self) -> Result<(Vec<SurfaceSample>, Vec<DegenerateNormal>), PipelineError> {
        match self {
            SurfaceSource::IsotropicExpr { .. } => Err(PipelineError::Config(
                "an isotropic expression has no design-space samples".into(),
            )),
            SurfaceSource::Parametric { x, y, z, orientation, grid } => {
                let p = sample_parametric(x, y, z, *orientation, grid)?;
                Ok((p.samples, p.skipped))
            }
            SurfaceSource::Cloud { points } => {
                let mut v = Vec::with_capacity(points.len());
                for (i, p) in points.iter().enumerate() {
                    let n = Vector3::new(p[3], p[4], p[5]);
                    let len = n.norm();
                    if !(len > 0.0) || !p.iter().all(|c| c.is_finite()) {
                        return Err(PipelineError::Input(format!("cloud point {i} has an invalid normal")));
                    }
                    v.push(SurfaceSample { r: Vector3::new(p[0], p[1], p[2]), n: n / len });
                }
                Ok((v, Vec::new()))
            }
        }
    }
}

/// Maps samples to the isotropic model, returning indices of samples whose
/// normal sits at the south pole.
pub fn to_isotropic(samples: &[SurfaceSample]) -> (Vec<IsotropicSample>, Vec<usize>) {
    let mut out = Vec::with_capacity(samples.len());
    let mut skipped = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match sample_to_isotropic(s) {
            Ok(q) => out.push(q),
            Err(_) => skipped.push(i),
        }
    }
    (out, skipped)
}

/// Jets of either an analytic graph or a scattered fit.
#[derive(Debug, Clone)]
pub enum JetField {
    Exact(ExprAst),
    Fitted(ScatteredJets),
}

impl JetField {
    pub fn exact(f: &str) -> Result<Self, PipelineError> {
        parse_expression(f)
            .map(JetField::Exact)
            .map_err(|e| PipelineError::Parse(format!("{f}: {e}")))
    }

    pub fn fitted(samples: Vec<IsotropicSample>, cfg: ScatterFitConfig) -> Self {
        JetField::Fitted(ScatteredJets::new(samples, cfg))
    }
}

impl JetSource for JetField {
    fn jet_at(&self, x: f64, y: f64) -> Result<Jet4, JetError> {
        match self {
            JetField::Exact(a) => a.jet_at(x, y),
            JetField::Fitted(s) => s.jet_at(x, y),
        }
    }
}

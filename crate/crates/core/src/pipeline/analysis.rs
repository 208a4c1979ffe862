//! End-to-end analysis runs and their reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::perturb::{perturb_normals, PerturbSpec};
use super::source::{to_isotropic, JetField, SurfaceSource};
use super::PipelineError;
use crate::classify::{
    classify_field_with, millability_check, FieldResult, FieldTest, FieldVerdict, GridSpec, Millability,
    SurfaceClass, ToolParams, DEFAULT_TOL,
};
use crate::contact::SolveConfig;
use crate::isomap::{align_to_mean_normal, Orientation};
use crate::jets::{JetSource, ScatterFitConfig};
use crate::reconstruct::{build_cone_at_with, ConeBuild, ToolBounds};

pub const SCHEMA: &str = "cone-flank/1";

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub source: SurfaceSource,
    #[serde(default)]
    pub tests: Vec<FieldTest>,
    /// Cone opening angle in degrees.
    #[serde(default)]
    pub theta_deg: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub orientation: Orientation,
    pub grid: GridSpec,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    /// Extra points where cones are built.
    #[serde(default)]
    pub cone_points: Vec<[f64; 2]>,
    /// Also build cones at every grid node.
    #[serde(default)]
    pub cones_on_grid: bool,
    /// `[r_min, r_max]` for the tool length check; unbounded when absent.
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
    #[serde(default)]
    pub millability: bool,
    /// Rotate sampled sources so their mean normal is `(0, 0, 1)`.
    #[serde(default)]
    pub align: bool,
    #[serde(default)]
    pub fit: ScatterFitConfig,
    #[serde(default)]
    pub perturb: Option<PerturbSpec>,
    /// Root solver settings for cone tests and cone building.
    #[serde(default)]
    pub solve: SolveConfig,
}

impl AnalysisConfig {
    pub fn new(source: SurfaceSource, grid: GridSpec) -> Self {
        AnalysisConfig {
            source,
            tests: Vec::new(),
            theta_deg: None,
            radius: None,
            orientation: Orientation::Inward,
            grid,
            tolerance: DEFAULT_TOL,
            cone_points: Vec::new(),
            cones_on_grid: false,
            bounds: None,
            millability: false,
            align: false,
            fit: ScatterFitConfig::default(),
            perturb: None,
            solve: SolveConfig::default(),
        }
    }

    pub fn tool(&self) -> ToolParams {
        ToolParams {
            theta: self.theta_deg.map(f64::to_radians),
            radius: self.radius,
            orientation: self.orientation,
        }
    }

    fn tool_bounds(&self) -> ToolBounds {
        match self.bounds {
            Some([a, b]) => ToolBounds { r_min: a, r_max: b },
            None => ToolBounds { r_min: 0.0, r_max: f64::MAX },
        }
    }

    fn wants_cones(&self) -> bool {
        self.cones_on_grid || !self.cone_points.is_empty()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let tool = self.tool();
        let needs_theta = self.tests.contains(&FieldTest::Cone) || self.wants_cones();
        if needs_theta {
            tool.theta().map_err(|e| PipelineError::Config(format!("cone analysis: {e}")))?;
        }
        if self.tests.iter().any(|t| matches!(t, FieldTest::Cylinder | FieldTest::Pipe)) {
            tool.radius().map_err(|e| PipelineError::Config(format!("cylinder/pipe analysis: {e}")))?;
        }
        if self.wants_cones() {
            self.tool_bounds()
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if !(self.tolerance > 0.0) {
            return Err(PipelineError::Config(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.perturb.is_some() && !self.source.is_sampled() {
            return Err(PipelineError::Config("perturbation needs a sampled source".into()));
        }
        if self.grid.nodes().is_empty() {
            return Err(PipelineError::Config("grid has no nodes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    #[serde(flatten)]
    pub field: FieldResult,
    pub p50: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MillabilitySummary {
    pub verdict: Millability,
    pub penetrates: usize,
    pub candidate: usize,
    pub excluded_by_star: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub verdict: Verdict,
    /// Classes whose test held.
    pub holds: Vec<SurfaceClass>,
    pub flags: Vec<String>,
}

impl Summary {
    /// `holds (cone-envelope, pipe)` style label.
    pub fn label(&self) -> String {
        let base = match self.verdict {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Error => "error",
        };
        if self.holds.is_empty() {
            return base.to_string();
        }
        let names: Vec<String> = self
            .holds
            .iter()
            .map(|c| serde_json::to_value(c).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .collect();
        format!("{base} ({})", names.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the source as canonical JSON.
    pub input_sha256: String,
    pub config: AnalysisConfig,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool: ToolParams,
    pub tests: Vec<TestReport>,
    pub cones: Vec<ConeBuild>,
    pub millability: Option<MillabilitySummary>,
    /// Row-major rotation applied to sampled sources.
    pub alignment: Option<[[f64; 3]; 3]>,
    pub summary: Summary,
    pub errors: Vec<StageError>,
    pub provenance: Provenance,
}

impl Report {
    /// 0 when the requested tests hold, 2 when one fails, 1 on errors.
    pub fn exit_code(&self) -> i32 {
        match self.summary.verdict {
            Verdict::Holds => 0,
            Verdict::Fails => 2,
            Verdict::Error => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per test node and one per cone.
    pub fn to_csv(&self) -> Result<String, PipelineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| PipelineError::Io(e.to_string());
        w.write_record([
            "record", "test", "index", "x", "y", "holds", "residual", "vertex_x", "vertex_y", "vertex_z", "axis_x",
            "axis_y", "axis_z", "feasible", "error",
        ])
        .map_err(io)?;
        let f = |v: f64| v.to_string();
        for t in &self.tests {
            let name = serde_json::to_value(t.field.test)
                .ok()
                .and_then(|v| v.get("test").and_then(|s| s.as_str()).map(String::from))
                .unwrap_or_default();
            for n in &t.field.nodes {
                let (holds, res) = match &n.verdict {
                    Some(v) => (v.holds.to_string(), f(v.residual)),
                    None => (String::new(), String::new()),
                };
                let mut row = vec!["node".into(), name.clone(), n.index.to_string(), f(n.x), f(n.y), holds, res];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(n.error.clone().unwrap_or_default());
                w.write_record(&row).map_err(io)?;
            }
        }
        for (i, b) in self.cones.iter().enumerate() {
            for c in &b.cones {
                let row = vec![
                    "cone".into(),
                    String::new(),
                    i.to_string(),
                    f(b.x),
                    f(b.y),
                    String::new(),
                    f(c.c3.abs()),
                    f(c.vertex.x),
                    f(c.vertex.y),
                    f(c.vertex.z),
                    f(c.axis.x),
                    f(c.axis.y),
                    f(c.axis.z),
                    c.feasible.to_string(),
                    String::new(),
                ];
                w.write_record(&row).map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| PipelineError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| PipelineError::Io(e.to_string()))
    }
}

pub fn source_hash(source: &SurfaceSource) -> String {
    let body = serde_json::to_vec(source).expect("source serializes");
    hex::encode(Sha256::digest(&body))
}

fn nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

fn class_of(t: FieldTest) -> SurfaceClass {
    match t {
        FieldTest::Developable => SurfaceClass::Developable,
        FieldTest::Ruled => SurfaceClass::Ruled,
        FieldTest::Cone => SurfaceClass::ConeEnvelope,
        FieldTest::Cylinder => SurfaceClass::CylinderEnvelope,
        FieldTest::Channel => SurfaceClass::Channel,
        FieldTest::Pipe => SurfaceClass::Pipe,
    }
}

/// Builds the jet provider for a config, recording non-fatal sampling issues.
pub fn prepare_jets(
    config: &AnalysisConfig,
    errors: &mut Vec<StageError>,
) -> Result<(JetField, Option<[[f64; 3]; 3]>), PipelineError> {
    let mut note = |stage: &str, message: String| errors.push(StageError { stage: stage.into(), message });
    match &config.source {
        SurfaceSource::IsotropicExpr { f } => Ok((JetField::exact(f)?, None)),
        src => {
            let (mut samples, degenerate) = src.samples()?;
            for d in &degenerate {
                note("sample", format!("degenerate normal at (s, t) = ({}, {})", d.s, d.t));
            }
            if let Some(p) = &config.perturb {
                samples = perturb_normals(&samples, p)?;
            }
            let mut alignment = None;
            if config.align {
                let (rot, aligned) = align_to_mean_normal(&samples).map_err(|e| PipelineError::Input(e.to_string()))?;
                let m = rot.matrix();
                alignment = Some([0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]));
                samples = aligned;
            }
            let (iso, skipped) = to_isotropic(&samples);
            if !skipped.is_empty() {
                note("isotropic", format!("{} samples with normal at the south pole skipped", skipped.len()));
            }
            Ok((JetField::fitted(iso, config.fit), alignment))
        }
    }
}

pub fn run_analysis(config: &AnalysisConfig) -> Result<Report, PipelineError> {
    config.validate()?;
    let mut errors = Vec::new();
    let (jets, alignment) = prepare_jets(config, &mut errors)?;
    let tool = config.tool();

    let mut tests = Vec::new();
    for &t in &config.tests {
        let field = classify_field_with(&jets, t, &tool, &config.grid, config.tolerance, &config.solve)?;
        let residuals: Vec<f64> = field
            .nodes
            .iter()
            .filter_map(|n| n.verdict.as_ref().map(|v| v.residual))
            .collect();
        let failed = field.nodes.iter().filter(|n| n.error.is_some()).count();
        if failed > 0 {
            errors.push(StageError {
                stage: "classify".into(),
                message: format!("{failed} nodes without a jet or verdict for {t:?}"),
            });
        }
        tests.push(TestReport {
            p50: nearest_rank(&residuals, 0.5),
            max: residuals.iter().copied().reduce(f64::max),
            field,
        });
    }

    let mut points: Vec<(f64, f64)> = config.cone_points.iter().map(|p| (p[0], p[1])).collect();
    if config.cones_on_grid {
        points.extend(config.grid.nodes());
    }
    let bounds = config.tool_bounds();
    let built: Vec<Result<ConeBuild, String>> = points
        .par_iter()
        .map(|&(x, y)| {
            let j = jets.jet_at(x, y).map_err(|e| e.to_string())?;
            build_cone_at_with(x, y, &j, &tool, &bounds, &config.solve).map_err(|e| e.to_string())
        })
        .collect();
    let mut cones = Vec::new();
    for (b, &(x, y)) in built.into_iter().zip(&points) {
        match b {
            Ok(c) => cones.push(c),
            Err(e) => errors.push(StageError { stage: "cones".into(), message: format!("at ({x}, {y}): {e}") }),
        }
    }

    let millability = if config.millability {
        let verdicts: Vec<Option<Millability>> = config
            .grid
            .nodes()
            .par_iter()
            .map(|&(x, y)| jets.jet_at(x, y).ok().map(|j| millability_check(&j)))
            .collect();
        let count = |m: Millability| verdicts.iter().filter(|v| **v == Some(m)).count();
        let (p, c, e) = (
            count(Millability::Penetrates),
            count(Millability::Candidate),
            count(Millability::ExcludedByStar),
        );
        if p + c + e == 0 {
            errors.push(StageError { stage: "millability".into(), message: "no node produced a jet".into() });
            None
        } else {
            let verdict = if p > 0 {
                Millability::Penetrates
            } else if c > 0 {
                Millability::Candidate
            } else {
                Millability::ExcludedByStar
            };
            Some(MillabilitySummary { verdict, penetrates: p, candidate: c, excluded_by_star: e })
        }
    } else {
        None
    };

    let mut flags = Vec::new();
    if let Some(m) = &millability {
        flags.push(
            serde_json::to_value(m.verdict)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        );
    }
    let holds: Vec<SurfaceClass> = tests
        .iter()
        .filter(|t| t.field.verdict == FieldVerdict::Holds)
        .map(|t| class_of(t.field.test))
        .collect();
    let verdict = if tests.iter().any(|t| t.field.verdict == FieldVerdict::NoData) {
        Verdict::Error
    } else if tests.iter().any(|t| t.field.verdict == FieldVerdict::Fails) {
        Verdict::Fails
    } else if tests.is_empty() && !points.is_empty() && cones.is_empty() {
        Verdict::Error
    } else {
        Verdict::Holds
    };

    Ok(Report {
        schema: SCHEMA.into(),
        tool,
        tests,
        cones,
        millability,
        alignment,
        summary: Summary { verdict, holds, flags },
        errors,
        provenance: Provenance {
            input_sha256: source_hash(&config.source),
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}

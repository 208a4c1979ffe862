//! Input handling, analysis runs, reports, mesh export and the noise
//! stability experiment.

pub mod analysis;
pub mod mesh;
pub mod perturb;
pub mod source;
pub mod stability;

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::reconstruct::ReconstructError;

pub use analysis::{run_analysis, AnalysisConfig, Report, StageError, Summary, Verdict, SCHEMA};
pub use mesh::{import_obj, surface_grid, trace_to_design, ObjWriter, FRUSTUM_SEGMENTS};
pub use perturb::{perturb_normals, tangent_frame, PerturbSpec};
pub use source::{sample_parametric, JetField, ParamGrid, SurfaceSource};
pub use stability::{run_stability, StabilityConfig, StabilityReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("noise magnitude {0} is negative")]
    NegativeNoise(f64),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
}

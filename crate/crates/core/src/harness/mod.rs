//! Training loop, evaluation metrics, reporting, and FLOP estimation —
//! the operational surface behind the CLI.

pub mod checkpoint;
mod config;
mod evaluate;
mod flops;
mod optim;
mod report;
mod trainer;

pub use config::{Dtype, EvalMode, EvalParams, RoundParams, TrainConfig, TrainParams};
pub use evaluate::{evaluate, image_metrics, EvalArtifacts, EvalReport, MetricSet, RuntimeStats};
pub use flops::{conv_macs, flops_estimate, FlopsReport, NcaStageFlops};
pub use optim::Adam;
pub use report::write_report;
pub use trainer::{
    build_networks, load_depth_network, train, NanReport, TrainOutcome, TrainSession,
};

use crate::geometry::GeometryError;
use crate::scene::SceneError;
use crate::tensor::TensorError;

/// Harness-level error; the CLI maps `Config` to exit code 2 and
/// `Numerical` to exit code 3.
#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    /// Training aborted on a non-finite loss; diagnostics were dumped.
    Numerical(String),
    Io(String),
    Geometry(GeometryError),
    Scene(SceneError),
    Tensor(TensorError),
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarnessError::Config(msg) => write!(f, "config error: {msg}"),
            HarnessError::Numerical(msg) => write!(f, "numerical abort: {msg}"),
            HarnessError::Io(msg) => write!(f, "io error: {msg}"),
            HarnessError::Geometry(e) => write!(f, "{e}"),
            HarnessError::Scene(e) => write!(f, "{e}"),
            HarnessError::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<GeometryError> for HarnessError {
    fn from(e: GeometryError) -> Self {
        HarnessError::Geometry(e)
    }
}

impl From<SceneError> for HarnessError {
    fn from(e: SceneError) -> Self {
        HarnessError::Scene(e)
    }
}

impl From<TensorError> for HarnessError {
    fn from(e: TensorError) -> Self {
        HarnessError::Tensor(e)
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl HarnessError {
    /// Process exit code contract: 0 success, 2 config error, 3 numerical
    /// abort, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

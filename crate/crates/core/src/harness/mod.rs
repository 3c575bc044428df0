//! Experiment orchestration: configuration, studies and persisted results.

pub mod config;
pub mod io;
pub mod studies;

use thiserror::Error;

use crate::cole_hopf::ChemError;
use crate::evolve::StepError;
use crate::field::FieldError;
use crate::flux_diag::DiagError;
use crate::init_data::InitError;

pub use config::{ConfigError, ExperimentConfig, StudyKind};
pub use studies::{
    prepare, run_cross_validate, run_delta_sweep, run_refinement, run_single, run_theta_scan,
    CrossValRow, DeltaSweep, Prepared, Refinement, SingleRun, ThetaRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Study(String),
}

impl HarnessError {
    /// Process exit status for a failed command: 2 for configuration
    /// problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Init(_) => 2,
            _ => 1,
        }
    }
}

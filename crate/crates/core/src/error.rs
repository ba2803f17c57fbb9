use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fleet must contain at least one vehicle")]
    EmptyFleet,
    #[error("vehicle {id}: {reason}")]
    InvalidVehicle { id: usize, reason: String },
    #[error("time grid: {0}")]
    InvalidGrid(String),
    #[error("thermal parameters: {0}")]
    InvalidThermal(String),
    #[error("tariff: {0}")]
    InvalidTariff(String),
    #[error("scenario set: {0}")]
    InvalidScenarios(String),
    #[error("grid limit must be positive, got {0}")]
    InvalidGridLimit(f64),
    #[error("negative base solar value {value} at step {step}")]
    NegativeSolar { step: usize, value: f64 },
    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("{path}: horizon not covered (data spans {first:.2}h to {last:.2}h, need {start:.2}h to {end:.2}h)")]
    HorizonNotCovered { path: PathBuf, first: f64, last: f64, start: f64, end: f64 },
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Problem(#[from] coldcharge_milp::ProblemError),
    #[error("model is infeasible: {0}")]
    Infeasible(String),
    #[error("no feasible schedule found within the time limit ({0})")]
    NoIncumbent(String),
    #[error("model is unbounded")]
    Unbounded,
    #[error("schedule violates {what} by {amount:.3e}")]
    Violation { what: String, amount: f64 },
    #[error("formulations disagree: per-scenario binaries {per_scenario}, shared binaries {shared}")]
    Equivalence { per_scenario: f64, shared: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

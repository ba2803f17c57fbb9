//! Station model, thermal-aware charging scheduler, decentralized solver and
//! baseline schemes for a solar-powered charging station in cold weather.

pub mod baselines;
pub mod config;
pub mod decentral;
pub mod domain;
pub mod error;
#[cfg(test)]
mod fixtures;
pub mod generate;
pub mod metrics;
pub mod model;
pub mod schedule;
pub mod thermal;
pub mod timeseries;

pub use baselines::{run_instant_chg_heat, run_no_heat, run_smart_chg_heat, ReservationPolicy, DEFAULT_RATIOS};
pub use config::{Instance, StationConfig};
pub use domain::{build_tou_tariff, BigM, ScenarioSet, StationModel, Tariff, ThermalParams, TimeGrid, VehicleSpec};
pub use decentral::{run_decentralized, run_decentralized_with_report, DecentOptions, DecentReport};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, compute_metrics_for, CostBasis, MetricsReport};
pub use model::{
    build_centralized, check_rule_equivalence, schedule_objective, solve_centralized, solve_centralized_from, BuildOptions,
    CentralOptions, RuleForm, VariableMap,
};
pub use schedule::{FeasibilityReport, Schedule, VehicleTrajectory};

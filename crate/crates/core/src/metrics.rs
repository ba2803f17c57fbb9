//! Scheme-level statistics: unmet SoC, cost per kWh, heating overhead and
//! solar usage. Every quantity is a probability-weighted expectation over the
//! scenarios; rates are ratios of expectations.

use serde::{Deserialize, Serialize};

use crate::domain::{ScenarioSet, StationModel};
use crate::schedule::Schedule;

/// Which energy the charging cost is divided by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostBasis {
    /// Energy delivered into the batteries, `η_chg·Σ p_chg·Δt`.
    #[default]
    Battery,
    /// Energy drawn by the chargers, `Σ p_chg·Δt`.
    Plug,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: String,
    pub instance: String,
    /// Total SoC shortfall at departure, p.u., summed over vehicles.
    pub unmet_soc: f64,
    /// ¢/kWh; `None` when no energy was stored.
    pub charging_cost: Option<f64>,
    /// Heating share of all charging and heating energy, %.
    pub overhead_rate: f64,
    /// Used share of the available solar energy, %.
    pub solar_usage_rate: f64,
    /// Expected electricity cost, ¢.
    pub expected_cost: f64,
    /// Expected energy stored, kWh, on the chosen basis.
    pub stored_energy: f64,
    pub wall_time: f64,
}

pub fn compute_metrics(schedule: &Schedule, model: &StationModel, scen: &ScenarioSet, basis: CostBasis) -> MetricsReport {
    compute_metrics_for(schedule, model, scen, basis, "")
}

pub fn compute_metrics_for(
    schedule: &Schedule,
    model: &StationModel,
    scen: &ScenarioSet,
    basis: CostBasis,
    instance: &str,
) -> MetricsReport {
    let dt = model.grid.dt;
    let eff = match basis {
        CostBasis::Battery => model.thermal.eta_chg,
        CostBasis::Plug => 1.0,
    };
    let (mut unmet, mut chg, mut heat) = (0.0, 0.0, 0.0);
    for (v, traj) in model.fleet.iter().zip(&schedule.vehicles) {
        for (w, pi) in scen.prob.iter().enumerate() {
            unmet += pi * (v.soc_dep_req - traj.final_soc(w)).max(0.0);
            chg += pi * traj.p_chg[w].iter().sum::<f64>() * dt;
            heat += pi * traj.p_heat[w].iter().sum::<f64>() * dt;
        }
    }
    let (mut used, mut avail) = (0.0, 0.0);
    for (w, pi) in scen.prob.iter().enumerate() {
        used += pi * schedule.p_pv[w].iter().sum::<f64>() * dt;
        avail += pi * scen.pv_cap[w].iter().sum::<f64>() * dt;
    }
    let cost = schedule.grid_cost(model, scen);
    let stored = eff * chg;
    let pct = |num: f64, den: f64| if den > 1e-12 { (100.0 * num / den).clamp(0.0, 100.0) } else { 0.0 };
    MetricsReport {
        scheme: schedule.scheme.clone(),
        instance: instance.to_string(),
        unmet_soc: unmet,
        charging_cost: (stored > 1e-9).then(|| cost / stored),
        overhead_rate: pct(heat, chg + heat),
        solar_usage_rate: pct(used, avail),
        expected_cost: cost,
        stored_energy: stored,
        wall_time: schedule.wall_time,
    }
}

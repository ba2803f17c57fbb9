//! Charging and heating schedules, replay and feasibility checks.
//!
//! Powers are stored per scenario. Schemes that commit to one plan before the
//! solar and temperature outcome is known store identical rows for every
//! scenario; simulated baselines react to each scenario and may differ.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{ScenarioSet, StationModel};
use crate::error::{Error, Result};
use crate::thermal::{charging_cap, floor_start, heating_cap, simulate_vehicle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrajectory {
    pub id: usize,
    pub ta: usize,
    pub td: usize,
    /// Charging power, kW, `[scenario][step]` over the whole horizon.
    pub p_chg: Vec<Vec<f64>>,
    /// Heating power, kW, `[scenario][step]` over the whole horizon.
    pub p_heat: Vec<Vec<f64>>,
    /// SoC at steps `ta..=td`, `[scenario][step − ta]`.
    pub soc: Vec<Vec<f64>>,
    /// Battery temperature at steps `ta..=td`, `[scenario][step − ta]`.
    pub temp: Vec<Vec<f64>>,
}

impl VehicleTrajectory {
    pub fn final_soc(&self, w: usize) -> f64 {
        *self.soc[w].last().expect("window is non-empty")
    }

    /// True when every scenario shares the same powers.
    pub fn is_here_and_now(&self) -> bool {
        self.p_chg.windows(2).all(|p| p[0] == p[1]) && self.p_heat.windows(2).all(|p| p[0] == p[1])
    }
}

/// Largest violation of each constraint family. All entries are ≥ 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub grid_limit: f64,
    pub vehicle_power: f64,
    pub outside_window: f64,
    pub negative_power: f64,
    pub soc_box: f64,
    pub temp_box: f64,
    pub heating_cap: f64,
    pub charging_cap: f64,
    /// Excess of charging power over `μ_chg·T` while below the setpoint.
    pub low_temp_rule: f64,
    /// Expected total SoC shortfall at departure.
    pub unmet_soc: f64,
}

impl FeasibilityReport {
    /// Worst violation among the station-wide constraints and the per-vehicle
    /// bounds that every scheme honors.
    pub fn system_violation(&self) -> (&'static str, f64) {
        [
            ("grid limit", self.grid_limit),
            ("vehicle power limit", self.vehicle_power),
            ("parking window", self.outside_window),
            ("power sign", self.negative_power),
        ]
        .into_iter()
        .fold(("none", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    /// Worst violation among the battery thermal constraints.
    pub fn thermal_violation(&self) -> (&'static str, f64) {
        [
            ("SoC box", self.soc_box),
            ("temperature box", self.temp_box),
            ("heating limit", self.heating_cap),
            ("charging limit", self.charging_cap),
            ("low-temperature charging rule", self.low_temp_rule),
        ]
        .into_iter()
        .fold(("none", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    /// Largest difference between the optimizer's own SoC and temperature
    /// values and the simulated trajectories; `None` for simulated schemes.
    #[serde(default)]
    pub state_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub scheme: String,
    pub dt: f64,
    pub vehicles: Vec<VehicleTrajectory>,
    /// Grid draw, kW, `[scenario][step]`.
    pub p_grid: Vec<Vec<f64>>,
    /// Solar power used, kW, `[scenario][step]`.
    pub p_pv: Vec<Vec<f64>>,
    /// Expected electricity cost, ¢.
    pub expected_cost: f64,
    pub wall_time: f64,
    pub solver: SolverInfo,
    pub feasibility: FeasibilityReport,
}

/// Powers of one vehicle, `[scenario][step]`.
pub type PowerRows = Vec<Vec<f64>>;

impl Schedule {
    /// Builds a schedule from per-scenario powers by simulating SoC and
    /// temperature. Solar is used first; the grid supplies the rest.
    pub fn from_powers(
        scheme: &str,
        model: &StationModel,
        scen: &ScenarioSet,
        p_chg: Vec<PowerRows>,
        p_heat: Vec<PowerRows>,
    ) -> Self {
        let n = model.grid.n_steps;
        let n_scen = scen.n_scen();
        let mut vehicles = Vec::with_capacity(model.fleet.len());
        let mut demand = vec![vec![0.0; n]; n_scen];
        for ((v, chg), heat) in model.fleet.iter().zip(p_chg).zip(p_heat) {
            let mut soc = Vec::with_capacity(n_scen);
            let mut temp = Vec::with_capacity(n_scen);
            for w in 0..n_scen {
                let (s, x) = simulate_vehicle(v, &model.thermal, model.grid.dt, &scen.temp_amb[w], &chg[w], &heat[w]);
                soc.push(s);
                temp.push(x);
                for t in 0..n {
                    demand[w][t] += chg[w][t] + heat[w][t];
                }
            }
            vehicles.push(VehicleTrajectory { id: v.id, ta: v.ta, td: v.td, p_chg: chg, p_heat: heat, soc, temp });
        }
        let mut p_grid = vec![vec![0.0; n]; n_scen];
        let mut p_pv = vec![vec![0.0; n]; n_scen];
        for w in 0..n_scen {
            for t in 0..n {
                p_pv[w][t] = scen.pv_cap[w][t].min(demand[w][t]);
                p_grid[w][t] = (demand[w][t] - scen.pv_cap[w][t]).max(0.0);
            }
        }
        let mut s = Schedule {
            scheme: scheme.to_string(),
            dt: model.grid.dt,
            vehicles,
            p_grid,
            p_pv,
            expected_cost: 0.0,
            wall_time: 0.0,
            solver: SolverInfo::default(),
            feasibility: FeasibilityReport::default(),
        };
        s.expected_cost = s.grid_cost(model, scen);
        s.feasibility = s.check(model, scen);
        s
    }

    /// Same as [`Schedule::from_powers`] for powers shared by all scenarios,
    /// indexed `[vehicle][step]`.
    pub fn from_shared_powers(
        scheme: &str,
        model: &StationModel,
        scen: &ScenarioSet,
        p_chg: Vec<Vec<f64>>,
        p_heat: Vec<Vec<f64>>,
    ) -> Self {
        let w = scen.n_scen();
        let rep = |rows: Vec<Vec<f64>>| rows.into_iter().map(|r| vec![r; w]).collect();
        Self::from_powers(scheme, model, scen, rep(p_chg), rep(p_heat))
    }

    pub fn n_scen(&self) -> usize {
        self.p_grid.len()
    }

    /// Σ_w π_w Σ_t λ_t p_grid Δt.
    pub fn grid_cost(&self, model: &StationModel, scen: &ScenarioSet) -> f64 {
        let price = &model.tariff.price_per_step;
        scen.prob
            .iter()
            .zip(&self.p_grid)
            .map(|(pi, row)| pi * row.iter().zip(price).map(|(p, l)| p * l * self.dt).sum::<f64>())
            .sum()
    }

    /// Total demand of all vehicles, `[scenario][step]`.
    pub fn demand(&self) -> Vec<Vec<f64>> {
        let n = self.p_grid.first().map_or(0, Vec::len);
        let mut d = vec![vec![0.0; n]; self.n_scen()];
        for v in &self.vehicles {
            for (w, row) in d.iter_mut().enumerate() {
                for (t, x) in row.iter_mut().enumerate() {
                    *x += v.p_chg[w][t] + v.p_heat[w][t];
                }
            }
        }
        d
    }

    /// Largest difference between the stored SoC and temperature trajectories
    /// and a fresh simulation from the stored powers.
    pub fn replay_error(&self, model: &StationModel, scen: &ScenarioSet) -> f64 {
        let mut err: f64 = 0.0;
        for (v, traj) in model.fleet.iter().zip(&self.vehicles) {
            for w in 0..self.n_scen() {
                let (soc, temp) =
                    simulate_vehicle(v, &model.thermal, model.grid.dt, &scen.temp_amb[w], &traj.p_chg[w], &traj.p_heat[w]);
                if soc.len() != traj.soc[w].len() || temp.len() != traj.temp[w].len() {
                    return f64::INFINITY;
                }
                for (a, b) in soc.iter().zip(&traj.soc[w]).chain(temp.iter().zip(&traj.temp[w])) {
                    err = err.max((a - b).abs());
                }
            }
        }
        err
    }

    pub fn check(&self, model: &StationModel, scen: &ScenarioSet) -> FeasibilityReport {
        let th = &model.thermal;
        let mut r = FeasibilityReport::default();
        let demand = self.demand();
        for w in 0..self.n_scen() {
            for t in 0..model.grid.n_steps {
                r.grid_limit = r.grid_limit.max(self.p_grid[w][t] - model.pg_max);
                // Balance holds by construction unless solar was overused.
                r.grid_limit = r.grid_limit.max(self.p_pv[w][t] - scen.pv_cap[w][t]);
                r.grid_limit = r.grid_limit.max((self.p_pv[w][t] + self.p_grid[w][t] - demand[w][t]).abs());
            }
        }
        for (v, traj) in model.fleet.iter().zip(&self.vehicles) {
            let mut unmet = 0.0;
            for w in 0..self.n_scen() {
                let (chg, heat) = (&traj.p_chg[w], &traj.p_heat[w]);
                for t in 0..model.grid.n_steps {
                    r.negative_power = r.negative_power.max(-chg[t]).max(-heat[t]);
                    if !v.is_plugged(t) {
                        r.outside_window = r.outside_window.max(chg[t].abs()).max(heat[t].abs());
                        continue;
                    }
                    r.vehicle_power = r.vehicle_power.max(chg[t] + heat[t] - v.p_total_max);
                    let temp = traj.temp[w][t - v.ta];
                    r.heating_cap = r.heating_cap.max(heat[t] - heating_cap(temp, v));
                    r.charging_cap = r.charging_cap.max(chg[t] - charging_cap(temp, v));
                    if temp < th.t_set - 1e-6 {
                        r.low_temp_rule = r.low_temp_rule.max(chg[t] - (th.mu_chg * temp).max(0.0));
                    }
                }
                let first = floor_start(v, th, model.grid.dt, &scen.temp_amb[w]);
                for (k, (&s, &x)) in traj.soc[w].iter().zip(&traj.temp[w]).enumerate() {
                    r.soc_box = r.soc_box.max(-s).max(s - 1.0);
                    if k > 0 {
                        r.temp_box = r.temp_box.max(x - th.t_hi);
                    }
                    if k >= first {
                        r.temp_box = r.temp_box.max(th.t_lo - x);
                    }
                }
                unmet += scen.prob[w] * (v.soc_dep_req - traj.final_soc(w)).max(0.0);
            }
            r.unmet_soc += unmet;
        }
        r
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Writes `vehicle_<id>.csv` files into `dir` with columns
    /// `step, hour, p_chg, p_heat, soc, temp_w0, temp_w1, ...` for steps
    /// `ta..=td`. Powers and SoC are probability-weighted over scenarios,
    /// which for here-and-now schedules is the common value.
    pub fn write_vehicle_csvs(&self, dir: &Path, model: &StationModel, scen: &ScenarioSet) -> Result<()> {
        let io = |e: std::io::Error, p: &Path| Error::Io { path: p.to_path_buf(), source: e };
        std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
        for traj in &self.vehicles {
            let path = dir.join(format!("vehicle_{}.csv", traj.id));
            let mut out = String::from("step,hour,p_chg,p_heat,soc");
            for w in 0..self.n_scen() {
                out.push_str(&format!(",temp_w{w}"));
            }
            out.push('\n');
            for t in traj.ta..=traj.td {
                let k = t - traj.ta;
                let mean = |f: &dyn Fn(usize) -> f64| scen.prob.iter().enumerate().map(|(w, p)| p * f(w)).sum::<f64>();
                let (chg, heat) = if t < traj.td {
                    (mean(&|w| traj.p_chg[w][t]), mean(&|w| traj.p_heat[w][t]))
                } else {
                    (0.0, 0.0)
                };
                let soc = mean(&|w| traj.soc[w][k]);
                out.push_str(&format!("{t},{},{chg},{heat},{soc}", model.grid.hour_of(t)));
                for w in 0..self.n_scen() {
                    out.push_str(&format!(",{}", traj.temp[w][k]));
                }
                out.push('\n');
            }
            let mut f = std::fs::File::create(&path).map_err(|e| io(e, &path))?;
            f.write_all(out.as_bytes()).map_err(|e| io(e, &path))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{scenarios, station, vehicle};

    fn warm() -> (StationModel, ScenarioSet) {
        let model = station(vec![vehicle(0, 1, 4, 0.5, 20.0), vehicle(1, 0, 3, 0.6, 18.0)], vec![10.0, 20.0, 30.0, 10.0], 6.0);
        let scen = scenarios(vec![vec![1.0, 2.0, 0.0, 0.0], vec![0.0, 3.0, 1.0, 0.0]], &[20.0, 10.0]);
        (model, scen)
    }

    #[test]
    fn solar_is_used_before_the_grid() {
        let (model, scen) = warm();
        let s = Schedule::from_shared_powers(
            "t",
            &model,
            &scen,
            vec![vec![0.0, 2.0, 2.0, 2.0], vec![1.5, 1.5, 1.5, 0.0]],
            vec![vec![0.0; 4], vec![0.0; 4]],
        );
        assert_eq!(s.p_pv[0], vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(s.p_grid[0], vec![0.5, 1.5, 3.5, 2.0]);
        assert_eq!(s.p_pv[1], vec![0.0, 3.0, 1.0, 0.0]);
        assert_eq!(s.p_grid[1], vec![1.5, 0.5, 2.5, 2.0]);
        // ½·(0.5·10 + 1.5·20 + 3.5·30 + 2·10)·0.25 + ½·(1.5·10 + 0.5·20 + 2.5·30 + 2·10)·0.25
        let expected = 0.5 * (5.0 + 30.0 + 105.0 + 20.0) * 0.25 + 0.5 * (15.0 + 10.0 + 75.0 + 20.0) * 0.25;
        assert!((s.expected_cost - expected).abs() < 1e-12);
        assert!(s.vehicles.iter().all(VehicleTrajectory::is_here_and_now));
        assert_eq!(s.replay_error(&model, &scen), 0.0);
        assert_eq!(s.feasibility.system_violation().1, 0.0);
        assert_eq!(s.feasibility.thermal_violation().1, 0.0);
    }

    #[test]
    fn violations_are_reported_by_family() {
        let (model, scen) = warm();
        // Vehicle 0 charges before it arrives and both overload the station.
        let s = Schedule::from_shared_powers(
            "t",
            &model,
            &scen,
            vec![vec![1.0, 7.4, 0.0, 0.0], vec![0.0, 5.0, 0.0, 0.0]],
            vec![vec![0.0; 4], vec![0.0; 4]],
        );
        let r = &s.feasibility;
        assert_eq!(r.outside_window, 1.0);
        // Worst scenario: 12.4 kW demand, 2 kW solar, 6 kW limit.
        assert!((r.grid_limit - 4.4).abs() < 1e-12);
        assert_eq!(s.feasibility.system_violation().0, "grid limit");
    }

    #[test]
    fn cold_charging_breaks_the_rule() {
        let model = station(vec![vehicle(0, 0, 2, 0.5, 5.0)], vec![10.0; 2], 10.0);
        let scen = scenarios(vec![vec![0.0; 2]], &[5.0]);
        let s = Schedule::from_shared_powers("t", &model, &scen, vec![vec![3.0, 0.0]], vec![vec![0.0; 2]]);
        // μ_chg·T = 0.22·5 = 1.1 kW.
        assert!((s.feasibility.low_temp_rule - 1.9).abs() < 1e-12);
        assert_eq!(s.feasibility.thermal_violation().0, "low-temperature charging rule");
    }

    #[test]
    fn freezing_after_the_floor_is_reachable_counts() {
        let model = station(vec![vehicle(0, 0, 3, 0.5, 1.0)], vec![10.0; 3], 10.0);
        let scen = scenarios(vec![vec![0.0; 3]], &[-20.0]);
        let s = Schedule::from_shared_powers("t", &model, &scen, vec![vec![0.0; 3]], vec![vec![0.0; 3]]);
        assert!(s.feasibility.temp_box > 0.0);
        // The arrival temperature alone is never a violation.
        let model = station(vec![vehicle(0, 0, 3, 0.5, -1.0)], vec![10.0; 3], 10.0);
        let scen = scenarios(vec![vec![0.0; 3]], &[20.0]);
        let s = Schedule::from_shared_powers("t", &model, &scen, vec![vec![0.0; 3]], vec![vec![0.5, 0.0, 0.0]]);
        assert_eq!(s.feasibility.temp_box, 0.0);
    }

    #[test]
    fn tampered_states_fail_the_replay() {
        let (model, scen) = warm();
        let mut s = Schedule::from_shared_powers("t", &model, &scen, vec![vec![0.0, 2.0, 2.0, 2.0], vec![0.0; 4]], vec![vec![0.0; 4]; 2]);
        s.vehicles[0].soc[1][2] += 1e-3;
        assert!((s.replay_error(&model, &scen) - 1e-3).abs() < 1e-12);
        s.vehicles[0].temp[0].pop();
        assert_eq!(s.replay_error(&model, &scen), f64::INFINITY);
    }

    #[test]
    fn json_and_csv_output() {
        let (model, scen) = warm();
        let s = Schedule::from_shared_powers("t", &model, &scen, vec![vec![0.0, 2.0, 2.0, 2.0], vec![1.0; 4]], vec![vec![0.0; 4]; 2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        s.write_json(&path).unwrap();
        assert_eq!(Schedule::read_json(&path).unwrap(), s);
        s.write_vehicle_csvs(dir.path(), &model, &scen).unwrap();
        let text = std::fs::read_to_string(dir.path().join("vehicle_0.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,hour,p_chg,p_heat,soc,temp_w0,temp_w1");
        // Steps 1..=4.
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,7.25,2,0,0.5,"));
        assert!(Schedule::read_json(&dir.path().join("missing.json")).is_err());
    }
}

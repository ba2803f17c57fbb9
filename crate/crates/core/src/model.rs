//! Assembly of the thermal-aware charging MILP.
//!
//! Every vehicle contributes a block of variables and rows over its parking
//! window only: powers for steps `ta..td`, SoC and one temperature per
//! scenario for steps `ta..=td`. The station couples the blocks through one
//! power balance row per step and scenario.

use std::time::{Duration, Instant};

use coldcharge_milp::{
    relax, solve_lp, solve_milp_with, LpStatus, MilpOptions, MilpProblem, MilpSolution, MilpStatus, Relation,
};
use serde::{Deserialize, Serialize};

use crate::domain::{ScenarioSet, StationModel, VehicleSpec};
use crate::error::{Error, Result};
use crate::schedule::{Schedule, SolverInfo};
use crate::thermal::{charging_cap, floor_start, heating_cap, simulate_vehicle, StepCoefficients};

/// How the low-temperature charging rule is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleForm {
    /// One indicator per vehicle and step, shared by all scenarios.
    Shared,
    /// One indicator per vehicle, step and scenario.
    PerScenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    /// Allow a penalized shortfall of the departure SoC requirement.
    pub soft_departure: bool,
    /// Penalty per unit of SoC shortfall, ¢.
    pub penalty: f64,
    pub rule: RuleForm,
    /// Enforce the station grid limit (disabled only for diagnosis).
    pub grid_limit: bool,
    /// Enforce the lower temperature bound (disabled only for diagnosis).
    pub temp_floor: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { soft_departure: true, penalty: 10_000.0, rule: RuleForm::Shared, grid_limit: true, temp_floor: true }
    }
}

/// Variable indices of one vehicle's block.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleVars {
    pub ta: usize,
    pub td: usize,
    /// Indexed by `t − ta` for `t` in `ta..td`.
    pub p_chg: Vec<usize>,
    pub p_heat: Vec<usize>,
    /// Indexed by `t − ta` for `t` in `ta..=td`.
    pub soc: Vec<usize>,
    /// `[scenario][t − ta]` for `t` in `ta..=td`.
    pub temp: Vec<Vec<usize>>,
    /// Rule indicators `[group][t − ta − 1]` for `t` in `ta+1..td`. One group
    /// for [`RuleForm::Shared`], one per scenario otherwise.
    pub rule: Vec<Vec<usize>>,
    pub slack: Option<usize>,
}

impl VehicleVars {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.p_chg
            .iter()
            .chain(&self.p_heat)
            .chain(&self.soc)
            .chain(self.temp.iter().flatten())
            .chain(self.rule.iter().flatten())
            .chain(self.slack.iter())
            .copied()
    }

    /// Charging and heating powers over the whole horizon.
    pub fn powers(&self, x: &[f64], n_steps: usize) -> (Vec<f64>, Vec<f64>) {
        let mut chg = vec![0.0; n_steps];
        let mut heat = vec![0.0; n_steps];
        for k in 0..self.p_chg.len() {
            // Clean round-off so powers are exactly non-negative.
            chg[self.ta + k] = x[self.p_chg[k]].max(0.0);
            heat[self.ta + k] = x[self.p_heat[k]].max(0.0);
        }
        (chg, heat)
    }
}

/// Variable indices of the centralized model.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    /// `[scenario][step]`.
    pub p_pv: Vec<Vec<usize>>,
    pub p_grid: Vec<Vec<usize>>,
    pub vehicles: Vec<VehicleVars>,
}

impl VariableMap {
    pub fn indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.p_pv.iter().chain(&self.p_grid).flatten().copied().collect();
        for v in &self.vehicles {
            all.extend(v.indices());
        }
        all
    }
}

/// Adds one vehicle's variables and constraints. `cost[t]` is the objective
/// coefficient of both powers at step `t`, in ¢/kW.
pub fn add_vehicle_block(
    p: &mut MilpProblem,
    model: &StationModel,
    scen: &ScenarioSet,
    i: usize,
    cost: &[f64],
    opts: &BuildOptions,
) -> VehicleVars {
    let v: &VehicleSpec = &model.fleet[i];
    let th = &model.thermal;
    let dt = model.grid.dt;
    let n_scen = scen.n_scen();
    let k_len = v.td - v.ta;
    let coef = StepCoefficients::new(th, v.thermal_mass(th), dt);
    let t_floor = if opts.temp_floor { th.t_lo } else { f64::NEG_INFINITY };
    let id = v.id;
    // Before the floor is reachable the battery is below freezing in that
    // scenario, so the rule forbids charging there.
    let starts: Vec<usize> = scen.temp_amb.iter().map(|amb| floor_start(v, th, dt, amb)).collect();
    let no_charge_until = starts.iter().copied().max().unwrap_or(1);

    let mut p_chg = Vec::with_capacity(k_len);
    let mut p_heat = Vec::with_capacity(k_len);
    for k in 0..k_len {
        let t = v.ta + k;
        let (chg_hi, heat_hi) = if k == 0 {
            // The arrival temperature is known, so its limits are constants.
            let mut c = charging_cap(v.temp_arr, v);
            if v.temp_arr < th.t_set {
                c = c.min((th.mu_chg * v.temp_arr).max(0.0));
            }
            (c.min(v.p_total_max), heating_cap(v.temp_arr, v).min(v.p_total_max))
        } else if k < no_charge_until {
            (0.0, v.p_total_max)
        } else {
            (v.p_total_max, v.p_total_max)
        };
        p_chg.push(p.lp.add_named_var(format!("p_chg[{id},{t}]"), 0.0, chg_hi, cost[t]));
        p_heat.push(p.lp.add_named_var(format!("p_heat[{id},{t}]"), 0.0, heat_hi, cost[t]));
        p.lp.add_constraint(vec![(p_chg[k], 1.0), (p_heat[k], 1.0)], Relation::Le, v.p_total_max);
    }

    let mut soc = Vec::with_capacity(k_len + 1);
    for k in 0..=k_len {
        let t = v.ta + k;
        let (lo, hi) = if k == 0 {
            (v.soc_arr, v.soc_arr)
        } else if k == k_len && !opts.soft_departure {
            (v.soc_dep_req.max(0.0), 1.0)
        } else {
            (0.0, 1.0)
        };
        soc.push(p.lp.add_named_var(format!("soc[{id},{t}]"), lo, hi, 0.0));
    }
    let gain = th.eta_chg * dt / v.capacity_kwh;
    for k in 0..k_len {
        p.lp.add_constraint(vec![(soc[k + 1], 1.0), (soc[k], -1.0), (p_chg[k], -gain)], Relation::Eq, 0.0);
    }
    let slack = if opts.soft_departure {
        let s = p.lp.add_named_var(format!("shortfall[{id}]"), 0.0, f64::INFINITY, opts.penalty);
        p.lp.add_constraint(vec![(soc[k_len], 1.0), (s, 1.0)], Relation::Ge, v.soc_dep_req);
        Some(s)
    } else {
        None
    };

    let mut temp = Vec::with_capacity(n_scen);
    for w in 0..n_scen {
        let mut row = Vec::with_capacity(k_len + 1);
        for k in 0..=k_len {
            let t = v.ta + k;
            let (lo, hi) = match k {
                0 => (v.temp_arr, v.temp_arr),
                k if k < starts[w] => (f64::NEG_INFINITY, th.t_hi),
                _ => (t_floor, th.t_hi),
            };
            row.push(p.lp.add_named_var(format!("T[{id},{t},{w}]"), lo, hi, 0.0));
        }
        for k in 0..k_len {
            let t = v.ta + k;
            p.lp.add_constraint(
                vec![(row[k + 1], 1.0), (row[k], -coef.a), (p_heat[k], -coef.b_heat), (p_chg[k], -coef.b_chg)],
                Relation::Eq,
                coef.b_amb * scen.temp_amb[w][t],
            );
        }
        for k in 1..k_len {
            p.lp.add_constraint(vec![(p_heat[k], 1.0), (row[k], v.beta_heat)], Relation::Le, v.ph_bar);
            p.lp.add_constraint(vec![(p_chg[k], 1.0), (row[k], -v.beta_chg)], Relation::Le, v.pc_bar);
        }
        temp.push(row);
    }

    let groups = match opts.rule {
        RuleForm::Shared => 1,
        RuleForm::PerScenario => n_scen,
    };
    let (m_t, m_p) = (model.big_m.temp, model.big_m.power);
    let mut rule = Vec::with_capacity(groups);
    for g in 0..groups {
        let mut ind = Vec::with_capacity(k_len.saturating_sub(1));
        for k in 1..k_len {
            let t = v.ta + k;
            let name = match opts.rule {
                RuleForm::Shared => format!("v[{id},{t}]"),
                RuleForm::PerScenario => format!("v[{id},{t},{g}]"),
            };
            let b = p.add_named_binary(name, 0.0);
            let active = match opts.rule {
                RuleForm::Shared => starts.iter().any(|&s| k >= s),
                RuleForm::PerScenario => k >= starts[g],
            };
            if !active {
                // No rows use it; pin it to the value the rule implies.
                p.lp.bounds[b] = (1.0, 1.0);
            }
            ind.push(b);
        }
        rule.push(ind);
    }
    for w in 0..n_scen {
        let g = if opts.rule == RuleForm::Shared { 0 } else { w };
        for k in starts[w].max(1)..k_len {
            let b = rule[g][k - 1];
            let x = temp[w][k];
            // Below the setpoint the indicator must be on ...
            p.lp.add_constraint(vec![(b, m_t), (x, 1.0)], Relation::Ge, th.t_set);
            // ... and then charging is limited to μ_chg·T.
            p.lp.add_constraint(vec![(p_chg[k], 1.0), (x, -th.mu_chg), (b, m_p)], Relation::Le, m_p);
        }
    }

    VehicleVars { ta: v.ta, td: v.td, p_chg, p_heat, soc, temp, rule, slack }
}

/// Writes the values implied by one vehicle's powers into its block of `x`:
/// powers, simulated SoC and temperatures, the rule indicators and the
/// departure shortfall. `chg` and `heat` are indexed by absolute step.
pub fn fill_vehicle_block(
    x: &mut [f64],
    vv: &VehicleVars,
    model: &StationModel,
    scen: &ScenarioSet,
    i: usize,
    chg: &[f64],
    heat: &[f64],
) {
    let v = &model.fleet[i];
    let th = &model.thermal;
    for k in 0..vv.p_chg.len() {
        x[vv.p_chg[k]] = chg[v.ta + k];
        x[vv.p_heat[k]] = heat[v.ta + k];
    }
    let mut cold = vec![vec![false; vv.p_chg.len()]; scen.n_scen()];
    let mut final_soc = v.soc_arr;
    for (w, amb) in scen.temp_amb.iter().enumerate() {
        let (soc, temp) = simulate_vehicle(v, th, model.grid.dt, amb, chg, heat);
        for (k, &j) in vv.temp[w].iter().enumerate() {
            x[j] = temp[k];
        }
        for (k, &j) in vv.soc.iter().enumerate() {
            x[j] = soc[k];
        }
        for (k, c) in cold[w].iter_mut().enumerate() {
            *c = temp[k] < th.t_set - 1e-7;
        }
        final_soc = *soc.last().unwrap();
    }
    for (g, ind) in vv.rule.iter().enumerate() {
        for (k1, &j) in ind.iter().enumerate() {
            let on = if vv.rule.len() == 1 { cold.iter().any(|c| c[k1 + 1]) } else { cold[g][k1 + 1] };
            x[j] = if on { 1.0 } else { 0.0 };
        }
    }
    if let Some(s) = vv.slack {
        x[s] = (v.soc_dep_req - final_soc).max(0.0);
    }
}

/// A plan that never charges and heats just enough to keep the battery at
/// the temperature floor in every scenario (full heating while the floor is
/// still out of reach). It satisfies every per-vehicle constraint with the
/// departure shortfall absorbed by the slack.
pub fn heating_only_plan(model: &StationModel, scen: &ScenarioSet, i: usize) -> (Vec<f64>, Vec<f64>) {
    let v = &model.fleet[i];
    let th = &model.thermal;
    let dt = model.grid.dt;
    let coef = StepCoefficients::new(th, v.thermal_mass(th), dt);
    let starts: Vec<usize> = scen.temp_amb.iter().map(|amb| floor_start(v, th, dt, amb)).collect();
    let n = model.grid.n_steps;
    let (chg, mut heat) = (vec![0.0; n], vec![0.0; n]);
    let mut temps = vec![v.temp_arr; scen.n_scen()];
    for (k, t) in v.window().enumerate() {
        let mut cap = v.p_total_max;
        let mut need: f64 = 0.0;
        for (w, &x) in temps.iter().enumerate() {
            cap = cap.min(heating_cap(x, v));
            let target = if k + 1 < starts[w] { f64::INFINITY } else { th.t_lo + 1e-3 };
            need = need.max((target - coef.a * x - coef.b_amb * scen.temp_amb[w][t]) / coef.b_heat);
        }
        heat[t] = need.clamp(0.0, cap);
        for (w, x) in temps.iter_mut().enumerate() {
            *x = coef.a * *x + coef.b_heat * heat[t] + coef.b_amb * scen.temp_amb[w][t];
        }
    }
    (chg, heat)
}

/// Builds the centralized model: expected grid cost over all scenarios with
/// per-scenario grid draw and solar use as recourse.
pub fn build_centralized(
    model: &StationModel,
    scen: &ScenarioSet,
    opts: &BuildOptions,
) -> Result<(MilpProblem, VariableMap)> {
    model.validate_with(scen)?;
    let n = model.grid.n_steps;
    let n_scen = scen.n_scen();
    let mut p = MilpProblem::new(Default::default());
    let grid_hi = if opts.grid_limit { model.pg_max } else { f64::INFINITY };

    let mut p_pv = vec![Vec::with_capacity(n); n_scen];
    let mut p_grid = vec![Vec::with_capacity(n); n_scen];
    for w in 0..n_scen {
        for t in 0..n {
            let c = scen.prob[w] * model.tariff.price_per_step[t] * model.grid.dt;
            p_pv[w].push(p.lp.add_named_var(format!("p_pv[{t},{w}]"), 0.0, scen.pv_cap[w][t], 0.0));
            p_grid[w].push(p.lp.add_named_var(format!("p_grid[{t},{w}]"), 0.0, grid_hi, c));
        }
    }
    let zero = vec![0.0; n];
    let vehicles: Vec<VehicleVars> =
        (0..model.fleet.len()).map(|i| add_vehicle_block(&mut p, model, scen, i, &zero, opts)).collect();

    for w in 0..n_scen {
        for t in 0..n {
            let mut row = vec![(p_pv[w][t], 1.0), (p_grid[w][t], 1.0)];
            for vv in &vehicles {
                if (vv.ta..vv.td).contains(&t) {
                    row.push((vv.p_chg[t - vv.ta], -1.0));
                    row.push((vv.p_heat[t - vv.ta], -1.0));
                }
            }
            p.lp.add_constraint(row, Relation::Eq, 0.0);
        }
    }
    Ok((p, VariableMap { p_pv, p_grid, vehicles }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CentralOptions {
    /// Wall-clock limit for the whole solve.
    #[serde(with = "secs")]
    pub time_limit: Duration,
    pub gap_tol: f64,
    pub build: BuildOptions,
}

impl Default for CentralOptions {
    fn default() -> Self {
        Self { time_limit: Duration::from_secs(60), gap_tol: 1e-4, build: BuildOptions::default() }
    }
}

pub(crate) mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// Largest difference between the solver's SoC and temperature values in one
/// vehicle block and a simulation of the block's powers.
pub fn block_state_gap(vv: &VehicleVars, x: &[f64], model: &StationModel, scen: &ScenarioSet, i: usize) -> f64 {
    let (chg, heat) = vv.powers(x, model.grid.n_steps);
    let mut gap: f64 = 0.0;
    for (w, row) in vv.temp.iter().enumerate() {
        let (soc, temp) =
            simulate_vehicle(&model.fleet[i], &model.thermal, model.grid.dt, &scen.temp_amb[w], &chg, &heat);
        for (k, &j) in row.iter().enumerate() {
            gap = gap.max((x[j] - temp[k]).abs());
            gap = gap.max((x[vv.soc[k]] - soc[k]).abs());
        }
    }
    gap
}

pub(crate) fn solver_info(sol: &MilpSolution) -> SolverInfo {
    SolverInfo {
        status: format!("{:?}", sol.status),
        objective: sol.has_solution().then_some(sol.objective),
        bound: sol.bound.is_finite().then_some(sol.bound),
        gap: sol.gap.is_finite().then_some(sol.gap),
        nodes: sol.nodes,
        state_gap: None,
    }
}

/// Solves the centralized model and returns the schedule of the best solution
/// found within the time limit.
pub fn solve_centralized(model: &StationModel, scen: &ScenarioSet, opts: &CentralOptions) -> Result<Schedule> {
    solve_centralized_from(model, scen, opts, None)
}

/// Variable values of the centralized model for a schedule whose powers are
/// shared by all scenarios (the first scenario's rows are used).
pub fn central_point(p: &MilpProblem, map: &VariableMap, model: &StationModel, scen: &ScenarioSet, s: &Schedule) -> Vec<f64> {
    let mut x = vec![0.0; p.lp.n_vars()];
    let n = model.grid.n_steps;
    let mut demand = vec![0.0; n];
    for (i, (vv, traj)) in map.vehicles.iter().zip(&s.vehicles).enumerate() {
        fill_vehicle_block(&mut x, vv, model, scen, i, &traj.p_chg[0], &traj.p_heat[0]);
        for t in 0..n {
            demand[t] += traj.p_chg[0][t] + traj.p_heat[0][t];
        }
    }
    for w in 0..scen.n_scen() {
        for t in 0..n {
            let pv = scen.pv_cap[w][t].min(demand[t]);
            x[map.p_pv[w][t]] = pv;
            x[map.p_grid[w][t]] = demand[t] - pv;
        }
    }
    x
}

/// Like [`solve_centralized`], optionally starting from a known schedule with
/// scenario-independent powers. An infeasible start is ignored.
pub fn solve_centralized_from(
    model: &StationModel,
    scen: &ScenarioSet,
    opts: &CentralOptions,
    initial: Option<&Schedule>,
) -> Result<Schedule> {
    let start = Instant::now();
    let (p, map) = build_centralized(model, scen, &opts.build)?;
    let initial_solution = initial.map(|s| central_point(&p, &map, model, scen, s));
    let milp_opts = MilpOptions {
        time_limit: opts.time_limit,
        gap_tol: opts.gap_tol,
        initial_solution,
        ..MilpOptions::default()
    };
    let sol = solve_milp_with(&p, &milp_opts)?;
    match sol.status {
        MilpStatus::Optimal | MilpStatus::Feasible => {}
        MilpStatus::Infeasible => return Err(Error::Infeasible(diagnose(model, scen, &opts.build))),
        MilpStatus::Unbounded => return Err(Error::Unbounded),
        MilpStatus::TimeLimit => {
            return Err(Error::NoIncumbent(format!(
                "{} nodes in {:.1}s, best bound {:.4}",
                sol.nodes, sol.wall_time, sol.bound
            )))
        }
    }
    let n = model.grid.n_steps;
    let (chg, heat): (Vec<_>, Vec<_>) = map.vehicles.iter().map(|vv| vv.powers(&sol.x, n)).unzip();
    let mut schedule = Schedule::from_shared_powers("tcsc-central", model, scen, chg, heat);
    let gap = (0..map.vehicles.len())
        .map(|i| block_state_gap(&map.vehicles[i], &sol.x, model, scen, i))
        .fold(0.0, f64::max);
    if gap > 1e-5 {
        return Err(Error::Violation { what: "agreement between solver states and replay".into(), amount: gap });
    }
    schedule.solver = SolverInfo { state_gap: Some(gap), ..solver_info(&sol) };
    schedule.wall_time = start.elapsed().as_secs_f64();
    Ok(schedule)
}

/// The centralized objective evaluated on a schedule: expected grid cost plus
/// the shortfall penalty.
pub fn schedule_objective(schedule: &Schedule, model: &StationModel, scen: &ScenarioSet, opts: &BuildOptions) -> f64 {
    let mut shortfall = 0.0;
    for (v, traj) in model.fleet.iter().zip(&schedule.vehicles) {
        for (w, pi) in scen.prob.iter().enumerate() {
            shortfall += pi * (v.soc_dep_req - traj.final_soc(w)).max(0.0);
        }
    }
    let penalty = if opts.soft_departure { opts.penalty } else { 0.0 };
    schedule.grid_cost(model, scen) + penalty * shortfall
}

/// Names the first constraint family whose relaxation makes the model
/// feasible, checked on the LP relaxation.
pub fn diagnose(model: &StationModel, scen: &ScenarioSet, opts: &BuildOptions) -> String {
    let attempts: [(&str, BuildOptions); 3] = [
        ("departure SoC requirement", BuildOptions { soft_departure: true, ..*opts }),
        ("battery temperature lower bound", BuildOptions { soft_departure: true, temp_floor: false, ..*opts }),
        ("station grid limit", BuildOptions { soft_departure: true, temp_floor: false, grid_limit: false, ..*opts }),
    ];
    for (family, relaxed) in attempts {
        let Ok((p, _)) = build_centralized(model, scen, &relaxed) else { continue };
        if let Ok(sol) = solve_lp(&relax(&p)) {
            if sol.status == LpStatus::Optimal {
                return format!("{family} cannot be met; relaxing it restores feasibility");
            }
        }
    }
    "no single constraint family explains the infeasibility".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub shared: f64,
    pub per_scenario: f64,
    pub shared_binaries: usize,
    pub per_scenario_binaries: usize,
}

/// Solves a small instance with both rule linearizations to optimality and
/// checks that their objectives agree within 1e-5 absolute.
pub fn check_rule_equivalence(model: &StationModel, scen: &ScenarioSet) -> Result<EquivalenceReport> {
    let solve = |rule: RuleForm| -> Result<(f64, usize)> {
        let build = BuildOptions { rule, ..BuildOptions::default() };
        let (p, _) = build_centralized(model, scen, &build)?;
        let opts = MilpOptions { time_limit: Duration::from_secs(120), gap_tol: 0.0, ..MilpOptions::default() };
        let sol = solve_milp_with(&p, &opts)?;
        match sol.status {
            MilpStatus::Optimal => Ok((sol.objective, p.binaries.len())),
            MilpStatus::Infeasible => Err(Error::Infeasible(diagnose(model, scen, &build))),
            other => Err(Error::NoIncumbent(format!("{other:?}"))),
        }
    };
    let (shared, shared_binaries) = solve(RuleForm::Shared)?;
    let (per_scenario, per_scenario_binaries) = solve(RuleForm::PerScenario)?;
    if (shared - per_scenario).abs() > 1e-5 {
        return Err(Error::Equivalence { per_scenario, shared });
    }
    Ok(EquivalenceReport { shared, per_scenario, shared_binaries, per_scenario_binaries })
}

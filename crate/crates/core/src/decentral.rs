//! Decentralized solution by reduced-order dual decomposition.
//!
//! The station-wide grid limit is relaxed with one multiplier per step. The
//! per-scenario limits collapse into one row per step by assuming the worst
//! solar outcome, `ĥat p_pv_t = min(min_w p̄v_tw, demand_t)`, so every vehicle
//! solves a small MILP priced at `λ_t + α_t`. After the subgradient phase a
//! few flexible vehicles are rescheduled jointly against the remaining
//! capacity to restore feasibility.
//!
//! Priced at `λ_t + α_t` alone the vehicles never see the solar array. By
//! default a second multiplier `μ_t` relaxes `ĥat p_pv_t ≤ demand_t`, the
//! condition that guaranteed solar is only worth something when it is
//! consumed, and the price becomes `λ_t + α_t − μ_t`. With
//! [`DecentOptions::solar_multiplier`] off `μ` stays zero.

use std::path::Path;
use std::time::{Duration, Instant};

use coldcharge_milp::{Basis, MilpOptions, MilpProblem, MilpStatus, Relation};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ScenarioSet, StationModel};
use crate::error::{Error, Result};
use crate::model::{
    add_vehicle_block, block_state_gap, fill_vehicle_block, heating_only_plan, schedule_objective, secs, BuildOptions, VehicleVars,
};
use crate::schedule::{Schedule, SolverInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecentOptions {
    /// Subgradient step sizes tried one after another, ¢/kWh per kW.
    pub step_sizes: Vec<f64>,
    /// Iterations per step size, including the shared first one.
    pub max_iter: usize,
    /// Dual-phase budget per vehicle; the phase may use this times the fleet
    /// size in total.
    #[serde(with = "secs")]
    pub dual_time_per_vehicle: Duration,
    /// Rescheduling budget per vehicle, counted the same way.
    #[serde(with = "secs")]
    pub reschedule_time_per_vehicle: Duration,
    /// Relative gap at which each vehicle MILP stops.
    pub gap_tol: f64,
    /// Price guaranteed solar through the multiplier `μ`.
    pub solar_multiplier: bool,
    /// Best-response passes over the fleet after rescheduling, each block
    /// against the exact expected cost given the others' plans.
    pub refine_sweeps: usize,
    /// Vehicles re-optimized together in each best-response step; blocks are
    /// consecutive in fleet order, wrapping around.
    pub refine_block: usize,
    pub build: BuildOptions,
}

impl Default for DecentOptions {
    fn default() -> Self {
        Self {
            step_sizes: vec![0.01, 0.05, 0.1, 0.5],
            max_iter: 50,
            dual_time_per_vehicle: Duration::from_secs(10),
            reschedule_time_per_vehicle: Duration::from_secs(5),
            gap_tol: 1e-4,
            solar_multiplier: true,
            refine_sweeps: 1,
            refine_block: 2,
            build: BuildOptions::default(),
        }
    }
}

impl DecentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.step_sizes.is_empty() {
            return Err(Error::InvalidOption("at least one step size is required".into()));
        }
        if let Some(s) = self.step_sizes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidOption(format!("step sizes must be positive, got {s}")));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidOption("max_iter must be at least 1".into()));
        }
        if self.refine_block == 0 {
            return Err(Error::InvalidOption("refine_block must be at least 1".into()));
        }
        Ok(())
    }
}

/// Multipliers and subgradients of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// Grid-limit multipliers, ¢/kWh per step, never negative.
    pub alpha: Vec<f64>,
    /// Excess demand per step, kW.
    pub delta: Vec<f64>,
    /// Solar-use multipliers, ¢/kWh per step, never negative.
    pub mu: Vec<f64>,
    /// Subgradient of `μ`: guaranteed solar the relaxation would take minus
    /// demand, kW.
    pub surplus: Vec<f64>,
    pub iteration: usize,
    pub step_size: f64,
}

impl DualState {
    pub fn new(n_steps: usize, step_size: f64) -> Self {
        let zero = vec![0.0; n_steps];
        Self { alpha: zero.clone(), delta: zero.clone(), mu: zero.clone(), surplus: zero, iteration: 0, step_size }
    }

    /// Vehicle prices `max(0, λ_t + α_t − μ_t)`, ¢/kWh.
    pub fn prices(&self, tariff: &[f64]) -> Vec<f64> {
        (0..tariff.len()).map(|t| (tariff[t] + self.alpha[t] - self.mu[t]).max(0.0)).collect()
    }

    /// Records the subgradients of the plans priced at this state.
    pub fn observe(&mut self, delta: Vec<f64>, demand: &[f64], scen: &ScenarioSet, tariff: &[f64], solar: bool) {
        self.delta = delta;
        self.surplus = (0..demand.len())
            .map(|t| {
                if !solar {
                    return 0.0;
                }
                // The relaxation takes all guaranteed solar while it is
                // priced below the energy it displaces.
                let taken = if self.mu[t] < tariff[t] + self.alpha[t] { scen.min_pv(t) } else { 0.0 };
                taken - demand[t]
            })
            .collect();
    }
}

/// Projected subgradient step `α_t ← max(0, α_t + s·δ_t)`, and the same for
/// `μ` with its own subgradient.
pub fn dual_update(state: &DualState) -> DualState {
    let s = state.step_size;
    let step = |x: &[f64], g: &[f64]| -> Vec<f64> { x.iter().zip(g).map(|(a, d)| (a + s * d).max(0.0)).collect() };
    DualState {
        alpha: step(&state.alpha, &state.delta),
        delta: state.delta.clone(),
        mu: step(&state.mu, &state.surplus),
        surplus: state.surplus.clone(),
        iteration: state.iteration + 1,
        step_size: s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePlan {
    pub id: usize,
    /// kW over the whole horizon.
    pub p_chg: Vec<f64>,
    pub p_heat: Vec<f64>,
    /// Objective of the problem that produced the plan, ¢.
    pub objective: f64,
    /// Departure SoC shortfall, p.u.
    pub shortfall: f64,
    /// Largest difference between the MILP's own SoC and temperature values
    /// and a simulation of the plan.
    pub state_gap: f64,
}

impl VehiclePlan {
    pub fn demand(&self, t: usize) -> f64 {
        self.p_chg[t] + self.p_heat[t]
    }

}

fn total_demand(plans: &[VehiclePlan], n: usize) -> Vec<f64> {
    (0..n).map(|t| plans.iter().map(|p| p.demand(t)).sum()).collect()
}

/// Solar power available in every scenario and usable by the current demand.
pub fn hat_ppv(plans: &[VehiclePlan], scen: &ScenarioSet) -> Vec<f64> {
    let n = scen.pv_cap.first().map_or(0, Vec::len);
    total_demand(plans, n).iter().enumerate().map(|(t, d)| scen.min_pv(t).min(*d)).collect()
}

/// `δ_t = demand_t − ĥat p_pv_t − p̄g`.
pub fn compute_excess(plans: &[VehiclePlan], hat: &[f64], pg_max: f64) -> Vec<f64> {
    total_demand(plans, hat.len()).iter().zip(hat).map(|(d, h)| d - h - pg_max).collect()
}

/// Flexibility indices `Σ_t max(δ_t, 0)·demand_it`, as `(plan index, FL)`
/// sorted by decreasing FL and then by vehicle id.
pub fn flexibility_rank(plans: &[VehiclePlan], delta: &[f64]) -> Vec<(usize, f64)> {
    let mut fl: Vec<(usize, f64)> = plans
        .iter()
        .enumerate()
        .map(|(i, p)| (i, delta.iter().enumerate().map(|(t, d)| d.max(0.0) * p.demand(t)).sum()))
        .collect();
    fl.sort_by(|a, b| b.1.total_cmp(&a.1).then(plans[a.0].id.cmp(&plans[b.0].id)));
    fl
}

/// Greedy choice of balancing vehicles. Each round takes the most flexible
/// remaining vehicle and removes its demand from the excess, until no step
/// is congested. Returns plan indices in selection order.
pub fn select_balancing(plans: &[VehiclePlan], delta: &[f64]) -> Vec<usize> {
    let mut delta = delta.to_vec();
    let mut chosen: Vec<usize> = Vec::new();
    while delta.iter().any(|d| *d > 1e-9) {
        let rest: Vec<VehiclePlan> =
            plans.iter().enumerate().filter(|(i, _)| !chosen.contains(i)).map(|(_, p)| p.clone()).collect();
        let index: Vec<usize> = (0..plans.len()).filter(|i| !chosen.contains(i)).collect();
        let Some(&(best, fl)) = flexibility_rank(&rest, &delta).first() else { break };
        if fl <= 0.0 {
            break;
        }
        let i = index[best];
        for (t, d) in delta.iter_mut().enumerate() {
            *d -= plans[i].demand(t);
        }
        chosen.push(i);
    }
    chosen
}

/// Expected grid cost of the worst-solar proxy, `Σ_t λ_t (demand_t − ĥat_t) Δt`.
pub fn proxy_objective(plans: &[VehiclePlan], model: &StationModel, scen: &ScenarioSet) -> f64 {
    let n = model.grid.n_steps;
    let d = total_demand(plans, n);
    let hat = hat_ppv(plans, scen);
    (0..n).map(|t| model.tariff.price_per_step[t] * (d[t] - hat[t]) * model.grid.dt).sum()
}

/// Expected grid cost of the same powers with solar used per scenario.
pub fn expected_objective(plans: &[VehiclePlan], model: &StationModel, scen: &ScenarioSet) -> f64 {
    let n = model.grid.n_steps;
    let d = total_demand(plans, n);
    let mut cost = 0.0;
    for (w, pi) in scen.prob.iter().enumerate() {
        for t in 0..n {
            cost += pi * model.tariff.price_per_step[t] * (d[t] - scen.pv_cap[w][t]).max(0.0) * model.grid.dt;
        }
    }
    cost
}

/// One vehicle's MILP with reusable warm-start state.
struct VehicleSub {
    index: usize,
    problem: MilpProblem,
    vars: VehicleVars,
    x: Option<Vec<f64>>,
    basis: Option<Basis>,
    nodes: usize,
}

impl VehicleSub {
    fn new(model: &StationModel, scen: &ScenarioSet, i: usize, build: &BuildOptions) -> Self {
        let mut problem = MilpProblem::new(Default::default());
        let zero = vec![0.0; model.grid.n_steps];
        let vars = add_vehicle_block(&mut problem, model, scen, i, &zero, build);
        Self { index: i, problem, vars, x: None, basis: None, nodes: 0 }
    }

    fn set_prices(&mut self, model: &StationModel, prices: &[f64]) {
        let dt = model.grid.dt;
        for (k, (&c, &h)) in self.vars.p_chg.iter().zip(&self.vars.p_heat).enumerate() {
            let t = self.vars.ta + k;
            let price = prices[t] * dt;
            self.problem.lp.objective[c] = price;
            self.problem.lp.objective[h] = price;
        }
    }

    fn fallback(&self, model: &StationModel, scen: &ScenarioSet) -> Vec<f64> {
        let (chg, heat) = heating_only_plan(model, scen, self.index);
        let mut x = vec![0.0; self.problem.lp.n_vars()];
        fill_vehicle_block(&mut x, &self.vars, model, scen, self.index, &chg, &heat);
        x
    }

    fn solve(
        &mut self,
        model: &StationModel,
        scen: &ScenarioSet,
        prices: &[f64],
        time_limit: Duration,
        gap_tol: f64,
    ) -> Result<VehiclePlan> {
        self.set_prices(model, prices);
        let opts = MilpOptions {
            time_limit,
            gap_tol,
            // The feasible set does not depend on α, so the last plan is a
            // valid incumbent for the next prices.
            initial_solution: self.x.clone(),
            root_basis: self.basis.clone(),
            ..MilpOptions::default()
        };
        let sol = coldcharge_milp::solve_milp_with(&self.problem, &opts)?;
        self.nodes += sol.nodes;
        let x = match sol.status {
            MilpStatus::Optimal | MilpStatus::Feasible => sol.x,
            MilpStatus::TimeLimit => self.fallback(model, scen),
            MilpStatus::Infeasible => {
                return Err(Error::Infeasible(format!("vehicle {} cannot be scheduled on its own", model.fleet[self.index].id)))
            }
            MilpStatus::Unbounded => return Err(Error::Unbounded),
        };
        if sol.root_basis.is_some() {
            self.basis = sol.root_basis;
        }
        let plan = self.plan(model, scen, &x);
        self.x = Some(x);
        Ok(plan)
    }

    fn plan(&self, model: &StationModel, scen: &ScenarioSet, x: &[f64]) -> VehiclePlan {
        let (p_chg, p_heat) = self.vars.powers(x, model.grid.n_steps);
        VehiclePlan {
            id: model.fleet[self.index].id,
            p_chg,
            p_heat,
            objective: self.problem.lp.objective_value(x),
            shortfall: self.vars.slack.map_or(0.0, |s| x[s].max(0.0)),
            state_gap: block_state_gap(&self.vars, x, model, scen, self.index),
        }
    }
}

/// Solves vehicle `i`'s problem priced at `λ_t + α_t`, within the dual-phase
/// time limit of one vehicle.
pub fn solve_vehicle_sub(
    model: &StationModel,
    scen: &ScenarioSet,
    i: usize,
    alpha: &[f64],
    opts: &DecentOptions,
) -> Result<VehiclePlan> {
    if alpha.len() != model.grid.n_steps || alpha.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::InvalidOption("multipliers must be non-negative, one per step".into()));
    }
    let prices: Vec<f64> = model.tariff.price_per_step.iter().zip(alpha).map(|(l, a)| l + a).collect();
    VehicleSub::new(model, scen, i, &opts.build).solve(model, scen, &prices, opts.dual_time_per_vehicle, opts.gap_tol)
}

/// Jointly reschedules the vehicles `selected` (plan indices) while the
/// others keep their plans:
/// `Σ_{i∈S} demand_it ≤ p̄g + ĥat_t − Σ_{l∉S} demand_lt`.
/// Energy is priced at `prices` (¢/kWh), the tariff for the plain model.
/// Returns `None` when no feasible plan is found within the time limit.
#[allow(clippy::too_many_arguments)]
pub fn reschedule(
    selected: &[usize],
    plans: &[VehiclePlan],
    hat: &[f64],
    prices: &[f64],
    model: &StationModel,
    scen: &ScenarioSet,
    opts: &DecentOptions,
    time_limit: Duration,
) -> Result<Option<Vec<VehiclePlan>>> {
    let build = &opts.build;
    let n = model.grid.n_steps;
    let fleet_index = |p: &VehiclePlan| model.fleet.iter().position(|v| v.id == p.id).expect("plan of a fleet vehicle");
    let cost: Vec<f64> = prices.iter().map(|l| l * model.grid.dt).collect();
    let mut problem = MilpProblem::new(Default::default());
    let blocks: Vec<(usize, VehicleVars)> = selected
        .iter()
        .map(|&s| {
            let i = fleet_index(&plans[s]);
            (i, add_vehicle_block(&mut problem, model, scen, i, &cost, build))
        })
        .collect();
    for t in 0..n {
        let others: f64 = (0..plans.len()).filter(|s| !selected.contains(s)).map(|s| plans[s].demand(t)).sum();
        let rhs = model.pg_max + hat[t] - others;
        let row: Vec<(usize, f64)> = blocks
            .iter()
            .filter(|(_, vv)| (vv.ta..vv.td).contains(&t))
            .flat_map(|(_, vv)| [(vv.p_chg[t - vv.ta], 1.0), (vv.p_heat[t - vv.ta], 1.0)])
            .collect();
        if row.is_empty() {
            if rhs < -1e-9 {
                return Ok(None);
            }
            continue;
        }
        problem.lp.add_constraint(row, Relation::Le, rhs);
    }
    let mut x0 = vec![0.0; problem.lp.n_vars()];
    for (i, vv) in &blocks {
        let (chg, heat) = heating_only_plan(model, scen, *i);
        fill_vehicle_block(&mut x0, vv, model, scen, *i, &chg, &heat);
    }
    let milp = MilpOptions { time_limit, gap_tol: opts.gap_tol, initial_solution: Some(x0), ..MilpOptions::default() };
    let sol = coldcharge_milp::solve_milp_with(&problem, &milp)?;
    if !sol.has_solution() {
        return Ok(None);
    }
    let out = blocks
        .iter()
        .map(|(i, vv)| {
            let (p_chg, p_heat) = vv.powers(&sol.x, n);
            VehiclePlan {
                id: model.fleet[*i].id,
                p_chg,
                p_heat,
                objective: vv.indices().map(|j| problem.lp.objective[j] * sol.x[j]).sum(),
                shortfall: vv.slack.map_or(0.0, |s| sol.x[s].max(0.0)),
                state_gap: block_state_gap(vv, &sol.x, model, scen, *i),
            }
        })
        .collect();
    Ok(Some(out))
}

/// Replans the vehicles in `block` (fleet indices) jointly against the exact
/// expected grid cost with every other vehicle fixed: per scenario and step
/// the grid draw covers the total demand not met by that scenario's solar and
/// stays within the grid limit. Starts from the current plans, so the result
/// is never worse when they are feasible. `None` when nothing feasible is
/// found.
pub fn best_response(
    block: &[usize],
    plans: &[VehiclePlan],
    model: &StationModel,
    scen: &ScenarioSet,
    opts: &DecentOptions,
    time_limit: Duration,
) -> Result<Option<Vec<VehiclePlan>>> {
    let dt = model.grid.dt;
    let n = model.grid.n_steps;
    let zero = vec![0.0; n];
    let mut problem = MilpProblem::new(Default::default());
    let blocks: Vec<VehicleVars> =
        block.iter().map(|&i| add_vehicle_block(&mut problem, model, scen, i, &zero, &opts.build)).collect();
    let mut x0 = vec![0.0; problem.lp.n_vars()];
    for (&i, vv) in block.iter().zip(&blocks) {
        fill_vehicle_block(&mut x0, vv, model, scen, i, &plans[i].p_chg, &plans[i].p_heat);
    }
    for t in 0..n {
        let present: Vec<(usize, &VehicleVars)> =
            block.iter().zip(&blocks).filter(|(_, vv)| (vv.ta..vv.td).contains(&t)).map(|(&i, vv)| (i, vv)).collect();
        if present.is_empty() {
            continue;
        }
        let others: f64 =
            plans.iter().enumerate().filter(|(l, _)| !block.contains(l)).map(|(_, p)| p.demand(t)).sum();
        let mine: f64 = present.iter().map(|(i, _)| plans[*i].demand(t)).sum();
        for (w, pi) in scen.prob.iter().enumerate() {
            let price = pi * model.tariff.price_per_step[t] * dt;
            let g = problem.lp.add_var(0.0, model.pg_max, price);
            // g ≥ others + Σ (p_chg + p_heat) − p̄v
            let mut row = vec![(g, 1.0)];
            for (_, vv) in &present {
                row.push((vv.p_chg[t - vv.ta], -1.0));
                row.push((vv.p_heat[t - vv.ta], -1.0));
            }
            problem.lp.add_constraint(row, Relation::Ge, others - scen.pv_cap[w][t]);
            x0.push((others + mine - scen.pv_cap[w][t]).max(0.0));
        }
    }
    let milp = MilpOptions { time_limit, gap_tol: opts.gap_tol, initial_solution: Some(x0), ..MilpOptions::default() };
    let sol = coldcharge_milp::solve_milp_with(&problem, &milp)?;
    if !sol.has_solution() {
        return Ok(None);
    }
    let out = block
        .iter()
        .zip(&blocks)
        .map(|(&i, vv)| {
            let (p_chg, p_heat) = vv.powers(&sol.x, n);
            VehiclePlan {
                id: model.fleet[i].id,
                p_chg,
                p_heat,
                objective: vv.indices().map(|j| problem.lp.objective[j] * sol.x[j]).sum(),
                shortfall: vv.slack.map_or(0.0, |s| sol.x[s].max(0.0)),
                state_gap: block_state_gap(vv, &sol.x, model, scen, i),
            }
        })
        .collect();
    Ok(Some(out))
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step_size: f64,
    pub iteration: usize,
    pub max_delta: f64,
    pub sum_alpha: f64,
    pub min_alpha: f64,
    pub sum_mu: f64,
    /// Worst-solar proxy cost of the iterate's powers, ¢.
    pub proxy: f64,
    /// Expected cost of the same powers, ¢.
    pub expected: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecentReport {
    pub trace: Vec<TraceRow>,
    /// Stopped at a stationary iterate without congestion.
    pub converged_early: bool,
    /// Step size and iteration of the iterate kept for rescheduling.
    pub best_step_size: Option<f64>,
    pub best_iteration: usize,
    /// Greedy selection rounds; at most the fleet size.
    pub selection_steps: usize,
    /// Ids of the vehicles finally rescheduled.
    pub rescheduled: Vec<usize>,
    /// Vehicles added because the rescheduling problem had no solution.
    pub escalations: usize,
    /// Objective before and after the best-response passes.
    pub objective_before_refine: f64,
    pub objective_after_refine: f64,
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io { path: path.to_path_buf(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(e.into()))?;
    }
    w.flush().map_err(io_err)
}

#[derive(Clone)]
struct Iterate {
    plans: Vec<VehiclePlan>,
    demand: Vec<f64>,
    hat: Vec<f64>,
    delta: Vec<f64>,
    /// Expected cost plus shortfall penalty.
    cost: f64,
    /// Solar-use multipliers the plans were priced with.
    mu: Vec<f64>,
    step_size: Option<f64>,
    iteration: usize,
}

impl Iterate {
    fn new(plans: Vec<VehiclePlan>, model: &StationModel, scen: &ScenarioSet, penalty: f64, state: &DualState) -> Self {
        let demand = total_demand(&plans, model.grid.n_steps);
        let hat = hat_ppv(&plans, scen);
        let delta = compute_excess(&plans, &hat, model.pg_max);
        let cost = expected_objective(&plans, model, scen) + penalty * plans.iter().map(|p| p.shortfall).sum::<f64>();
        let step_size = (state.iteration > 0).then_some(state.step_size);
        Self { plans, demand, hat, delta, cost, mu: state.mu.clone(), step_size, iteration: state.iteration }
    }

    fn violation(&self) -> f64 {
        self.delta.iter().copied().fold(0.0, f64::max)
    }

    fn trace(&self, model: &StationModel, scen: &ScenarioSet, state: &DualState) -> TraceRow {
        TraceRow {
            step_size: state.step_size,
            iteration: self.iteration,
            max_delta: self.delta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sum_alpha: state.alpha.iter().sum(),
            min_alpha: state.alpha.iter().copied().fold(f64::INFINITY, f64::min),
            sum_mu: state.mu.iter().sum(),
            proxy: proxy_objective(&self.plans, model, scen),
            expected: expected_objective(&self.plans, model, scen),
        }
    }

    /// Less excess first; among iterates without excess the cheaper one.
    fn better_than(&self, other: &Iterate) -> bool {
        let (a, b) = (self.violation(), other.violation());
        if a <= 1e-9 && b <= 1e-9 {
            return self.cost < other.cost;
        }
        a < b
    }
}

fn solve_all(
    subs: &mut [VehicleSub],
    model: &StationModel,
    scen: &ScenarioSet,
    prices: &[f64],
    limit: Duration,
    gap_tol: f64,
) -> Result<Vec<VehiclePlan>> {
    subs.par_iter_mut().map(|s| s.solve(model, scen, prices, limit, gap_tol)).collect()
}

pub fn run_decentralized(model: &StationModel, scen: &ScenarioSet, opts: &DecentOptions) -> Result<Schedule> {
    run_decentralized_with_report(model, scen, opts).map(|(s, _)| s)
}

/// Runs the three phases: subgradient iterations for every step size,
/// greedy selection of balancing vehicles, and joint rescheduling.
pub fn run_decentralized_with_report(
    model: &StationModel,
    scen: &ScenarioSet,
    opts: &DecentOptions,
) -> Result<(Schedule, DecentReport)> {
    let start = Instant::now();
    opts.validate()?;
    model.validate_with(scen)?;
    let n = model.grid.n_steps;
    let n_veh = model.fleet.len();
    let tariff = &model.tariff.price_per_step;
    let penalty = if opts.build.soft_departure { opts.build.penalty } else { 0.0 };
    let mut report = DecentReport::default();
    let dual_deadline = start + opts.dual_time_per_vehicle * n_veh as u32;

    let mut subs: Vec<VehicleSub> = (0..n_veh).map(|i| VehicleSub::new(model, scen, i, &opts.build)).collect();
    // The first iteration runs at zero multipliers for every step size;
    // solve it once.
    let initial = DualState::new(n, opts.step_sizes[0]);
    let plans = solve_all(&mut subs, model, scen, tariff, opts.dual_time_per_vehicle, opts.gap_tol)?;
    let first = Iterate::new(plans, model, scen, penalty, &initial);
    let mut best: Option<Iterate> = None;
    let mut converged: Option<Iterate> = None;
    'sizes: for (k, &s) in opts.step_sizes.iter().enumerate() {
        let mut state = DualState { step_size: s, ..initial.clone() };
        state.observe(first.delta.clone(), &first.demand, scen, tariff, opts.solar_multiplier);
        report.trace.push(first.trace(model, scen, &state));
        let now = Instant::now();
        let window = dual_deadline.saturating_duration_since(now) / (opts.step_sizes.len() - k) as u32;
        let run_end = now + window;
        let mut cur = first.clone();
        loop {
            let next = dual_update(&state);
            // Stationary without congestion: the multipliers are optimal.
            if cur.violation() <= 0.0 && state.alpha.iter().all(|a| *a == 0.0) && next.mu == state.mu {
                report.converged_early = true;
                converged = Some(cur);
                break 'sizes;
            }
            let now = Instant::now();
            if next.iteration >= opts.max_iter || now >= run_end {
                break;
            }
            state = next;
            let limit = (run_end - now) / n_veh as u32;
            let plans = solve_all(&mut subs, model, scen, &state.prices(tariff), limit, opts.gap_tol)?;
            cur = Iterate::new(plans, model, scen, penalty, &state);
            state.observe(cur.delta.clone(), &cur.demand, scen, tariff, opts.solar_multiplier);
            report.trace.push(cur.trace(model, scen, &state));
            if best.as_ref().map_or(true, |b| cur.better_than(b)) {
                best = Some(cur.clone());
            }
        }
    }
    let best = match (converged, best) {
        (Some(c), _) => c,
        (None, Some(b)) if !first.better_than(&b) => b,
        _ => first,
    };
    report.best_step_size = best.step_size;
    report.best_iteration = best.iteration;

    let mut plans = best.plans.clone();
    let mut status = "converged";
    let deadline = Instant::now() + opts.reschedule_time_per_vehicle * n_veh as u32;
    if best.violation() > 1e-9 {
        status = "rescheduled";
        let order = select_balancing(&best.plans, &best.delta);
        report.selection_steps = order.len();
        let mut selected = order;
        let ranked: Vec<usize> = flexibility_rank(&best.plans, &best.delta).into_iter().map(|(i, _)| i).collect();
        let prices: Vec<f64> = (0..n).map(|t| (tariff[t] - best.mu[t]).max(0.0)).collect();
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let limit = (opts.reschedule_time_per_vehicle * selected.len() as u32).min(remaining);
            let limit = limit.max(Duration::from_millis(10));
            if let Some(new) = reschedule(&selected, &best.plans, &best.hat, &prices, model, scen, opts, limit)? {
                for (&s, p) in selected.iter().zip(new) {
                    plans[s] = p;
                }
                break;
            }
            let Some(&next) = ranked.iter().find(|i| !selected.contains(i)) else {
                return Err(Error::Infeasible(
                    "rescheduling every vehicle still cannot meet the station grid limit".into(),
                ));
            };
            selected.push(next);
            report.escalations += 1;
        }
        report.rescheduled = selected.iter().map(|&s| best.plans[s].id).collect();
    }

    let objective = |plans: &[VehiclePlan]| {
        expected_objective(plans, model, scen) + penalty * plans.iter().map(|p| p.shortfall).sum::<f64>()
    };
    report.objective_before_refine = objective(&plans);
    let passes = opts.refine_sweeps * n_veh;
    for pass in 0..passes {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            break;
        }
        let block: Vec<usize> = (0..opts.refine_block.min(n_veh)).map(|k| (pass + k) % n_veh).collect();
        let limit = remaining / (passes - pass) as u32;
        if let Some(new) = best_response(&block, &plans, model, scen, opts, limit)? {
            let mut trial = plans.clone();
            for (&i, p) in block.iter().zip(new) {
                trial[i] = p;
            }
            if objective(&trial) < objective(&plans) {
                plans = trial;
            }
        }
    }
    report.objective_after_refine = objective(&plans);

    let state_gap = plans.iter().map(|p| p.state_gap).fold(0.0, f64::max);
    let (chg, heat): (Vec<_>, Vec<_>) = plans.into_iter().map(|p| (p.p_chg, p.p_heat)).unzip();
    let mut schedule = Schedule::from_shared_powers("tcsc-decent", model, scen, chg, heat);
    let (what, amount) = schedule.feasibility.system_violation();
    if amount > 1e-6 {
        return Err(Error::Violation { what: what.into(), amount });
    }
    let (what, amount) = schedule.feasibility.thermal_violation();
    if amount > 1e-6 {
        return Err(Error::Violation { what: what.into(), amount });
    }
    schedule.solver = SolverInfo {
        status: status.into(),
        objective: Some(schedule_objective(&schedule, model, scen, &opts.build)),
        bound: None,
        gap: None,
        nodes: subs.iter().map(|s| s.nodes).sum(),
        state_gap: Some(state_gap),
    };
    schedule.wall_time = start.elapsed().as_secs_f64();
    Ok((schedule, report))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::fixtures::{congested_pair, scenarios, station, vehicle};
    use crate::model::{build_centralized, solve_centralized, CentralOptions};
    use crate::thermal::{charging_cap, heating_cap, rule_cap, simulate_vehicle};

    fn plan(id: usize, chg: Vec<f64>, heat: Vec<f64>) -> VehiclePlan {
        VehiclePlan { id, p_chg: chg, p_heat: heat, objective: 0.0, shortfall: 0.0, state_gap: 0.0 }
    }

    fn quick() -> DecentOptions {
        DecentOptions {
            dual_time_per_vehicle: Duration::from_secs(30),
            reschedule_time_per_vehicle: Duration::from_secs(30),
            max_iter: 15,
            gap_tol: 1e-6,
            ..DecentOptions::default()
        }
    }

    #[test]
    fn hat_ppv_is_the_elementwise_minimum() {
        let scen = scenarios(vec![vec![5.0, 5.0, 2.0], vec![6.0, 7.0, 4.0]], &[0.0, 0.0]);
        let plans = [plan(0, vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 2.0])];
        assert_eq!(hat_ppv(&plans, &scen), vec![0.0, 3.0, 2.0]);
    }

    #[test]
    fn excess_examples() {
        let plans = [plan(0, vec![6.0, 1.0], vec![4.0, 0.0])];
        let delta = compute_excess(&plans, &[2.0, 0.0], 5.0);
        assert_eq!(delta[0], 3.0);
        assert!(delta[1] < 0.0);
    }

    #[test]
    fn dual_update_examples() {
        let mut s = DualState::new(3, 0.1);
        s.alpha = vec![0.0, 0.5, 0.4];
        s.delta = vec![-1.0, 2.0, 0.0];
        let next = dual_update(&s);
        assert_eq!(next.alpha[0], 0.0);
        assert!((next.alpha[1] - 0.7).abs() < 1e-12);
        assert_eq!(next.alpha[2], 0.4);
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn flexibility_examples() {
        let a = plan(3, vec![3.0, 1.0], vec![0.0, 0.0]);
        let b = plan(1, vec![1.5, 0.5], vec![1.0, 0.5]);
        let none = flexibility_rank(&[a.clone(), b.clone()], &[-1.0, 0.0]);
        assert!(none.iter().all(|(_, f)| *f == 0.0));
        // Equal FL: the lower id comes first.
        assert_eq!(none[0].0, 1);
        let fl = flexibility_rank(&[a.clone()], &[2.0, 0.0]);
        assert_eq!(fl[0].1, 6.0);
        let doubled = plan(3, vec![6.0, 2.0], vec![0.0, 0.0]);
        assert_eq!(flexibility_rank(&[doubled], &[2.0, 0.0])[0].1, 12.0);
        assert_eq!(flexibility_rank(&[a, b], &[2.0, 1.0])[0].0, 0);
    }

    #[test]
    fn proxy_on_a_hand_example() {
        let model = station(vec![vehicle(0, 0, 2, 0.5, 20.0)], vec![10.0, 20.0], 10.0);
        let scen = scenarios(vec![vec![1.0, 4.0], vec![3.0, 0.0]], &[20.0, 20.0]);
        let plans = [plan(0, vec![2.0, 2.0], vec![0.0, 0.0])];
        // Worst solar (1, 0): 10·1·0.25 + 20·2·0.25 = 12.5.
        assert!((proxy_objective(&plans, &model, &scen) - 12.5).abs() < 1e-12);
        // Scenarios: 10·1·0.25 + 0 = 2.5 and 0 + 20·2·0.25 = 10; mean 6.25.
        assert!((expected_objective(&plans, &model, &scen) - 6.25).abs() < 1e-12);
    }

    #[test]
    fn zero_multipliers_match_the_isolated_vehicle() {
        let (model, scen) = congested_pair();
        let opts = quick();
        let alpha = vec![0.0; 6];
        for i in 0..2 {
            let sub = solve_vehicle_sub(&model, &scen, i, &alpha, &opts).unwrap();
            // Oracle: the centralized model of this vehicle alone, without
            // solar and without a binding connection limit.
            let alone = StationModel { fleet: vec![model.fleet[i].clone()], pg_max: 1e4, ..model.clone() };
            let dark = ScenarioSet { pv_cap: vec![vec![0.0; 6]; 2], ..scen.clone() };
            let s = solve_centralized(&alone, &dark, &CentralOptions { gap_tol: 1e-9, ..Default::default() }).unwrap();
            let central = s.solver.objective.unwrap();
            assert!((sub.objective - central).abs() < 1e-6 * central.max(1.0), "{} vs {central}", sub.objective);
        }
    }

    #[test]
    fn huge_multipliers_stop_charging() {
        let (model, scen) = congested_pair();
        let sub = solve_vehicle_sub(&model, &scen, 0, &[1e6; 6], &quick()).unwrap();
        assert!(sub.p_chg.iter().all(|p| *p < 1e-9));
        let v = &model.fleet[0];
        assert!((sub.shortfall - (v.soc_dep_req - v.soc_arr)).abs() < 1e-9);
        // Heating only as much as the floor needs.
        let (_, need) = heating_only_plan(&model, &scen, 0);
        let used: f64 = sub.p_heat.iter().sum();
        assert!(used <= need.iter().sum::<f64>() + 1e-3, "{used}");
    }

    /// Per-vehicle feasibility and sub-objective of a 2-step plan.
    fn enumerated_objective(model: &StationModel, scen: &ScenarioSet, prices: &[f64], p: [f64; 4]) -> Option<f64> {
        let v = &model.fleet[0];
        let th = &model.thermal;
        let (chg, heat) = (vec![p[0], p[2]], vec![p[1], p[3]]);
        if chg[0] + heat[0] > v.p_total_max + 1e-9 || chg[1] + heat[1] > v.p_total_max + 1e-9 {
            return None;
        }
        let mut short: f64 = 0.0;
        for amb in &scen.temp_amb {
            let (soc, temp) = simulate_vehicle(v, th, model.grid.dt, amb, &chg, &heat);
            if soc.iter().any(|s| *s > 1.0 + 1e-9) || temp[1..].iter().any(|t| *t < th.t_lo - 1e-9 || *t > th.t_hi + 1e-9) {
                return None;
            }
            for k in 0..2 {
                let cap = rule_cap(temp[k] + 1e-7, v, th).min(charging_cap(temp[k], v));
                if chg[k] > cap + 1e-12 || heat[k] > heating_cap(temp[k], v) + 1e-12 {
                    return None;
                }
            }
            short = (v.soc_dep_req - soc[2]).max(0.0);
        }
        let energy: f64 = (0..2).map(|k| prices[k] * model.grid.dt * (chg[k] + heat[k])).sum();
        Some(energy + 10_000.0 * short)
    }

    #[test]
    fn uniform_shift_keeps_the_feasible_set() {
        let model = station(vec![vehicle(0, 0, 2, 0.6, 12.0)], vec![10.0, 20.0], 1e4);
        let scen = scenarios(vec![vec![0.0, 0.0]], &[5.0]);
        let opts = quick();
        let grid: Vec<f64> = (0..=14).map(|k| 0.5 * k as f64).collect();
        for shift in [0.0, 15.0] {
            let alpha = vec![shift; 2];
            let sub = solve_vehicle_sub(&model, &scen, 0, &alpha, &opts).unwrap();
            let prices = [10.0 + shift, 20.0 + shift];
            let mut best = f64::INFINITY;
            for &a in &grid {
                for &b in &grid {
                    for &c in &grid {
                        for &d in &grid {
                            if let Some(o) = enumerated_objective(&model, &scen, &prices, [a, b, c, d]) {
                                best = best.min(o);
                            }
                        }
                    }
                }
            }
            // The MILP optimum is at least as good as any grid point and is
            // itself a feasible plan.
            assert!(sub.objective <= best + 1e-6, "shift {shift}: {} vs {best}", sub.objective);
            let own = enumerated_objective(
                &model,
                &scen,
                &prices,
                [sub.p_chg[0], sub.p_heat[0], sub.p_chg[1], sub.p_heat[1]],
            );
            assert!(own.is_some(), "{:?} {:?}", sub.p_chg, sub.p_heat);
        }
    }

    #[test]
    fn centralized_schedule_has_no_excess() {
        let (model, scen) = congested_pair();
        let s = solve_centralized(&model, &scen, &CentralOptions { gap_tol: 1e-6, ..Default::default() }).unwrap();
        let plans: Vec<VehiclePlan> =
            s.vehicles.iter().map(|v| plan(v.id, v.p_chg[0].clone(), v.p_heat[0].clone())).collect();
        let hat = hat_ppv(&plans, &scen);
        assert!(compute_excess(&plans, &hat, model.pg_max).iter().all(|d| *d <= 1e-6));
    }

    #[test]
    fn reschedule_examples() {
        let (model, scen) = congested_pair();
        let opts = quick();
        let zero = vec![0.0; 6];
        let plans: Vec<VehiclePlan> =
            (0..2).map(|i| solve_vehicle_sub(&model, &scen, i, &zero, &opts).unwrap()).collect();
        let tariff = &model.tariff.price_per_step;
        let limit = Duration::from_secs(30);

        // Without congestion the plan is already optimal.
        let roomy = StationModel { pg_max: 1e4, ..model.clone() };
        let hat = hat_ppv(&plans, &scen);
        let same = reschedule(&[0], &plans, &hat, tariff, &roomy, &scen, &opts, limit).unwrap().unwrap();
        assert!((same[0].objective - plans[0].objective).abs() < 1e-6 * plans[0].objective);

        // The congested pair: afterwards no step exceeds the limit.
        let delta = compute_excess(&plans, &hat, model.pg_max);
        assert!(delta.iter().any(|d| *d > 1e-6));
        let chosen = select_balancing(&plans, &delta);
        let new = reschedule(&chosen, &plans, &hat, tariff, &model, &scen, &opts, limit).unwrap().unwrap();
        let mut after = plans.clone();
        for (&c, p) in chosen.iter().zip(new) {
            after[c] = p;
        }
        let excess = compute_excess(&after, &hat, model.pg_max);
        assert!(excess.iter().all(|d| *d <= 1e-6), "{excess:?}");
    }

    #[test]
    fn no_room_means_no_power() {
        // Warm battery, so nothing forces heating.
        let model = station(vec![vehicle(0, 0, 3, 0.5, 20.0), vehicle(1, 0, 3, 0.5, 20.0)], vec![10.0; 3], 5.0);
        let scen = scenarios(vec![vec![0.0; 3]], &[20.0]);
        let hog = plan(1, vec![5.0; 3], vec![0.0; 3]);
        let plans = vec![plan(0, vec![0.0; 3], vec![0.0; 3]), hog];
        let new = reschedule(&[0], &plans, &[0.0; 3], &[10.0; 3], &model, &scen, &quick(), Duration::from_secs(10))
            .unwrap()
            .unwrap();
        assert!(new[0].p_chg.iter().chain(&new[0].p_heat).all(|p| p.abs() < 1e-9));
        assert!((new[0].shortfall - 0.4).abs() < 1e-9);
    }

    #[test]
    fn lone_vehicle_converges_at_once() {
        let model = station(vec![vehicle(0, 1, 5, 0.3, 1.0)], vec![12.0, 17.0, 22.0, 22.0, 12.0, 12.0], 1e4);
        let scen = scenarios(vec![vec![0.0, 1.0, 2.0, 2.0, 1.0, 0.0]], &[-1.0]);
        let opts = DecentOptions { solar_multiplier: false, refine_sweeps: 0, ..quick() };
        let (s, report) = run_decentralized_with_report(&model, &scen, &opts).unwrap();
        assert!(report.converged_early);
        assert_eq!(report.best_iteration, 0);
        let sub = solve_vehicle_sub(&model, &scen, 0, &[0.0; 6], &opts).unwrap();
        assert_eq!(s.vehicles[0].p_chg[0], sub.p_chg);
        assert_eq!(s.vehicles[0].p_heat[0], sub.p_heat);
    }

    #[test]
    fn best_response_over_the_whole_fleet_is_the_central_problem() {
        let (model, scen) = congested_pair();
        let opts = DecentOptions { gap_tol: 1e-9, ..quick() };
        let plans: Vec<VehiclePlan> = (0..2)
            .map(|i| {
                let (chg, heat) = heating_only_plan(&model, &scen, i);
                plan(model.fleet[i].id, chg, heat)
            })
            .collect();
        let new = best_response(&[0, 1], &plans, &model, &scen, &opts, Duration::from_secs(60)).unwrap().unwrap();
        let central = solve_centralized(&model, &scen, &CentralOptions { gap_tol: 1e-9, ..Default::default() }).unwrap();
        let c = central.solver.objective.unwrap();
        let penalty = opts.build.penalty * new.iter().map(|p| p.shortfall).sum::<f64>();
        let b = expected_objective(&new, &model, &scen) + penalty;
        assert!((b - c).abs() <= 1e-6 * (1.0 + c), "block {b} central {c}");
    }

    #[test]
    fn congested_pair_is_feasible_and_near_central() {
        let (model, scen) = congested_pair();
        let opts = quick();
        let (s, report) = run_decentralized_with_report(&model, &scen, &opts).unwrap();
        assert!(s.feasibility.system_violation().1 <= 1e-6);
        assert!(s.feasibility.thermal_violation().1 <= 1e-6);
        assert!(s.replay_error(&model, &scen) <= 1e-9);
        assert!(s.solver.state_gap.unwrap() <= 1e-6);
        let central = solve_centralized(&model, &scen, &CentralOptions { gap_tol: 1e-6, ..Default::default() }).unwrap();
        let (d, c) = (s.solver.objective.unwrap(), central.solver.objective.unwrap());
        assert!(d >= c - 1e-6 * c && d <= 1.05 * c, "decent {d} central {c}");
        assert!(report.selection_steps <= model.fleet.len());
        for row in &report.trace {
            assert!(row.min_alpha >= 0.0);
            assert!(row.proxy >= row.expected - 1e-9);
        }
    }

    #[test]
    fn repeated_runs_agree() {
        let (model, scen) = congested_pair();
        let a = run_decentralized(&model, &scen, &quick()).unwrap();
        let b = run_decentralized(&model, &scen, &quick()).unwrap();
        assert_eq!(a.vehicles, b.vehicles);
        assert_eq!(a.p_grid, b.p_grid);
    }

    #[test]
    fn options_are_validated() {
        let (model, scen) = congested_pair();
        let empty = DecentOptions { step_sizes: vec![], ..quick() };
        assert!(matches!(run_decentralized(&model, &scen, &empty), Err(Error::InvalidOption(_))));
        let negative = DecentOptions { step_sizes: vec![0.1, -1.0], ..quick() };
        assert!(negative.validate().is_err());
        assert!(DecentOptions { refine_block: 0, ..quick() }.validate().is_err());
        assert!(solve_vehicle_sub(&model, &scen, 0, &[-1.0; 6], &quick()).is_err());
    }

    #[test]
    fn trace_csv_has_a_header_and_one_line_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let row = TraceRow {
            step_size: 0.1,
            iteration: 2,
            max_delta: 1.5,
            sum_alpha: 0.3,
            min_alpha: 0.0,
            sum_mu: 0.0,
            proxy: 10.0,
            expected: 9.0,
        };
        write_trace_csv(&path, &[row.clone(), row]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("step_size,iteration,max_delta"));
    }

    #[test]
    fn centralized_build_accepts_decent_powers() {
        // The decentralized powers are a feasible point of the centralized
        // model once the recourse variables are filled in.
        let (model, scen) = congested_pair();
        let s = run_decentralized(&model, &scen, &quick()).unwrap();
        let (p, map) = build_centralized(&model, &scen, &BuildOptions::default()).unwrap();
        let x = crate::model::central_point(&p, &map, &model, &scen, &s);
        assert!(p.lp.max_violation(&x) <= 1e-6);
        assert!(p.max_integrality_violation(&x) == 0.0);
    }

    proptest! {
        #[test]
        fn multipliers_stay_non_negative(
            alpha in prop::collection::vec(0.0..5.0f64, 6),
            delta in prop::collection::vec(-10.0..10.0f64, 6),
            surplus in prop::collection::vec(-10.0..10.0f64, 6),
            s in 0.001..2.0f64,
        ) {
            let state = DualState { alpha: alpha.clone(), delta, mu: alpha, surplus, iteration: 3, step_size: s };
            let next = dual_update(&state);
            prop_assert!(next.alpha.iter().chain(&next.mu).all(|a| *a >= 0.0));
            prop_assert_eq!(next.iteration, 4);
        }

        #[test]
        fn proxy_bounds_expected_cost(
            powers in prop::collection::vec(prop::collection::vec(0.0..7.0f64, 6), 1..4),
            pv in prop::collection::vec(prop::collection::vec(0.0..6.0f64, 6), 1..5),
        ) {
            let fleet = (0..powers.len()).map(|i| vehicle(i, 0, 6, 0.3, 5.0)).collect();
            let model = station(fleet, vec![12.0, 17.0, 22.0, 22.0, 17.0, 12.0], 10.0);
            let temps = vec![0.0; pv.len()];
            let scen = scenarios(pv, &temps);
            let plans: Vec<VehiclePlan> =
                powers.iter().enumerate().map(|(i, p)| plan(i, p.clone(), vec![0.0; 6])).collect();
            prop_assert!(proxy_objective(&plans, &model, &scen) >= expected_objective(&plans, &model, &scen) - 1e-9);
        }

        #[test]
        fn greedy_selection_terminates_and_shrinks_excess(
            powers in prop::collection::vec(prop::collection::vec(0.0..7.0f64, 5), 1..8),
            room in 0.0..20.0f64,
        ) {
            let plans: Vec<VehiclePlan> =
                powers.iter().enumerate().map(|(i, p)| plan(i, p.clone(), vec![0.0; 5])).collect();
            let delta = compute_excess(&plans, &[0.0; 5], room);
            let chosen = select_balancing(&plans, &delta);
            prop_assert!(chosen.len() <= plans.len());
            let positive = |d: &[f64]| d.iter().map(|x| x.max(0.0)).sum::<f64>();
            let mut d = delta.clone();
            for &c in &chosen {
                let before = positive(&d);
                for (t, x) in d.iter_mut().enumerate() {
                    *x -= plans[c].demand(t);
                }
                prop_assert!(positive(&d) < before);
            }
            prop_assert!(d.iter().all(|x| *x <= 1e-9));
        }
    }
}

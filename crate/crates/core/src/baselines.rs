//! Competing schemes: smart charging followed by a thermostat
//! (SmartChg&Heat), first-come first-served equal sharing with a thermostat
//! (InstantChg&Heat) and smart charging without heating (NoHeat).
//!
//! All three are simulated forward per scenario. The heated schemes plan
//! charging without any thermal model and charge as planned; the thermostat
//! only heats, so charging a cold battery breaks the low-temperature rule and
//! shows up in the schedule's feasibility report. Any station overload left
//! at a step is cut proportionally from every vehicle.

use std::time::Instant;

use coldcharge_milp::{solve_lp, LpProblem, LpStatus, Relation};
use serde::{Deserialize, Serialize};

use crate::domain::{ScenarioSet, StationModel};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, CostBasis};
use crate::model::BuildOptions;
use crate::schedule::Schedule;
use crate::thermal::{heating_cap, rule_cap, simulate_vehicle, StepCoefficients};

/// Ratios searched when none are given.
pub const DEFAULT_RATIOS: [f64; 4] = [0.15, 0.20, 0.25, 0.30];

/// Thermostat hysteresis above the setpoint, °C.
pub const DEADBAND: f64 = 0.5;

/// NoHeat re-solves at most this many times with updated temperature caps.
pub const NO_HEAT_ROUNDS: usize = 3;

/// Share of each vehicle's power capacity kept free for heating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservationPolicy {
    pub ratio: f64,
}

impl ReservationPolicy {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidOption(format!("reservation ratio must lie in [0, 1), got {ratio}")));
        }
        Ok(Self { ratio })
    }
}

fn policies(ratios: &[f64]) -> Result<Vec<ReservationPolicy>> {
    if ratios.is_empty() {
        return Err(Error::InvalidOption("at least one reservation ratio is required".into()));
    }
    ratios.iter().map(|&r| ReservationPolicy::new(r)).collect()
}

/// Classical smart charging: one charging plan for all scenarios minimizing
/// the expected grid cost plus the shortfall penalty, with per-step charge
/// caps `caps[i][t]` and no thermal model. Returns `[vehicle][step]`.
pub fn smart_charging_plan(
    model: &StationModel,
    scen: &ScenarioSet,
    caps: &[Vec<f64>],
    penalty: f64,
) -> Result<Vec<Vec<f64>>> {
    model.validate_with(scen)?;
    let n = model.grid.n_steps;
    let dt = model.grid.dt;
    let eta = model.thermal.eta_chg;
    let mut lp = LpProblem::new();
    let mut p = Vec::with_capacity(model.fleet.len());
    for (i, v) in model.fleet.iter().enumerate() {
        let cols: Vec<usize> =
            v.window().map(|t| lp.add_named_var(format!("p_chg[{},{t}]", v.id), 0.0, caps[i][t].max(0.0), 0.0)).collect();
        let gain = eta * dt / v.capacity_kwh;
        let energy: Vec<(usize, f64)> = cols.iter().map(|&j| (j, gain)).collect();
        // SoC only rises, so the upper SoC bound is a bound on the total.
        lp.add_constraint(energy.clone(), Relation::Le, 1.0 - v.soc_arr);
        let slack = lp.add_named_var(format!("shortfall[{}]", v.id), 0.0, f64::INFINITY, penalty);
        let mut row = energy;
        row.push((slack, 1.0));
        lp.add_constraint(row, Relation::Ge, v.soc_dep_req - v.soc_arr);
        p.push(cols);
    }
    for w in 0..scen.n_scen() {
        for t in 0..n {
            let c = scen.prob[w] * model.tariff.price_per_step[t] * dt;
            let pv = lp.add_var(0.0, scen.pv_cap[w][t], 0.0);
            let grid = lp.add_var(0.0, model.pg_max, c);
            let mut row = vec![(pv, 1.0), (grid, 1.0)];
            for (v, cols) in model.fleet.iter().zip(&p) {
                if v.is_plugged(t) {
                    row.push((cols[t - v.ta], -1.0));
                }
            }
            lp.add_constraint(row, Relation::Eq, 0.0);
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!("smart charging LP ended with {:?}", sol.status)));
    }
    Ok(model
        .fleet
        .iter()
        .zip(&p)
        .map(|(v, cols)| {
            let mut row = vec![0.0; n];
            for (k, &j) in cols.iter().enumerate() {
                row[v.ta + k] = sol.x[j].max(0.0);
            }
            row
        })
        .collect())
}

/// What a scheme asks for at one step, before the battery limits and cuts.
trait Controller {
    /// Requested charging power per vehicle at step `t`, given the current
    /// SoC of every vehicle.
    fn charge(&self, t: usize, soc: &[f64]) -> Vec<f64>;
    /// Whether vehicle `i` charges during step `t` or the next one, which is
    /// when the thermostat runs.
    fn charging_soon(&self, t: usize, i: usize, soc: f64) -> bool;
}

struct Planned<'a> {
    plan: &'a [Vec<f64>],
}

impl Controller for Planned<'_> {
    fn charge(&self, t: usize, _soc: &[f64]) -> Vec<f64> {
        self.plan.iter().map(|row| row[t]).collect()
    }

    fn charging_soon(&self, t: usize, i: usize, _soc: f64) -> bool {
        let row = &self.plan[i];
        row[t] > 1e-9 || row.get(t + 1).is_some_and(|p| *p > 1e-9)
    }
}

struct EqualShare<'a> {
    model: &'a StationModel,
    /// Station capacity per step: grid limit plus worst-case solar.
    available: Vec<f64>,
    ratio: f64,
}

impl Controller for EqualShare<'_> {
    fn charge(&self, t: usize, soc: &[f64]) -> Vec<f64> {
        let fleet = &self.model.fleet;
        let waiting: Vec<bool> =
            fleet.iter().zip(soc).map(|(v, &s)| v.is_plugged(t) && s < v.soc_dep_req - 1e-9).collect();
        let count = waiting.iter().filter(|w| **w).count();
        if count == 0 {
            return vec![0.0; fleet.len()];
        }
        let share = self.available[t] / count as f64;
        fleet
            .iter()
            .zip(&waiting)
            .map(|(v, &on)| if on { share.min((1.0 - self.ratio) * v.p_total_max).min(v.pc_bar) } else { 0.0 })
            .collect()
    }

    fn charging_soon(&self, _t: usize, i: usize, soc: f64) -> bool {
        soc < self.model.fleet[i].soc_dep_req - 1e-9
    }
}

/// How a scheme behaves in the forward simulation.
#[derive(Debug, Clone, Copy)]
struct Mode {
    /// Heating reserve as a share of each vehicle's power capacity.
    ratio: f64,
    heating: bool,
    /// Stop charging at the departure requirement instead of a full battery.
    stop_at_requirement: bool,
    /// Hold charging to the low-temperature rule on the simulated trajectory.
    obey_rule: bool,
}

/// Forward simulation of one scenario. Returns charging and heating powers
/// `[vehicle][step]`.
fn simulate_scenario(
    model: &StationModel,
    scen: &ScenarioSet,
    w: usize,
    mode: Mode,
    ctl: &dyn Controller,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let th = &model.thermal;
    let dt = model.grid.dt;
    let n = model.grid.n_steps;
    let nv = model.fleet.len();
    let coef: Vec<StepCoefficients> =
        model.fleet.iter().map(|v| StepCoefficients::new(th, v.thermal_mass(th), dt)).collect();
    let mut soc: Vec<f64> = model.fleet.iter().map(|v| v.soc_arr).collect();
    let mut temp: Vec<f64> = model.fleet.iter().map(|v| v.temp_arr).collect();
    let mut chg = vec![vec![0.0; n]; nv];
    let mut heat = vec![vec![0.0; n]; nv];
    let mut heater = vec![false; nv];
    for t in 0..n {
        let amb = scen.temp_amb[w][t];
        let asked = ctl.charge(t, &soc);
        let mut load = 0.0;
        for (i, v) in model.fleet.iter().enumerate() {
            if !v.is_plugged(t) {
                continue;
            }
            let x = temp[i];
            let ceiling = if mode.stop_at_requirement { v.soc_dep_req } else { 1.0 };
            let room = ((ceiling - soc[i]) * v.capacity_kwh / (th.eta_chg * dt)).max(0.0);
            let mut c = asked[i].min(room).max(0.0);
            if mode.obey_rule {
                c = c.min(rule_cap(x, v, th));
            }
            // Bang-bang with hysteresis: on when the battery would end the
            // step below the setpoint, off once it is DEADBAND above it.
            let k = &coef[i];
            let drift = k.a * x + k.b_amb * amb + k.b_chg * c;
            if drift < th.t_set {
                heater[i] = true;
            } else if x >= th.t_set + DEADBAND {
                heater[i] = false;
            }
            let h = if mode.heating && heater[i] && ctl.charging_soon(t, i, soc[i]) {
                (mode.ratio * v.p_total_max).min(heating_cap(x, v))
            } else {
                0.0
            };
            chg[i][t] = c;
            heat[i][t] = h;
            load += c + h;
        }
        let available = model.pg_max + scen.pv_cap[w][t];
        if load > available {
            let f = available / load;
            for i in 0..nv {
                chg[i][t] *= f;
                heat[i][t] *= f;
            }
        }
        for (i, v) in model.fleet.iter().enumerate() {
            if v.is_plugged(t) {
                let k = &coef[i];
                soc[i] += th.eta_chg * chg[i][t] * dt / v.capacity_kwh;
                temp[i] = k.a * temp[i] + k.b_heat * heat[i][t] + k.b_chg * chg[i][t] + k.b_amb * amb;
            }
        }
    }
    (chg, heat)
}

/// Simulates every scenario and assembles the schedule.
fn simulate_all(name: &str, model: &StationModel, scen: &ScenarioSet, mode: Mode, ctl: &dyn Controller) -> Schedule {
    let nv = model.fleet.len();
    let mut chg = vec![Vec::with_capacity(scen.n_scen()); nv];
    let mut heat = vec![Vec::with_capacity(scen.n_scen()); nv];
    for w in 0..scen.n_scen() {
        let (c, h) = simulate_scenario(model, scen, w, mode, ctl);
        for (i, (c, h)) in c.into_iter().zip(h).enumerate() {
            chg[i].push(c);
            heat[i].push(h);
        }
    }
    Schedule::from_powers(name, model, scen, chg, heat)
}

fn charging_cost_or_inf(s: &Schedule, model: &StationModel, scen: &ScenarioSet) -> f64 {
    compute_metrics(s, model, scen, CostBasis::Battery).charging_cost.unwrap_or(f64::INFINITY)
}

/// Runs `run` for every ratio and keeps the schedule with the lowest
/// charging cost per kWh. Ties go to the earlier ratio.
fn best_over_ratios(
    model: &StationModel,
    scen: &ScenarioSet,
    ratios: &[f64],
    run: impl Fn(ReservationPolicy) -> Result<Schedule>,
) -> Result<Schedule> {
    let start = Instant::now();
    let mut best: Option<(f64, Schedule)> = None;
    for policy in policies(ratios)? {
        let s = run(policy)?;
        let cost = charging_cost_or_inf(&s, model, scen);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, s));
        }
    }
    let (_, mut s) = best.expect("at least one ratio");
    s.wall_time = start.elapsed().as_secs_f64();
    Ok(s)
}

/// SmartChg&Heat for one reservation ratio.
pub fn smart_chg_heat_with(model: &StationModel, scen: &ScenarioSet, policy: ReservationPolicy) -> Result<Schedule> {
    let caps: Vec<Vec<f64>> = model
        .fleet
        .iter()
        .map(|v| vec![((1.0 - policy.ratio) * v.p_total_max).min(v.pc_bar); model.grid.n_steps])
        .collect();
    let plan = smart_charging_plan(model, scen, &caps, BuildOptions::default().penalty)?;
    let mode = Mode { ratio: policy.ratio, heating: true, stop_at_requirement: false, obey_rule: false };
    Ok(simulate_all("smart-chg-heat", model, scen, mode, &Planned { plan: &plan }))
}

/// Smart charging planned without a thermal model, then a thermostat that
/// holds the setpoint while charging, then cuts of any station overload.
pub fn run_smart_chg_heat(model: &StationModel, scen: &ScenarioSet, ratios: &[f64]) -> Result<Schedule> {
    best_over_ratios(model, scen, ratios, |p| smart_chg_heat_with(model, scen, p))
}

/// InstantChg&Heat for one reservation ratio.
pub fn instant_chg_heat_with(model: &StationModel, scen: &ScenarioSet, policy: ReservationPolicy) -> Result<Schedule> {
    model.validate_with(scen)?;
    let available = (0..model.grid.n_steps).map(|t| model.pg_max + scen.min_pv(t)).collect();
    let ctl = EqualShare { model, available, ratio: policy.ratio };
    let mode = Mode { ratio: policy.ratio, heating: true, stop_at_requirement: true, obey_rule: false };
    Ok(simulate_all("instant-chg-heat", model, scen, mode, &ctl))
}

/// Every waiting vehicle gets an equal share of the station capacity until
/// it reaches its departure requirement; same thermostat and cuts as
/// SmartChg&Heat.
pub fn run_instant_chg_heat(model: &StationModel, scen: &ScenarioSet, ratios: &[f64]) -> Result<Schedule> {
    best_over_ratios(model, scen, ratios, |p| instant_chg_heat_with(model, scen, p))
}

/// Smart charging without heating. Charging is capped by the rule evaluated
/// on the unheated temperature trajectory, worst case over scenarios. The
/// trajectory depends on the charging through waste heat, so the plan is
/// re-solved with the caps of its own trajectory a few times.
pub fn run_no_heat(model: &StationModel, scen: &ScenarioSet) -> Result<Schedule> {
    let start = Instant::now();
    model.validate_with(scen)?;
    let n = model.grid.n_steps;
    let th = &model.thermal;
    let penalty = BuildOptions::default().penalty;
    let zero = vec![0.0; n];
    let mut plan: Vec<Vec<f64>> = vec![zero.clone(); model.fleet.len()];
    for _ in 0..NO_HEAT_ROUNDS {
        let caps: Vec<Vec<f64>> = model
            .fleet
            .iter()
            .zip(&plan)
            .map(|(v, chg)| {
                let mut cap = vec![0.0; n];
                for t in v.window() {
                    cap[t] = v.p_total_max;
                }
                for amb in &scen.temp_amb {
                    let (_, temp) = simulate_vehicle(v, th, model.grid.dt, amb, chg, &zero);
                    for t in v.window() {
                        cap[t] = cap[t].min(rule_cap(temp[t - v.ta], v, th));
                    }
                }
                cap
            })
            .collect();
        let next = smart_charging_plan(model, scen, &caps, penalty)?;
        if next == plan {
            break;
        }
        plan = next;
    }
    // The last plan was capped with the previous trajectory; its own may be
    // slightly colder, so the rule is applied once more while simulating.
    let mode = Mode { ratio: 0.0, heating: false, stop_at_requirement: false, obey_rule: true };
    let mut s = simulate_all("no-heat", model, scen, mode, &Planned { plan: &plan });
    s.wall_time = start.elapsed().as_secs_f64();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::fixtures::{scenarios, station, vehicle};
    use crate::model::{solve_centralized, CentralOptions};

    fn warm_cheap_window() -> (StationModel, ScenarioSet) {
        let prices = vec![30.0, 10.0, 10.0, 30.0, 30.0, 30.0];
        let model = station(vec![vehicle(0, 0, 6, 0.8, 20.0)], prices, 10.0);
        let scen = scenarios(vec![vec![0.0; 6], vec![0.5; 6]], &[20.0, 22.0]);
        (model, scen)
    }

    fn total_heat(s: &Schedule) -> f64 {
        s.vehicles.iter().flat_map(|v| v.p_heat.iter().flatten()).sum()
    }

    #[test]
    fn ratios_are_checked() {
        assert!(ReservationPolicy::new(1.0).is_err());
        assert!(ReservationPolicy::new(-0.1).is_err());
        assert!(ReservationPolicy::new(0.0).is_ok());
        let (model, scen) = warm_cheap_window();
        assert!(run_smart_chg_heat(&model, &scen, &[]).is_err());
    }

    #[test]
    fn warm_smart_charging_needs_no_thermostat() {
        let (model, scen) = warm_cheap_window();
        let s = run_smart_chg_heat(&model, &scen, &DEFAULT_RATIOS).unwrap();
        assert_eq!(total_heat(&s), 0.0);
        let caps = vec![vec![4.8; 6]];
        let plan = smart_charging_plan(&model, &scen, &caps, 10_000.0).unwrap();
        for w in 0..2 {
            assert_eq!(s.vehicles[0].p_chg[w], plan[0]);
        }
        // Both reduce to classical smart charging here.
        let central = solve_centralized(&model, &scen, &CentralOptions { gap_tol: 1e-9, ..Default::default() }).unwrap();
        assert!((s.expected_cost - central.expected_cost).abs() < 1e-6);
        let no_heat = run_no_heat(&model, &scen).unwrap();
        assert!((no_heat.expected_cost - central.expected_cost).abs() < 1e-6);
    }

    #[test]
    fn reported_ratio_is_the_cheapest() {
        let model = station(vec![vehicle(0, 0, 6, 0.3, 2.0), vehicle(1, 1, 6, 0.4, -1.0)], vec![12.0, 12.0, 22.0, 22.0, 17.0, 12.0], 6.0);
        let scen = scenarios(vec![vec![0.0, 1.0, 2.0, 2.5, 1.0, 0.0]], &[-2.0]);
        for (run, one) in [
            (run_smart_chg_heat as fn(&_, &_, &[f64]) -> Result<Schedule>, smart_chg_heat_with as fn(&_, &_, _) -> Result<Schedule>),
            (run_instant_chg_heat, instant_chg_heat_with),
        ] {
            let best = run(&model, &scen, &[0.15, 0.30]).unwrap();
            let costs: Vec<f64> = [0.15, 0.30]
                .iter()
                .map(|&r| charging_cost_or_inf(&one(&model, &scen, ReservationPolicy { ratio: r }).unwrap(), &model, &scen))
                .collect();
            let got = charging_cost_or_inf(&best, &model, &scen);
            assert_eq!(got, costs[0].min(costs[1]));
            assert!(total_heat(&best) > 0.0);
        }
    }

    #[test]
    fn cold_tight_station_leaves_charge_unmet() {
        let model = station(vec![vehicle(0, 0, 6, 0.3, -5.0), vehicle(1, 0, 6, 0.3, -5.0)], vec![10.0; 6], 3.0);
        let scen = scenarios(vec![vec![0.0; 6]], &[-5.0]);
        let s = run_smart_chg_heat(&model, &scen, &DEFAULT_RATIOS).unwrap();
        assert!(s.feasibility.unmet_soc > 0.0);
        assert!(s.feasibility.grid_limit <= 1e-9);
    }

    #[test]
    fn thermostat_heats_only_around_charging() {
        // Cheap power only at the end: the plan waits, and so does the heater.
        let model = station(vec![vehicle(0, 0, 8, 0.7, 2.0)], vec![30.0, 30.0, 30.0, 30.0, 30.0, 30.0, 5.0, 5.0], 20.0);
        let scen = scenarios(vec![vec![0.0; 8]], &[0.0]);
        let s = smart_chg_heat_with(&model, &scen, ReservationPolicy { ratio: 0.15 }).unwrap();
        let (chg, heat) = (&s.vehicles[0].p_chg[0], &s.vehicles[0].p_heat[0]);
        assert!(chg[..6].iter().all(|p| *p == 0.0));
        assert!(heat[..5].iter().all(|p| *p == 0.0));
        // One step of lookahead, at the full reserve of 0.15·7.4 kW.
        assert!((heat[5] - 0.15 * 7.4).abs() < 1e-12);
        // The battery is still cold when charging starts, which the report shows.
        assert!(s.feasibility.low_temp_rule > 0.0);
    }

    #[test]
    fn lone_vehicle_charges_at_its_cap_until_full() {
        let model = station(vec![vehicle(0, 0, 8, 0.5, 20.0)], vec![10.0; 8], 50.0);
        let scen = scenarios(vec![vec![0.0; 8]], &[20.0]);
        let s = instant_chg_heat_with(&model, &scen, ReservationPolicy { ratio: 0.15 }).unwrap();
        let chg = &s.vehicles[0].p_chg[0];
        // 0.4 of 10 kWh at 4.8 kW and 92 %: three full steps, then the rest.
        let per_step = 0.92 * 4.8 * 0.25 / 10.0;
        assert_eq!(&chg[..3], &[4.8; 3]);
        assert!((chg[3] - (0.4 - 3.0 * per_step) / (0.92 * 0.25 / 10.0)).abs() < 1e-9);
        assert!(chg[4..].iter().all(|p| *p == 0.0));
        assert!((s.vehicles[0].final_soc(0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn equal_split_and_exit() {
        let model = station(vec![vehicle(0, 0, 3, 0.85, 20.0), vehicle(1, 0, 3, 0.3, 20.0)], vec![10.0; 3], 4.0);
        let scen = scenarios(vec![vec![0.0; 3]], &[20.0]);
        let s = instant_chg_heat_with(&model, &scen, ReservationPolicy { ratio: 0.15 }).unwrap();
        let (a, b) = (&s.vehicles[0].p_chg[0], &s.vehicles[1].p_chg[0]);
        let per_kw = 0.92 * 0.25 / 10.0;
        // Step 0: 2 kW each. Step 1: vehicle 0 tops up the last bit.
        // Step 2: vehicle 0 is done and vehicle 1 gets the whole 4 kW.
        assert_eq!((a[0], b[0]), (2.0, 2.0));
        assert!((a[1] - (0.05 - 2.0 * per_kw) / per_kw).abs() < 1e-9);
        assert_eq!(b[1], 2.0);
        assert_eq!((a[2], b[2]), (0.0, 4.0));
    }

    #[test]
    fn no_heat_in_the_cold() {
        let model = station(vec![vehicle(0, 0, 6, 0.3, -5.0), vehicle(1, 2, 6, 0.4, -3.0)], vec![10.0; 6], 10.0);
        let scen = scenarios(vec![vec![1.0; 6], vec![0.0; 6]], &[-5.0, -2.0]);
        let s = run_no_heat(&model, &scen).unwrap();
        let m = compute_metrics(&s, &model, &scen, CostBasis::Battery);
        assert_eq!(m.overhead_rate, 0.0);
        assert_eq!(total_heat(&s), 0.0);
        assert!((m.unmet_soc - (0.6 + 0.5)).abs() < 1e-9);
    }

    fn instance() -> impl Strategy<Value = (StationModel, ScenarioSet)> {
        let veh = (0usize..3, 2usize..6, 0.1..0.85f64, -10.0..25.0f64);
        (
            prop::collection::vec(veh, 1..4),
            prop::collection::vec(5.0..30.0f64, 6),
            prop::collection::vec((prop::collection::vec(0.0..4.0f64, 6), -10.0..20.0f64), 1..4),
            1.0..15.0f64,
        )
            .prop_map(|(vs, prices, sc, pg)| {
                let fleet = vs
                    .into_iter()
                    .enumerate()
                    .map(|(id, (ta, len, soc, temp))| vehicle(id, ta, (ta + len).min(6), soc, temp))
                    .collect();
                let (pv, temps): (Vec<_>, Vec<_>) = sc.into_iter().unzip();
                (station(fleet, prices, pg), scenarios(pv, &temps))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

        #[test]
        fn baselines_respect_the_station_and_the_battery((model, scen) in instance()) {
            let runs = [
                run_smart_chg_heat(&model, &scen, &DEFAULT_RATIOS).unwrap(),
                run_instant_chg_heat(&model, &scen, &DEFAULT_RATIOS).unwrap(),
                run_no_heat(&model, &scen).unwrap(),
            ];
            for s in &runs {
                prop_assert!(s.feasibility.system_violation().1 <= 1e-9, "{:?}", s.feasibility);
                prop_assert!(s.feasibility.heating_cap <= 1e-9);
                prop_assert!(s.replay_error(&model, &scen) <= 1e-9);
            }
            prop_assert_eq!(total_heat(&runs[2]), 0.0);
            prop_assert!(runs[2].feasibility.low_temp_rule <= 1e-9);
            // Equal sharing never hands out more than the station capacity.
            for w in 0..scen.n_scen() {
                for t in 0..model.grid.n_steps {
                    let given: f64 = runs[1].vehicles.iter().map(|v| v.p_chg[w][t]).sum();
                    prop_assert!(given <= model.pg_max + scen.min_pv(t) + 1e-9);
                }
            }
        }
    }
}

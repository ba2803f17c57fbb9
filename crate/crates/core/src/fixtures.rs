//! Small hand-made instances shared by unit tests.

use crate::domain::{BigM, ScenarioSet, StationModel, Tariff, ThermalParams, TimeGrid, VehicleSpec};

pub fn vehicle(id: usize, ta: usize, td: usize, soc_arr: f64, temp_arr: f64) -> VehicleSpec {
    VehicleSpec {
        id,
        capacity_kwh: 10.0,
        mass_kg: 80.0,
        p_total_max: 7.4,
        pc_bar: 4.8,
        beta_chg: 0.12,
        ph_bar: 3.0,
        beta_heat: 0.024,
        soc_arr,
        soc_dep_req: 0.9,
        temp_arr,
        ta,
        td,
    }
}

pub fn station(fleet: Vec<VehicleSpec>, prices: Vec<f64>, pg_max: f64) -> StationModel {
    let thermal = ThermalParams::default();
    StationModel {
        grid: TimeGrid { start_hour: 7.0, n_steps: prices.len(), dt: 0.25 },
        tariff: Tariff { price_per_step: prices },
        thermal,
        big_m: BigM::tight(&thermal, &fleet),
        fleet,
        pg_max,
    }
}

/// Scenarios with the given solar rows and one ambient temperature each.
pub fn scenarios(pv: Vec<Vec<f64>>, temps: &[f64]) -> ScenarioSet {
    let n = pv.len();
    let steps = pv[0].len();
    ScenarioSet {
        prob: vec![1.0 / n as f64; n],
        pv_cap: pv,
        temp_amb: temps.iter().map(|&t| vec![t; steps]).collect(),
    }
}

/// Two cold vehicles over six steps sharing a tight connection.
pub fn congested_pair() -> (StationModel, ScenarioSet) {
    let fleet = vec![vehicle(0, 0, 6, 0.3, 2.0), vehicle(1, 1, 6, 0.4, -1.0)];
    let model = station(fleet, vec![12.0, 12.0, 22.0, 22.0, 17.0, 12.0], 6.0);
    let scen = scenarios(vec![vec![0.0, 1.0, 2.0, 2.5, 1.0, 0.0], vec![0.0, 0.5, 1.5, 2.0, 0.5, 0.0]], &[-2.0, 1.0]);
    (model, scen)
}

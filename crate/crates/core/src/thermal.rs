//! Battery thermal dynamics and temperature-dependent power limits.

use crate::domain::{ThermalParams, VehicleSpec};

/// Temperature after one step of length `dt` hours.
///
/// `m·c·(T' − T)/dt = −μ_heat·hA·(T − T_amb) + η_heat·p_heat + (1 − η_chg)·p_chg`
pub fn thermal_step(
    temp: f64,
    temp_amb: f64,
    p_heat: f64,
    p_chg: f64,
    thermal: &ThermalParams,
    thermal_mass: f64,
    dt: f64,
) -> f64 {
    let flow = -thermal.mu_heat * thermal.loss_coeff_ha * (temp - temp_amb)
        + thermal.eta_heat * p_heat
        + (1.0 - thermal.eta_chg) * p_chg;
    temp + dt * flow / thermal_mass
}

/// Coefficients of `T' = a·T + b_heat·p_heat + b_chg·p_chg + b_amb·T_amb`.
#[derive(Debug, Clone, Copy)]
pub struct StepCoefficients {
    pub a: f64,
    pub b_heat: f64,
    pub b_chg: f64,
    pub b_amb: f64,
}

impl StepCoefficients {
    pub fn new(thermal: &ThermalParams, thermal_mass: f64, dt: f64) -> Self {
        let k = dt / thermal_mass;
        let loss = thermal.mu_heat * thermal.loss_coeff_ha;
        Self {
            a: 1.0 - k * loss,
            b_heat: k * thermal.eta_heat,
            b_chg: k * (1.0 - thermal.eta_chg),
            b_amb: k * loss,
        }
    }
}

/// Heating power limit `p̄h − β_heat·T`, floored at 0.
pub fn heating_cap(temp: f64, v: &VehicleSpec) -> f64 {
    (v.ph_bar - v.beta_heat * temp).max(0.0)
}

/// Charging power limit `p̄c + β_chg·T`, floored at 0.
pub fn charging_cap(temp: f64, v: &VehicleSpec) -> f64 {
    (v.pc_bar + v.beta_chg * temp).max(0.0)
}

/// Charging limit under the low-temperature rule: `μ_chg·T` (floored at 0)
/// below the setpoint, the ordinary charging cap otherwise.
pub fn rule_cap(temp: f64, v: &VehicleSpec, thermal: &ThermalParams) -> f64 {
    let cap = charging_cap(temp, v);
    if temp < thermal.t_set {
        cap.min((thermal.mu_chg * temp).max(0.0))
    } else {
        cap
    }
}

/// SoC after charging at `p_chg` for `dt` hours.
pub fn soc_step(soc: f64, p_chg: f64, v: &VehicleSpec, thermal: &ThermalParams, dt: f64) -> f64 {
    soc + thermal.eta_chg * p_chg * dt / v.capacity_kwh
}

/// SoC and temperature of one vehicle over its window for one ambient
/// trajectory. `p_chg` and `p_heat` are indexed by absolute step; the returned
/// vectors hold the states at steps `ta..=td`.
pub fn simulate_vehicle(
    v: &VehicleSpec,
    thermal: &ThermalParams,
    dt: f64,
    temp_amb: &[f64],
    p_chg: &[f64],
    p_heat: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mass = v.thermal_mass(thermal);
    let mut soc = Vec::with_capacity(v.td - v.ta + 1);
    let mut temp = Vec::with_capacity(v.td - v.ta + 1);
    soc.push(v.soc_arr);
    temp.push(v.temp_arr);
    for t in v.window() {
        let (s, x) = (*soc.last().unwrap(), *temp.last().unwrap());
        soc.push(soc_step(s, p_chg[t], v, thermal, dt));
        temp.push(thermal_step(x, temp_amb[t], p_heat[t], p_chg[t], thermal, mass, dt));
    }
    (soc, temp)
}

/// First window offset `k ≥ 1` from which the temperature floor applies.
///
/// A battery arriving far below `t_lo` may not reach it after one step even
/// at full heating. Until the fastest warm-up trajectory crosses `t_lo` the
/// battery is certainly below the floor, so the floor is only enforced from
/// the first step that trajectory reaches. Returns `td − ta + 1` when the
/// floor is never reachable inside the window.
pub fn floor_start(v: &VehicleSpec, thermal: &ThermalParams, dt: f64, temp_amb: &[f64]) -> usize {
    let mass = v.thermal_mass(thermal);
    let mut temp = v.temp_arr;
    for (k, t) in v.window().enumerate() {
        let heat = heating_cap(temp, v).min(v.p_total_max);
        temp = thermal_step(temp, temp_amb[t], heat, 0.0, thermal, mass, dt);
        if temp >= thermal.t_lo - 1e-9 {
            return k + 1;
        }
    }
    v.td - v.ta + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vehicle() -> VehicleSpec {
        VehicleSpec {
            id: 0,
            capacity_kwh: 37.0,
            mass_kg: 235.88,
            p_total_max: 7.4,
            pc_bar: 4.8,
            beta_chg: 0.12,
            ph_bar: 3.0,
            beta_heat: 0.024,
            soc_arr: 0.1,
            soc_dep_req: 0.9,
            temp_arr: -2.0,
            ta: 1,
            td: 5,
        }
    }

    #[test]
    fn one_step_example() {
        // m·c = 0.1 and μ_heat·hA = 0.02.
        let th = ThermalParams { mu_heat: 0.5, loss_coeff_ha: 0.04, eta_heat: 0.8, ..ThermalParams::default() };
        let next = thermal_step(10.0, -5.0, 1.0, 0.0, &th, 0.1, 0.25);
        // 10 + 0.25·(−0.02·15 + 0.8)/0.1
        assert!((next - 11.25).abs() < 1e-12, "{next}");
    }

    #[test]
    fn equilibrium_and_waste_heat() {
        let th = ThermalParams::default();
        assert_eq!(thermal_step(-4.0, -4.0, 0.0, 0.0, &th, 0.07, 0.25), -4.0);
        assert!(thermal_step(-4.0, -4.0, 0.0, 3.0, &th, 0.07, 0.25) > -4.0);
        let unit = ThermalParams { eta_chg: 1.0, ..th };
        assert_eq!(thermal_step(1.0, -4.0, 0.5, 3.0, &unit, 0.07, 0.25), thermal_step(1.0, -4.0, 0.5, 0.0, &unit, 0.07, 0.25));
    }

    #[test]
    fn coefficients_match_step() {
        let th = ThermalParams::default();
        let c = StepCoefficients::new(&th, 0.066, 0.25);
        let direct = thermal_step(3.0, -2.0, 1.2, 4.0, &th, 0.066, 0.25);
        let lin = c.a * 3.0 + c.b_heat * 1.2 + c.b_chg * 4.0 + c.b_amb * -2.0;
        assert!((direct - lin).abs() < 1e-12);
    }

    #[test]
    fn power_caps() {
        let v = vehicle();
        assert_eq!(heating_cap(0.0, &v), 3.0);
        assert!((heating_cap(-10.0, &v) - 3.24).abs() < 1e-12);
        assert!((charging_cap(15.0, &v) - 6.6).abs() < 1e-12);
        assert_eq!(charging_cap(-40.0, &v), 0.0);
        let th = ThermalParams::default();
        assert_eq!(rule_cap(-1.0, &v, &th), 0.0);
        assert!((rule_cap(10.0, &v, &th) - 2.2).abs() < 1e-12);
        assert!((rule_cap(20.0, &v, &th) - 7.2).abs() < 1e-12);
    }

    #[test]
    fn floor_start_for_cold_arrivals() {
        let th = ThermalParams::default();
        let v = vehicle();
        assert_eq!(floor_start(&v, &th, 0.25, &[-5.0; 6]), 1);
        // Far below freezing one step of full heating is not enough.
        let cold = VehicleSpec { temp_arr: -25.0, ..v };
        let k = floor_start(&cold, &th, 0.25, &[-25.0; 6]);
        assert!(k > 1);
        let mass = cold.thermal_mass(&th);
        let mut temp = cold.temp_arr;
        for step in 1..=4 {
            temp = thermal_step(temp, -25.0, heating_cap(temp, &cold).min(cold.p_total_max), 0.0, &th, mass, 0.25);
            assert_eq!(temp >= th.t_lo, step >= k, "step {step}");
        }
    }

    #[test]
    fn simulation_covers_window() {
        let v = vehicle();
        let th = ThermalParams::default();
        let p = vec![2.0; 6];
        let (soc, temp) = simulate_vehicle(&v, &th, 0.25, &[0.0; 6], &p, &[0.0; 6]);
        assert_eq!(soc.len(), 5);
        assert_eq!(temp[0], -2.0);
        assert!((soc[4] - (0.1 + 4.0 * 0.92 * 2.0 * 0.25 / 37.0)).abs() < 1e-12);
    }
}

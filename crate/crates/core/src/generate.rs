//! Random fleets, scenario sets and synthetic base profiles.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. Each
//! generator draws from its own stream (`FLEET_STREAM`, `SCENARIO_STREAM`) so
//! changing the scenario count never changes the fleet and vice versa.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ScenarioSet, TimeGrid, VehicleSpec};
use crate::error::{Error, Result};

pub const FLEET_STREAM: u64 = 1;
pub const SCENARIO_STREAM: u64 = 2;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ranges for the per-vehicle quantities that have no base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetOptions {
    /// Inclusive range of arrival steps.
    pub arrival_steps: (usize, usize),
    /// Inclusive range of departure steps.
    pub departure_steps: (usize, usize),
    pub soc_arr_range: (f64, f64),
    pub soc_dep_req: f64,
    /// Arrival battery temperature range, °C.
    pub temp_arr_range: (f64, f64),
    /// Relative spread of the technical parameters around their base values.
    pub spread: f64,
}

impl Default for FleetOptions {
    /// Arrivals 7:00 to 9:00, departures 17:00 to 22:00 on the default grid.
    fn default() -> Self {
        Self {
            arrival_steps: (0, 8),
            departure_steps: (40, 60),
            soc_arr_range: (0.0, 0.4),
            soc_dep_req: 0.9,
            temp_arr_range: (-3.0, 3.0),
            spread: 0.05,
        }
    }
}

/// Base technical parameters of one vehicle before the random spread.
pub const BASE_CAPACITY_KWH: f64 = 37.0;
pub const BASE_P_TOTAL_MAX: f64 = 7.4;
pub const BASE_PC_BAR: f64 = 4.8;
pub const BASE_BETA_CHG: f64 = 0.12;
pub const BASE_PH_BAR: f64 = 3.0;
pub const BASE_BETA_HEAT: f64 = 0.024;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

pub fn gen_fleet(n: usize, seed: u64) -> Result<Vec<VehicleSpec>> {
    gen_fleet_with(n, seed, &FleetOptions::default())
}

pub fn gen_fleet_with(n: usize, seed: u64, opts: &FleetOptions) -> Result<Vec<VehicleSpec>> {
    if n == 0 {
        return Err(Error::EmptyFleet);
    }
    let (a0, a1) = opts.arrival_steps;
    let (d0, d1) = opts.departure_steps;
    if a0 > a1 || d0 > d1 || a1 >= d0 {
        return Err(Error::InvalidOption(format!(
            "arrival steps {a0}..={a1} must precede departure steps {d0}..={d1}"
        )));
    }
    if !(0.0..1.0).contains(&opts.spread) {
        return Err(Error::InvalidOption(format!("spread {} must lie in [0, 1)", opts.spread)));
    }
    let mut rng = rng_for(seed, FLEET_STREAM);
    let s = opts.spread;
    let mut fleet = Vec::with_capacity(n);
    for id in 0..n {
        let mut jitter = |base: f64| base * uniform(&mut rng, 1.0 - s, 1.0 + s);
        let capacity_kwh = jitter(BASE_CAPACITY_KWH);
        let mass_kg = jitter(crate::domain::BASE_MASS_KG);
        let p_total_max = jitter(BASE_P_TOTAL_MAX);
        let pc_bar = jitter(BASE_PC_BAR);
        let beta_chg = jitter(BASE_BETA_CHG);
        let ph_bar = jitter(BASE_PH_BAR);
        let beta_heat = jitter(BASE_BETA_HEAT);
        let soc_arr = uniform(&mut rng, opts.soc_arr_range.0, opts.soc_arr_range.1);
        let temp_arr = uniform(&mut rng, opts.temp_arr_range.0, opts.temp_arr_range.1);
        let ta = rng.gen_range(a0..=a1);
        let td = rng.gen_range(d0..=d1);
        fleet.push(VehicleSpec {
            id,
            capacity_kwh,
            mass_kg,
            p_total_max,
            pc_bar,
            beta_chg,
            ph_bar,
            beta_heat,
            soc_arr,
            soc_dep_req: opts.soc_dep_req,
            temp_arr,
            ta,
            td,
        });
    }
    Ok(fleet)
}

/// Noise levels for scenario generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioNoise {
    /// Relative per-step solar noise.
    pub solar: f64,
    /// Relative per-step temperature noise.
    pub temp_rel: f64,
    /// Per-scenario additive temperature shift, °C.
    pub temp_shift: f64,
}

impl Default for ScenarioNoise {
    fn default() -> Self {
        Self { solar: 0.10, temp_rel: 0.15, temp_shift: 1.0 }
    }
}

pub fn gen_scenarios(base_solar: &[f64], base_temp: &[f64], n_scen: usize, seed: u64) -> Result<ScenarioSet> {
    gen_scenarios_with(base_solar, base_temp, n_scen, seed, &ScenarioNoise::default())
}

/// Solar: `base·(1+u)` with `u` drawn per step. Temperature: `base·(1+v) + s`
/// with `v` drawn per step and `s` per scenario. Probabilities are uniform.
pub fn gen_scenarios_with(
    base_solar: &[f64],
    base_temp: &[f64],
    n_scen: usize,
    seed: u64,
    noise: &ScenarioNoise,
) -> Result<ScenarioSet> {
    if n_scen == 0 {
        return Err(Error::InvalidScenarios("at least one scenario is required".into()));
    }
    if base_solar.len() != base_temp.len() {
        return Err(Error::InvalidScenarios(format!(
            "solar profile has {} steps, temperature profile {}",
            base_solar.len(),
            base_temp.len()
        )));
    }
    if let Some(step) = base_solar.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::NegativeSolar { step, value: base_solar[step] });
    }
    let mut rng = rng_for(seed, SCENARIO_STREAM);
    let mut sym = |a: f64| uniform(&mut rng, -a, a);
    let mut pv_cap = Vec::with_capacity(n_scen);
    let mut temp_amb = Vec::with_capacity(n_scen);
    for _ in 0..n_scen {
        let pv: Vec<f64> = base_solar.iter().map(|b| (b * (1.0 + sym(noise.solar))).max(0.0)).collect();
        let s = sym(noise.temp_shift);
        let temp: Vec<f64> = base_temp.iter().map(|b| b * (1.0 + sym(noise.temp_rel)) + s).collect();
        pv_cap.push(pv);
        temp_amb.push(temp);
    }
    Ok(ScenarioSet { prob: vec![1.0 / n_scen as f64; n_scen], pv_cap, temp_amb })
}

/// Element-wise mean of two step-aligned profiles.
pub fn average_profiles(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::InvalidOption(format!("profiles have {} and {} steps", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
}

/// Scales `profile` down so its maximum does not exceed `peak`. Profiles that
/// are already below `peak` are returned unchanged.
pub fn cap_peak(profile: &[f64], peak: f64) -> Vec<f64> {
    let max = profile.iter().copied().fold(0.0, f64::max);
    if max <= peak || max <= 0.0 {
        return profile.to_vec();
    }
    let k = peak / max;
    profile.iter().map(|v| v * k).collect()
}

/// Clear-sky shape of a November day, normalized to a peak of 1 and
/// averaged over each step. Sunrise 6:45, sunset 16:15.
pub fn synthetic_solar_shape(grid: &TimeGrid) -> Vec<f64> {
    let (rise, set) = (6.75, 16.25);
    let at = |h: f64| {
        if h <= rise || h >= set {
            0.0
        } else {
            (std::f64::consts::PI * (h - rise) / (set - rise)).sin().powf(1.5)
        }
    };
    let sub = 8;
    (0..grid.n_steps)
        .map(|t| {
            let h0 = grid.hour_of(t);
            (0..sub).map(|k| at(h0 + grid.dt * (k as f64 + 0.5) / sub as f64)).sum::<f64>() / sub as f64
        })
        .collect()
}

/// Cold late-autumn day: −3 °C at 7:00 warming to 3.2 °C at 14:00, then
/// cooling to −1.8 °C at 22:00. Evaluated at each step start.
pub fn synthetic_cold_day(grid: &TimeGrid) -> Vec<f64> {
    use std::f64::consts::PI;
    let (t_min, t_max, t_night) = (-3.0, 3.2, -1.8);
    (0..grid.n_steps)
        .map(|t| {
            let h = grid.hour_of(t);
            if h <= 7.0 {
                t_min
            } else if h <= 14.0 {
                t_min + (t_max - t_min) * (1.0 - (PI * (h - 7.0) / 7.0).cos()) / 2.0
            } else {
                let f = ((h - 14.0) / 8.0).min(1.0);
                t_max - (t_max - t_night) * (1.0 - (PI * f).cos()) / 2.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fleet_parameters_within_spread() {
        let fleet = gen_fleet(50, 3).unwrap();
        for v in &fleet {
            assert!((35.15..=38.85).contains(&v.capacity_kwh));
            assert!((0.0..=0.4).contains(&v.soc_arr));
            assert_eq!(v.soc_dep_req, 0.9);
            assert!((7.03..=7.77).contains(&v.p_total_max));
            assert!(v.ta <= 8 && (40..=60).contains(&v.td));
            v.validate(&TimeGrid::default()).unwrap();
        }
        assert_eq!(fleet, gen_fleet(50, 3).unwrap());
        assert_ne!(fleet, gen_fleet(50, 4).unwrap());
        assert!(matches!(gen_fleet(0, 1), Err(Error::EmptyFleet)));
    }

    #[test]
    fn scenario_examples() {
        let solar = vec![0.0, 2.0, 4.0];
        let temp = vec![-5.0, -5.0, -5.0];
        let s = gen_scenarios(&solar, &temp, 4, 9).unwrap();
        assert_eq!(s.prob, vec![0.25; 4]);
        for w in 0..4 {
            assert_eq!(s.pv_cap[w][0], 0.0);
            assert!((1.8..=2.2).contains(&s.pv_cap[w][1]));
            for &t in &s.temp_amb[w] {
                assert!((-6.75..=-3.25).contains(&t), "{t}");
            }
        }
        assert!(matches!(
            gen_scenarios(&[1.0, -0.5], &[0.0, 0.0], 2, 1),
            Err(Error::NegativeSolar { step: 1, .. })
        ));
    }

    #[test]
    fn cold_day_spans_expected_range() {
        let grid = TimeGrid::default();
        let t = synthetic_cold_day(&grid);
        let min = t.iter().copied().fold(f64::INFINITY, f64::min);
        let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((min + 3.0).abs() < 1e-9);
        assert!((max - 3.2).abs() < 1e-9);
        let solar = synthetic_solar_shape(&grid);
        assert!(solar.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(*solar.last().unwrap(), 0.0);
    }

    #[test]
    fn peak_capping() {
        assert_eq!(cap_peak(&[1.0, 4.0, 2.0], 2.0), vec![0.5, 2.0, 1.0]);
        assert_eq!(cap_peak(&[1.0, 1.5], 2.0), vec![1.0, 1.5]);
        assert_eq!(average_profiles(&[1.0, 3.0], &[3.0, 5.0]).unwrap(), vec![2.0, 4.0]);
    }
}

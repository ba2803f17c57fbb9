//! Station, vehicle, tariff and scenario types.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time discretization of the scheduling horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Hour of day at which step 0 starts.
    pub start_hour: f64,
    pub n_steps: usize,
    /// Step length in hours.
    pub dt: f64,
}

impl Default for TimeGrid {
    /// 7:00 to 22:00 in 15-minute steps.
    fn default() -> Self {
        Self { start_hour: 7.0, n_steps: 60, dt: 0.25 }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.start_hour >= 0.0) || self.end_hour() > 24.0 + 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "horizon {:.2}h to {:.2}h is not within one day",
                self.start_hour,
                self.end_hour()
            )));
        }
        Ok(())
    }

    /// Hour of day at which step `t` starts.
    pub fn hour_of(&self, t: usize) -> f64 {
        self.start_hour + t as f64 * self.dt
    }

    pub fn end_hour(&self) -> f64 {
        self.hour_of(self.n_steps)
    }
}

/// Coefficients of the battery thermal model, shared by all vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Specific heat of the pack, kWh/(kg·°C).
    pub heat_capacity_c: f64,
    /// Heat transfer coefficient times surface area, kW/°C.
    pub loss_coeff_ha: f64,
    pub mu_heat: f64,
    pub eta_heat: f64,
    pub eta_chg: f64,
    /// Slope of the low-temperature charging rule, kW/°C.
    pub mu_chg: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_set: f64,
}

/// Specific heat of a typical Li-ion pack, 1015 J/(kg·°C), in kWh/(kg·°C).
pub const PACK_SPECIFIC_HEAT: f64 = 1015.0 / 3.6e6;
/// Reference pack mass used to calibrate the default heat loss coefficient.
pub const BASE_MASS_KG: f64 = 235.88;
/// Passive cooling time constant m·c/(μ_heat·hA) of the reference pack, hours.
pub const COOLING_TIME_CONSTANT_H: f64 = 4.0;

impl Default for ThermalParams {
    fn default() -> Self {
        let mu_heat = 0.4;
        Self {
            heat_capacity_c: PACK_SPECIFIC_HEAT,
            loss_coeff_ha: BASE_MASS_KG * PACK_SPECIFIC_HEAT / (mu_heat * COOLING_TIME_CONSTANT_H),
            mu_heat,
            eta_heat: 0.8,
            eta_chg: 0.92,
            mu_chg: 0.22,
            t_lo: 0.0,
            t_hi: 35.0,
            t_set: 15.0,
        }
    }
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let bad = |msg: String| Err(Error::InvalidThermal(msg));
        if !unit(self.eta_chg) || !unit(self.eta_heat) || !unit(self.mu_heat) {
            return bad(format!(
                "efficiencies must lie in (0, 1]: eta_chg={}, eta_heat={}, mu_heat={}",
                self.eta_chg, self.eta_heat, self.mu_heat
            ));
        }
        if !(self.t_lo < self.t_set && self.t_set < self.t_hi) {
            return bad(format!(
                "need t_lo < t_set < t_hi, got {} / {} / {}",
                self.t_lo, self.t_set, self.t_hi
            ));
        }
        if !(self.heat_capacity_c > 0.0) || !(self.loss_coeff_ha >= 0.0) || !(self.mu_chg >= 0.0) {
            return bad("heat capacity must be positive, loss coefficient and mu_chg non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: usize,
    pub capacity_kwh: f64,
    pub mass_kg: f64,
    /// Limit on charging plus heating power, kW.
    pub p_total_max: f64,
    /// Charging limit at 0 °C, kW.
    pub pc_bar: f64,
    /// Increase of the charging limit per °C, kW/°C.
    pub beta_chg: f64,
    /// Heating limit at 0 °C, kW.
    pub ph_bar: f64,
    /// Decrease of the heating limit per °C, kW/°C.
    pub beta_heat: f64,
    pub soc_arr: f64,
    pub soc_dep_req: f64,
    pub temp_arr: f64,
    /// First step at which the vehicle is plugged in.
    pub ta: usize,
    /// Departure step; the vehicle is plugged in during steps `ta..td`.
    pub td: usize,
}

impl VehicleSpec {
    pub fn window(&self) -> Range<usize> {
        self.ta..self.td
    }

    pub fn is_plugged(&self, t: usize) -> bool {
        self.window().contains(&t)
    }

    /// Thermal mass m·c in kWh/°C.
    pub fn thermal_mass(&self, thermal: &ThermalParams) -> f64 {
        self.mass_kg * thermal.heat_capacity_c
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidVehicle { id: self.id, reason });
        if !(0.0..=1.0).contains(&self.soc_arr) || !(0.0..=1.0).contains(&self.soc_dep_req) {
            return fail(format!("SoC values must lie in [0, 1] (arrival {}, departure {})", self.soc_arr, self.soc_dep_req));
        }
        if !(self.ta < self.td && self.td <= grid.n_steps) {
            return fail(format!("window {}..{} is outside the {}-step horizon", self.ta, self.td, grid.n_steps));
        }
        if !(self.capacity_kwh > 0.0) || !(self.mass_kg > 0.0) {
            return fail("capacity and mass must be positive".into());
        }
        let powers = [self.p_total_max, self.pc_bar, self.beta_chg, self.ph_bar, self.beta_heat];
        if powers.iter().any(|p| !(*p >= 0.0)) || !(self.p_total_max > 0.0) {
            return fail("power limits must be non-negative and p_total_max positive".into());
        }
        if !self.temp_arr.is_finite() {
            return fail("arrival temperature must be finite".into());
        }
        Ok(())
    }
}

/// Electricity price per step in ¢/kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub price_per_step: Vec<f64>,
}

impl Tariff {
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if self.price_per_step.len() != grid.n_steps {
            return Err(Error::InvalidTariff(format!(
                "{} prices for {} steps",
                self.price_per_step.len(),
                grid.n_steps
            )));
        }
        if let Some(t) = self.price_per_step.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidTariff(format!("price at step {t} is {}", self.price_per_step[t])));
        }
        Ok(())
    }
}

pub const OFF_PEAK_PRICE: f64 = 12.48;
pub const MID_PEAK_PRICE: f64 = 17.22;
pub const ON_PEAK_PRICE: f64 = 22.09;

/// Time-of-use tariff: mid-peak 8:00 to 12:00, on-peak 12:00 to 18:00,
/// off-peak otherwise. A step is priced by the hour at which it starts.
pub fn build_tou_tariff(grid: &TimeGrid) -> Tariff {
    let price_per_step = (0..grid.n_steps)
        .map(|t| {
            let h = grid.hour_of(t) + 1e-9;
            if (8.0..12.0).contains(&h) {
                MID_PEAK_PRICE
            } else if (12.0..18.0).contains(&h) {
                ON_PEAK_PRICE
            } else {
                OFF_PEAK_PRICE
            }
        })
        .collect();
    Tariff { price_per_step }
}

/// Solar availability and ambient temperature scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub prob: Vec<f64>,
    /// Available solar power, kW, indexed `[scenario][step]`.
    pub pv_cap: Vec<Vec<f64>>,
    /// Ambient temperature, °C, indexed `[scenario][step]`.
    pub temp_amb: Vec<Vec<f64>>,
}

impl ScenarioSet {
    pub fn n_scen(&self) -> usize {
        self.prob.len()
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenarios(msg));
        let n = self.prob.len();
        if n == 0 {
            return bad("at least one scenario is required".into());
        }
        if self.pv_cap.len() != n || self.temp_amb.len() != n {
            return bad(format!(
                "{} probabilities but {} solar and {} temperature rows",
                n,
                self.pv_cap.len(),
                self.temp_amb.len()
            ));
        }
        if self.prob.iter().any(|p| !(*p > 0.0)) {
            return bad("probabilities must be positive".into());
        }
        let total: f64 = self.prob.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("probabilities sum to {total}"));
        }
        for w in 0..n {
            if self.pv_cap[w].len() != grid.n_steps || self.temp_amb[w].len() != grid.n_steps {
                return bad(format!("scenario {w} does not have {} steps", grid.n_steps));
            }
            if self.pv_cap[w].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return bad(format!("scenario {w} has a negative or non-finite solar value"));
            }
            if self.temp_amb[w].iter().any(|v| !v.is_finite()) {
                return bad(format!("scenario {w} has a non-finite temperature"));
            }
        }
        Ok(())
    }

    /// Solar availability guaranteed in every scenario at step `t`.
    pub fn min_pv(&self, t: usize) -> f64 {
        self.pv_cap.iter().map(|row| row[t]).fold(f64::INFINITY, f64::min)
    }

    /// Copy with every ambient temperature shifted by `delta` °C.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.temp_amb.iter_mut().flatten().for_each(|v| *v += delta);
        out
    }
}

/// Constants of the big-M linearization of the low-temperature charging rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigM {
    /// Multiplies the rule indicator in the temperature row, °C.
    pub temp: f64,
    /// Multiplies the rule indicator in the charging-power row, kW.
    pub power: f64,
}

impl BigM {
    /// Smallest constants that keep both rows redundant when they should be.
    ///
    /// The temperature row must hold with the indicator on for any admissible
    /// temperature, so `temp = t_set − t_lo`. With the indicator off the battery
    /// is at least at `t_set` and charging is bounded by both `p̄` and
    /// `p̄c + β_chg·T`, so the power row needs the largest value of
    /// `min(p̄, p̄c + β_chg·T) − μ_chg·T` over `T ∈ [t_set, t_hi]`.
    pub fn tight(thermal: &ThermalParams, fleet: &[VehicleSpec]) -> Self {
        let power = fleet.iter().map(|v| Self::power_margin(thermal, v)).fold(0.0, f64::max);
        Self { temp: thermal.t_set - thermal.t_lo, power }
    }

    fn power_margin(th: &ThermalParams, v: &VehicleSpec) -> f64 {
        let excess = |t: f64| v.p_total_max.min(v.pc_bar + v.beta_chg * t) - th.mu_chg * t;
        // The excess is concave and piecewise linear; its maximum sits at an
        // end of the range or where the two charging limits cross.
        let mut best = excess(th.t_set).max(excess(th.t_hi));
        if v.beta_chg > 0.0 {
            let cross = (v.p_total_max - v.pc_bar) / v.beta_chg;
            if (th.t_set..=th.t_hi).contains(&cross) {
                best = best.max(excess(cross));
            }
        }
        best.max(0.0)
    }

    pub fn is_valid_for(&self, thermal: &ThermalParams, fleet: &[VehicleSpec]) -> bool {
        let tight = Self::tight(thermal, fleet);
        self.temp >= tight.temp - 1e-12 && self.power >= tight.power - 1e-12
    }
}

/// A complete station instance apart from the uncertain inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationModel {
    pub grid: TimeGrid,
    pub tariff: Tariff,
    pub thermal: ThermalParams,
    pub fleet: Vec<VehicleSpec>,
    /// Station grid connection limit, kW.
    pub pg_max: f64,
    pub big_m: BigM,
}

impl StationModel {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.tariff.validate(&self.grid)?;
        self.thermal.validate()?;
        if self.fleet.is_empty() {
            return Err(Error::EmptyFleet);
        }
        for v in &self.fleet {
            v.validate(&self.grid)?;
        }
        if !(self.pg_max > 0.0) || !self.pg_max.is_finite() {
            return Err(Error::InvalidGridLimit(self.pg_max));
        }
        if !self.big_m.is_valid_for(&self.thermal, &self.fleet) {
            let tight = BigM::tight(&self.thermal, &self.fleet);
            return Err(Error::InvalidOption(format!(
                "big-M constants ({}, {}) are below the valid minimum ({}, {})",
                self.big_m.temp, self.big_m.power, tight.temp, tight.power
            )));
        }
        Ok(())
    }

    pub fn validate_with(&self, scen: &ScenarioSet) -> Result<()> {
        self.validate()?;
        scen.validate(&self.grid)
    }

    /// Sum of the vehicles' power limits, kW.
    pub fn connected_capacity(&self) -> f64 {
        self.fleet.iter().map(|v| v.p_total_max).sum()
    }
}

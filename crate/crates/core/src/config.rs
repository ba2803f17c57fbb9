//! JSON instance configuration.
//!
//! A config describes how to build a [`StationModel`] and a [`ScenarioSet`]:
//! the fleet is generated from `seed` (or listed explicitly), base profiles
//! come from CSV files or from the built-in synthetic cold day, and scenarios
//! are drawn around the base profiles. Relative CSV paths are resolved
//! against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_tou_tariff, BigM, ScenarioSet, StationModel, Tariff, ThermalParams, TimeGrid, VehicleSpec};
use crate::error::{Error, Result};
use crate::generate::{
    average_profiles, cap_peak, gen_fleet_with, gen_scenarios_with, synthetic_cold_day, synthetic_solar_shape,
    FleetOptions, ScenarioNoise,
};
use crate::timeseries::{load_timeseries, SeriesKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolarSource {
    /// Zero files: synthetic clear-sky shape. One file: used as is. Two files:
    /// averaged.
    pub csv: Vec<PathBuf>,
    /// Cap the base profile's peak at this fraction of the connected capacity.
    /// The synthetic shape is scaled to exactly this peak.
    pub peak_fraction: Option<f64>,
}

impl Default for SolarSource {
    fn default() -> Self {
        Self { csv: Vec::new(), peak_fraction: Some(0.4) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureSource {
    /// Base ambient profile; the synthetic cold day when absent.
    pub csv: Option<PathBuf>,
    /// Added to every scenario's ambient temperature and to every arrival
    /// battery temperature, °C.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationConfig {
    pub seed: u64,
    pub grid: TimeGrid,
    pub n_vehicles: usize,
    pub fleet: FleetOptions,
    /// Explicit fleet; replaces generation when present.
    pub vehicles: Option<Vec<VehicleSpec>>,
    pub n_scenarios: usize,
    pub noise: ScenarioNoise,
    pub solar: SolarSource,
    pub temperature: TemperatureSource,
    /// Price CSV in ¢/kWh; the time-of-use tariff when absent.
    pub tariff_csv: Option<PathBuf>,
    /// Grid limit in kW; defaults to `grid_limit_fraction` of the connected
    /// capacity.
    pub grid_limit_kw: Option<f64>,
    pub grid_limit_fraction: f64,
    pub thermal: ThermalParams,
    /// Big-M constants; the tightest valid values when absent.
    pub big_m: Option<BigM>,
}

impl Default for StationConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            grid: TimeGrid::default(),
            n_vehicles: 2,
            fleet: FleetOptions::default(),
            vehicles: None,
            n_scenarios: 10,
            noise: ScenarioNoise::default(),
            solar: SolarSource::default(),
            temperature: TemperatureSource::default(),
            tariff_csv: None,
            grid_limit_kw: None,
            grid_limit_fraction: 0.5,
            thermal: ThermalParams::default(),
            big_m: None,
        }
    }
}

/// A built instance together with its base profiles.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: StationModel,
    pub scenarios: ScenarioSet,
    pub base_solar: Vec<f64>,
    pub base_temp: Vec<f64>,
}

impl StationConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Builds the instance. `base_dir` resolves relative CSV paths.
    pub fn build(&self, base_dir: &Path) -> Result<Instance> {
        self.grid.validate()?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let fleet = match &self.vehicles {
            Some(v) if v.is_empty() => return Err(Error::EmptyFleet),
            Some(v) => v.clone(),
            None => gen_fleet_with(self.n_vehicles, self.seed, &self.fleet)?,
        };
        let fleet: Vec<VehicleSpec> = fleet
            .into_iter()
            .map(|v| VehicleSpec { temp_arr: v.temp_arr + self.temperature.shift, ..v })
            .collect();
        let capacity: f64 = fleet.iter().map(|v| v.p_total_max).sum();

        let base_solar = match self.solar.csv.as_slice() {
            [] => {
                let peak = self.solar.peak_fraction.unwrap_or(0.4) * capacity;
                synthetic_solar_shape(&self.grid).into_iter().map(|v| v * peak).collect()
            }
            [a] => self.capped(load_timeseries(&resolve(a), SeriesKind::Solar, &self.grid)?, capacity),
            [a, b] => {
                let a = load_timeseries(&resolve(a), SeriesKind::Solar, &self.grid)?;
                let b = load_timeseries(&resolve(b), SeriesKind::Solar, &self.grid)?;
                self.capped(average_profiles(&a, &b)?, capacity)
            }
            more => return Err(Error::Config(format!("at most two solar files, got {}", more.len()))),
        };
        let base_temp = match &self.temperature.csv {
            Some(p) => load_timeseries(&resolve(p), SeriesKind::Temperature, &self.grid)?,
            None => synthetic_cold_day(&self.grid),
        };
        let tariff = match &self.tariff_csv {
            Some(p) => Tariff { price_per_step: load_timeseries(&resolve(p), SeriesKind::Price, &self.grid)? },
            None => build_tou_tariff(&self.grid),
        };
        let scenarios = gen_scenarios_with(&base_solar, &base_temp, self.n_scenarios, self.seed, &self.noise)?
            .shifted(self.temperature.shift);
        let pg_max = self.grid_limit_kw.unwrap_or(self.grid_limit_fraction * capacity);
        let big_m = self.big_m.unwrap_or_else(|| BigM::tight(&self.thermal, &fleet));
        let model = StationModel { grid: self.grid, tariff, thermal: self.thermal, fleet, pg_max, big_m };
        model.validate_with(&scenarios)?;
        Ok(Instance { model, scenarios, base_solar, base_temp })
    }

    fn capped(&self, profile: Vec<f64>, capacity: f64) -> Vec<f64> {
        match self.solar.peak_fraction {
            Some(f) => cap_peak(&profile, f * capacity),
            None => profile,
        }
    }
}

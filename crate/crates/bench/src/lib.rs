//! Experiment commands behind the `coldcharge` binary: scheme comparison,
//! ambient temperature sweeps, scale timing, config generation and LP dumps.
//!
//! CSV outputs carry no wall-clock values, so two runs with the same seed
//! write identical CSV files (as long as no time limit binds). Timings go to
//! the JSON reports.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use coldcharge_core::{
    build_centralized, compute_metrics_for, run_decentralized, run_instant_chg_heat, run_no_heat, run_smart_chg_heat,
    solve_centralized, BuildOptions, CentralOptions, CostBasis, DecentOptions, Instance, MetricsReport, Schedule,
    StationConfig, DEFAULT_RATIOS,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] coldcharge_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl BenchError {
    /// Process exit code: 2 usage, 3 infeasible, 4 no incumbent in time,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            BenchError::Core(coldcharge_core::Error::Infeasible(_)) => 3,
            BenchError::Core(coldcharge_core::Error::NoIncumbent(_)) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    TcscCentral,
    TcscDecent,
    SmartChgHeat,
    InstantChgHeat,
    NoHeat,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::TcscCentral, Scheme::TcscDecent, Scheme::SmartChgHeat, Scheme::InstantChgHeat, Scheme::NoHeat];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::TcscCentral => "tcsc-central",
            Scheme::TcscDecent => "tcsc-decent",
            Scheme::SmartChgHeat => "smart-chg-heat",
            Scheme::InstantChgHeat => "instant-chg-heat",
            Scheme::NoHeat => "no-heat",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Scheme::ALL.iter().map(|x| x.name()).collect();
            BenchError::Usage(format!("unknown scheme {s:?}; valid schemes: {}", valid.join(", ")))
        })
    }
}

/// Solver limits and metric settings shared by all commands.
#[derive(Debug, Clone)]
pub struct RunLimits {
    /// The centralized solve gets this much per vehicle in total.
    pub central_time_per_vehicle: Duration,
    pub gap_tol: f64,
    pub decent: DecentOptions,
    pub ratios: Vec<f64>,
    pub basis: CostBasis,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            central_time_per_vehicle: Duration::from_secs(60),
            gap_tol: 1e-4,
            decent: DecentOptions::default(),
            ratios: DEFAULT_RATIOS.to_vec(),
            basis: CostBasis::Battery,
        }
    }
}

impl RunLimits {
    pub fn central(&self, n_vehicles: usize) -> CentralOptions {
        CentralOptions {
            time_limit: self.central_time_per_vehicle * n_vehicles as u32,
            gap_tol: self.gap_tol,
            build: self.decent.build,
        }
    }
}

pub fn run_scheme(scheme: Scheme, inst: &Instance, limits: &RunLimits) -> Result<Schedule> {
    let (m, s) = (&inst.model, &inst.scenarios);
    let out = match scheme {
        Scheme::TcscCentral => solve_centralized(m, s, &limits.central(m.fleet.len()))?,
        Scheme::TcscDecent => run_decentralized(m, s, &limits.decent)?,
        Scheme::SmartChgHeat => run_smart_chg_heat(m, s, &limits.ratios)?,
        Scheme::InstantChgHeat => run_instant_chg_heat(m, s, &limits.ratios)?,
        Scheme::NoHeat => run_no_heat(m, s)?,
    };
    Ok(out)
}

/// Short label of an instance used in every report row.
pub fn describe(cfg: &StationConfig, inst: &Instance) -> String {
    format!(
        "v{}-s{}-seed{}-shift{}",
        inst.model.fleet.len(),
        inst.scenarios.n_scen(),
        cfg.seed,
        cfg.temperature.shift
    )
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    std::fs::write(path, text).map_err(io_err(path))
}

/// One metrics row without the wall time.
#[derive(Debug, Clone, Serialize)]
struct MetricsCsvRow<'a> {
    scheme: &'a str,
    instance: &'a str,
    unmet_soc: f64,
    charging_cost: Option<f64>,
    overhead_rate: f64,
    solar_usage_rate: f64,
    expected_cost: f64,
    stored_energy: f64,
}

impl<'a> From<&'a MetricsReport> for MetricsCsvRow<'a> {
    fn from(m: &'a MetricsReport) -> Self {
        Self {
            scheme: &m.scheme,
            instance: &m.instance,
            unmet_soc: m.unmet_soc,
            charging_cost: m.charging_cost,
            overhead_rate: m.overhead_rate,
            solar_usage_rate: m.solar_usage_rate,
            expected_cost: m.expected_cost,
            stored_energy: m.stored_energy,
        }
    }
}

/// Runs each scheme on the same instance. With an output directory, writes
/// `metrics.csv`, `metrics.json`, one schedule JSON per scheme and the
/// per-vehicle trajectories under `trajectories/<scheme>/`.
pub fn cmd_compare(
    cfg: &StationConfig,
    base_dir: &Path,
    schemes: &[Scheme],
    out_dir: Option<&Path>,
    limits: &RunLimits,
) -> Result<Vec<MetricsReport>> {
    let inst = cfg.build(base_dir)?;
    let label = describe(cfg, &inst);
    let mut reports = Vec::with_capacity(schemes.len());
    let mut schedules = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let s = run_scheme(scheme, &inst, limits)?;
        reports.push(compute_metrics_for(&s, &inst.model, &inst.scenarios, limits.basis, &label));
        schedules.push(s);
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        let rows: Vec<MetricsCsvRow> = reports.iter().map(MetricsCsvRow::from).collect();
        write_csv(&dir.join("metrics.csv"), &rows)?;
        write_json(&dir.join("metrics.json"), &reports)?;
        for (scheme, s) in schemes.iter().zip(&schedules) {
            let path = dir.join(format!("{}.json", scheme.name()));
            s.write_json(&path)?;
            s.write_vehicle_csvs(&dir.join("trajectories").join(scheme.name()), &inst.model, &inst.scenarios)?;
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: String,
    pub shift: f64,
    pub charging_cost: Option<f64>,
    pub overhead_rate: f64,
    pub unmet_soc: f64,
    pub expected_cost: f64,
}

/// Least-squares slopes of one scheme's sweep, per °C of shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSlope {
    pub scheme: String,
    pub cost_slope: Option<f64>,
    pub overhead_slope: Option<f64>,
}

/// Slope of the least-squares line through `(x, y)`; `None` with fewer than
/// two distinct `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

pub fn sweep_slopes(rows: &[SweepRow], schemes: &[Scheme]) -> Vec<SweepSlope> {
    schemes
        .iter()
        .map(|s| {
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.scheme == s.name()).collect();
            let costs: Vec<(f64, f64)> = mine.iter().filter_map(|r| r.charging_cost.map(|c| (r.shift, c))).collect();
            let (cx, cy): (Vec<f64>, Vec<f64>) = costs.into_iter().unzip();
            let ox: Vec<f64> = mine.iter().map(|r| r.shift).collect();
            let oy: Vec<f64> = mine.iter().map(|r| r.overhead_rate).collect();
            SweepSlope {
                scheme: s.name().to_string(),
                cost_slope: least_squares_slope(&cx, &cy),
                overhead_slope: least_squares_slope(&ox, &oy),
            }
        })
        .collect()
}

/// Re-runs the schemes with every ambient temperature (and arrival battery
/// temperature) shifted. Writes `sweep.csv` and `slopes.csv`.
pub fn cmd_temp_sweep(
    cfg: &StationConfig,
    base_dir: &Path,
    shifts: &[f64],
    schemes: &[Scheme],
    out_dir: Option<&Path>,
    limits: &RunLimits,
) -> Result<(Vec<SweepRow>, Vec<SweepSlope>)> {
    if let Some(bad) = shifts.iter().find(|s| !s.is_finite()) {
        return Err(BenchError::Usage(format!("shift {bad} is not finite")));
    }
    let mut rows = Vec::new();
    for &shift in shifts {
        let mut shifted = cfg.clone();
        shifted.temperature.shift += shift;
        let inst = shifted.build(base_dir)?;
        let label = describe(&shifted, &inst);
        for &scheme in schemes {
            let s = run_scheme(scheme, &inst, limits)?;
            let m = compute_metrics_for(&s, &inst.model, &inst.scenarios, limits.basis, &label);
            rows.push(SweepRow {
                scheme: m.scheme,
                shift,
                charging_cost: m.charging_cost,
                overhead_rate: m.overhead_rate,
                unmet_soc: m.unmet_soc,
                expected_cost: m.expected_cost,
            });
        }
    }
    let slopes = sweep_slopes(&rows, schemes);
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_csv(&dir.join("sweep.csv"), &rows)?;
        write_csv(&dir.join("slopes.csv"), &slopes)?;
    }
    Ok((rows, slopes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub n_vehicles: usize,
    pub n_scenarios: usize,
    pub scheme: String,
    /// `ok`, or the error that ended the run.
    pub status: String,
    pub wall_time: f64,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
}

/// Parses `"30x60,10x4"` into `(vehicles, scenarios)` pairs.
pub fn parse_sizes(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|item| {
            let bad = || BenchError::Usage(format!("size {item:?} is not of the form <vehicles>x<scenarios>"));
            let (v, s) = item.trim().split_once('x').ok_or_else(bad)?;
            let v: usize = v.parse().map_err(|_| bad())?;
            let s: usize = s.parse().map_err(|_| bad())?;
            if v == 0 || s == 0 {
                return Err(bad());
            }
            Ok((v, s))
        })
        .collect()
}

/// Times both TCSC solvers on each size. Failures are recorded in the row
/// status instead of aborting the study. Writes `scale.json`.
pub fn cmd_scale(
    cfg: &StationConfig,
    base_dir: &Path,
    sizes: &[(usize, usize)],
    out_dir: Option<&Path>,
    limits: &RunLimits,
) -> Result<Vec<ScaleRow>> {
    let mut rows = Vec::new();
    for &(n_vehicles, n_scenarios) in sizes {
        let sized = StationConfig { n_vehicles, n_scenarios, vehicles: None, ..cfg.clone() };
        let inst = sized.build(base_dir)?;
        for scheme in [Scheme::TcscCentral, Scheme::TcscDecent] {
            let start = Instant::now();
            let row = match run_scheme(scheme, &inst, limits) {
                Ok(s) => ScaleRow {
                    n_vehicles,
                    n_scenarios,
                    scheme: scheme.name().into(),
                    status: "ok".into(),
                    wall_time: s.wall_time,
                    objective: s.solver.objective,
                    gap: s.solver.gap,
                },
                Err(e) => ScaleRow {
                    n_vehicles,
                    n_scenarios,
                    scheme: scheme.name().into(),
                    status: e.to_string(),
                    wall_time: start.elapsed().as_secs_f64(),
                    objective: None,
                    gap: None,
                },
            };
            rows.push(row);
        }
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join("scale.json"), &rows)?;
    }
    Ok(rows)
}

/// Writes the centralized model of the configured instance in LP format.
pub fn cmd_dump_lp<W: Write>(cfg: &StationConfig, base_dir: &Path, build: &BuildOptions, out: W) -> Result<()> {
    let inst = cfg.build(base_dir)?;
    let (p, _) = build_centralized(&inst.model, &inst.scenarios, build)?;
    coldcharge_milp::write_lp(&p, out).map_err(io_err(Path::new("<lp output>")))
}

/// Plain-text table of metrics for the terminal.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<18} {:>10} {:>14} {:>10} {:>10} {:>9}\n",
        "scheme", "unmet SoC", "cost (c/kWh)", "overhead%", "solar%", "wall (s)"
    );
    for m in reports {
        let cost = m.charging_cost.map_or("-".to_string(), |c| format!("{c:.3}"));
        out.push_str(&format!(
            "{:<18} {:>10.4} {:>14} {:>10.2} {:>10.2} {:>9.2}\n",
            m.scheme, m.unmet_soc, cost, m.overhead_rate, m.solar_usage_rate, m.wall_time
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        let err = "tcsc".parse::<Scheme>().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("no-heat"));
    }

    #[test]
    fn slope_of_a_line_and_degenerate_input() {
        let x = [-9.0, -6.0, -3.0, 0.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.4 * v).collect();
        assert!((least_squares_slope(&x, &y).unwrap() + 0.4).abs() < 1e-12);
        assert_eq!(least_squares_slope(&[1.0], &[2.0]), None);
        assert_eq!(least_squares_slope(&[1.0, 1.0], &[2.0, 3.0]), None);
        // Hand example: points (0,1), (1,2), (2,2) → slope 0.5.
        assert!((least_squares_slope(&[0.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_sizes("30x60, 2x10").unwrap(), vec![(30, 60), (2, 10)]);
        for bad in ["30", "0x4", "ax2", "3x"] {
            assert!(parse_sizes(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::Core(coldcharge_core::Error::Infeasible("x".into())).exit_code(), 3);
        assert_eq!(BenchError::Core(coldcharge_core::Error::NoIncumbent("x".into())).exit_code(), 4);
        assert_eq!(BenchError::Core(coldcharge_core::Error::EmptyFleet).exit_code(), 1);
    }

    #[test]
    fn central_limit_scales_with_the_fleet() {
        let limits = RunLimits { central_time_per_vehicle: Duration::from_secs(5), ..RunLimits::default() };
        assert_eq!(limits.central(30).time_limit, Duration::from_secs(150));
    }
}

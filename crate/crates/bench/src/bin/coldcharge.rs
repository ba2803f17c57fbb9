use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use coldcharge_bench::{
    cmd_compare, cmd_dump_lp, cmd_scale, cmd_temp_sweep, format_table, parse_sizes, BenchError, Result, RunLimits,
    Scheme,
};
use coldcharge_core::StationConfig;

#[derive(Parser)]
#[command(name = "coldcharge", version, about = "Thermal-aware charging schedules for a solar-powered station")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run several schemes on one instance and write a metrics table.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scheme names.
        #[arg(long, value_delimiter = ',', default_value = "tcsc-central,smart-chg-heat,instant-chg-heat,no-heat")]
        schemes: Vec<String>,
    },
    /// Shift the ambient temperature and record cost and overhead per shift.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "tcsc-central,smart-chg-heat,instant-chg-heat")]
        schemes: Vec<String>,
        /// Comma-separated shifts in °C.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "-9,-6,-3,0,3,6,9")]
        shifts: Vec<f64>,
    },
    /// Time the centralized and decentralized solvers on several sizes.
    Scale {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `<vehicles>x<scenarios>` pairs.
        #[arg(long, default_value = "10x10,30x60")]
        sizes: String,
    },
    /// Print (or write) the default instance configuration.
    GenConfig {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the centralized model in LP format.
    DumpLp {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Instance configuration JSON; the built-in default when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Centralized solve time per vehicle, seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit_per_vehicle: f64,
    /// Decentralized dual phase time per vehicle, seconds.
    #[arg(long)]
    dual_time_per_vehicle: Option<f64>,
    /// Decentralized rescheduling time per vehicle, seconds.
    #[arg(long)]
    reschedule_time_per_vehicle: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    gap_tol: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn seconds(v: f64, flag: &str) -> Result<Duration> {
    Duration::try_from_secs_f64(v).map_err(|_| BenchError::Usage(format!("--{flag} must be a non-negative number of seconds")))
}

fn load(config: Option<&Path>, seed: Option<u64>) -> Result<(StationConfig, PathBuf)> {
    let (mut cfg, base) = match config {
        Some(p) => (StationConfig::from_file(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (StationConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, base))
}

impl Common {
    fn limits(&self) -> Result<RunLimits> {
        let mut limits = RunLimits {
            central_time_per_vehicle: seconds(self.time_limit_per_vehicle, "time-limit-per-vehicle")?,
            gap_tol: self.gap_tol,
            ..RunLimits::default()
        };
        if !(self.gap_tol >= 0.0) {
            return Err(BenchError::Usage("--gap-tol must be non-negative".into()));
        }
        limits.decent.gap_tol = self.gap_tol;
        if let Some(v) = self.dual_time_per_vehicle {
            limits.decent.dual_time_per_vehicle = seconds(v, "dual-time-per-vehicle")?;
        }
        if let Some(v) = self.reschedule_time_per_vehicle {
            limits.decent.reschedule_time_per_vehicle = seconds(v, "reschedule-time-per-vehicle")?;
        }
        Ok(limits)
    }
}

fn schemes(names: &[String]) -> Result<Vec<Scheme>> {
    names.iter().map(|n| n.trim().parse()).collect()
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| BenchError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compare { common, schemes: names } => {
            let (cfg, base) = load(common.config.as_deref(), common.seed)?;
            let reports = cmd_compare(&cfg, &base, &schemes(&names)?, common.out_dir.as_deref(), &common.limits()?)?;
            print!("{}", format_table(&reports));
        }
        Command::Sweep { common, schemes: names, shifts } => {
            let (cfg, base) = load(common.config.as_deref(), common.seed)?;
            let list = schemes(&names)?;
            let (rows, slopes) = cmd_temp_sweep(&cfg, &base, &shifts, &list, common.out_dir.as_deref(), &common.limits()?)?;
            println!("{:<18} {:>6} {:>14} {:>10}", "scheme", "shift", "cost (c/kWh)", "overhead%");
            for r in &rows {
                let cost = r.charging_cost.map_or("-".to_string(), |c| format!("{c:.3}"));
                println!("{:<18} {:>6} {:>14} {:>10.2}", r.scheme, r.shift, cost, r.overhead_rate);
            }
            for s in &slopes {
                println!("{}: cost slope {:?} c/kWh per °C, overhead slope {:?} %/°C", s.scheme, s.cost_slope, s.overhead_slope);
            }
        }
        Command::Scale { common, sizes } => {
            let (cfg, base) = load(common.config.as_deref(), common.seed)?;
            let rows = cmd_scale(&cfg, &base, &parse_sizes(&sizes)?, common.out_dir.as_deref(), &common.limits()?)?;
            for r in &rows {
                println!(
                    "{:>3}x{:<3} {:<14} {:>8.1}s objective {:?} gap {:?} {}",
                    r.n_vehicles, r.n_scenarios, r.scheme, r.wall_time, r.objective, r.gap, r.status
                );
            }
        }
        Command::GenConfig { seed, out } => {
            let (cfg, _) = load(None, seed)?;
            write_out(out.as_deref(), &format!("{}\n", cfg.to_json()))?;
        }
        Command::DumpLp { config, seed, out } => {
            let (cfg, base) = load(config.as_deref(), seed)?;
            let mut buf = Vec::new();
            cmd_dump_lp(&cfg, &base, &Default::default(), &mut buf)?;
            write_out(out.as_deref(), &String::from_utf8(buf).expect("LP output is UTF-8"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

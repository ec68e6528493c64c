//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 model or solver
//! failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::balance::{self, CostRates, DemandStats};
use crate::config::{ConfigDocument, ConfigError, RawStats};
use crate::error::ModelError;
use crate::market;
use crate::report::{self, BalanceInputs, BalanceRecord, SimulationRecord, SweepRow};
use crate::sim::{self, SimOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_DOMAIN: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "wastage-balance",
    version,
    about = "Wastage-penalty provisioning balance, Monte Carlo simulation and CER settlement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario configuration (TOML).
    config: PathBuf,
    /// Write report files into this directory instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the wastage-penalty balance for `stats` and `rates`.
    Balance {
        #[command(flatten)]
        common: Common,
    },
    /// Run the Monte Carlo provisioning simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides `simulation.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `simulation.steps`.
        #[arg(long)]
        steps: Option<u64>,
        /// Also write the per-step table (requires --output).
        #[arg(long)]
        trace: bool,
    },
    /// Settle data-center CER positions at the market price.
    Etm {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the balance over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=start:stop:count`; repeat for a Cartesian grid.
        #[arg(long = "param")]
        params: Vec<String>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) if e.is_solver_failure() => EXIT_DOMAIN,
            _ => EXIT_INPUT,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Records that are not written to files go to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(stdout, "{e}")?;
                return Ok(());
            }
            return Err(CliError::Usage(e.to_string()));
        }
    };
    match cli.command {
        Command::Balance { common } => cmd_balance(&common, stdout),
        Command::Simulate {
            common,
            seed,
            steps,
            trace,
        } => cmd_simulate(&common, seed, steps, trace, stdout),
        Command::Etm { common } => cmd_etm(&common, stdout),
        Command::Sweep { common, params } => cmd_sweep(&common, &params, stdout),
    }
}

fn emit(output: Option<&Path>, file: &str, contents: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file), contents)?;
        }
        None => stdout.write_all(contents)?,
    }
    Ok(())
}

fn solve(stats: &DemandStats, rates: &CostRates) -> (&'static str, Result<balance::BalanceResult, ModelError>) {
    let method = if rates.satisfaction == 0.0 {
        "closed_form"
    } else {
        "numeric"
    };
    (method, balance::balance(stats, rates))
}

fn cmd_balance(common: &Common, stdout: &mut dyn Write) -> Result<(), CliError> {
    let doc = ConfigDocument::load(&common.config)?;
    let stats = doc.demand_stats()?;
    let rates = doc.cost_rates()?;
    let (method, result) = solve(&stats, &rates);
    let record = BalanceRecord {
        command: "balance",
        method,
        inputs: BalanceInputs {
            mean_demand: stats.mean_demand(),
            max_demand: stats.max_demand(),
            r_agreed: stats.r_agreed(),
            c_en: rates.c_en,
            c_co2: rates.c_co2,
            c_viol: rates.c_viol,
            satisfaction: rates.satisfaction,
        },
        result: result?,
    };
    emit(common.output.as_deref(), "balance.json", report::to_json(&record).as_bytes(), stdout)
}

fn cmd_simulate(
    common: &Common,
    seed: Option<u64>,
    steps: Option<u64>,
    trace: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if trace && common.output.is_none() {
        return Err(CliError::Usage("--trace requires --output <dir>".into()));
    }
    let doc = ConfigDocument::load(&common.config)?
        .with_overrides(seed, steps)?
        .effective()?;
    let scenario = doc.scenario()?;
    let report = sim::run_simulation_with(&scenario, SimOptions { trace })?;
    let record = SimulationRecord {
        command: "simulate",
        seed: scenario.seed,
        aggregate: &report.aggregate,
        config: &doc,
    };
    emit(common.output.as_deref(), "simulate.json", report::to_json(&record).as_bytes(), stdout)?;
    if let (Some(dir), Some(rows)) = (common.output.as_deref(), report.trace.as_deref()) {
        let mut buf = Vec::new();
        report::write_trace_csv(&mut buf, rows)?;
        emit(Some(dir), "trace.csv", &buf, stdout)?;
    }
    Ok(())
}

fn cmd_etm(common: &Common, stdout: &mut dyn Write) -> Result<(), CliError> {
    let doc = ConfigDocument::load(&common.config)?;
    let market_cfg = doc.market()?;
    let settlement = market::settle(&market_cfg.accounts, market_cfg.price_per_kg).map_err(|source| {
        ConfigError::Invalid {
            path: "market",
            source,
        }
    })?;
    let mut buf = Vec::new();
    report::write_settlement_csv(&mut buf, &settlement)?;
    emit(common.output.as_deref(), "settlement.csv", &buf, stdout)
}

/// Names accepted by `--param`.
pub const SWEEPABLE: [&str; 6] = ["mean_demand", "max_demand", "r_agreed", "c_en", "c_co2", "c_viol"];

/// A parsed `--param name=start:stop:count` grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: &'static str,
    pub values: Vec<f64>,
}

pub fn parse_sweep_axis(spec: &str) -> Result<SweepAxis, CliError> {
    let usage = |m: String| CliError::Usage(format!("--param {spec}: {m}"));
    let (name, range) = spec
        .split_once('=')
        .ok_or_else(|| usage("expected name=start:stop:count".into()))?;
    let name = SWEEPABLE
        .iter()
        .copied()
        .find(|n| *n == name.trim())
        .ok_or_else(|| usage(format!("unknown parameter `{name}`; expected one of {}", SWEEPABLE.join(", "))))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(usage("expected start:stop:count".into()));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("`{s}` is not a real number")))
    };
    let (start, stop) = (num(start)?, num(stop)?);
    let count: usize = count
        .trim()
        .parse()
        .ok()
        .filter(|&c| c >= 1)
        .ok_or_else(|| usage(format!("count `{count}` must be a positive integer")))?;
    let values = if count == 1 {
        vec![start]
    } else {
        let step = (stop - start) / (count - 1) as f64;
        (0..count)
            .map(|i| if i + 1 == count { stop } else { start + step * i as f64 })
            .collect()
    };
    Ok(SweepAxis { name, values })
}

fn set_param(stats: &mut RawStats, rates: &mut CostRates, name: &str, v: f64) {
    match name {
        "mean_demand" => stats.mean_demand = v,
        "max_demand" => stats.max_demand = v,
        "r_agreed" => stats.r_agreed = v,
        "c_en" => rates.c_en = v,
        "c_co2" => rates.c_co2 = v,
        "c_viol" => rates.c_viol = v,
        _ => unreachable!("axis names are validated"),
    }
}

/// Cartesian sweep with the first axis outermost.
pub fn sweep_rows(base_stats: RawStats, base_rates: CostRates, axes: &[SweepAxis]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    let mut index = vec![0usize; axes.len()];
    loop {
        let (mut stats, mut rates) = (base_stats, base_rates);
        for (axis, &i) in axes.iter().zip(&index) {
            set_param(&mut stats, &mut rates, axis.name, axis.values[i]);
        }
        let outcome = DemandStats::new(stats.mean_demand, stats.max_demand, stats.r_agreed)
            .and_then(|s| rates.validate().map(|_| s))
            .and_then(|s| solve(&s, &rates).1)
            .map_err(|e| e.to_string());
        rows.push(SweepRow {
            stats,
            rates,
            outcome,
        });
        // odometer increment, last axis fastest
        let mut k = axes.len();
        loop {
            if k == 0 {
                return rows;
            }
            k -= 1;
            index[k] += 1;
            if index[k] < axes[k].values.len() {
                break;
            }
            index[k] = 0;
        }
    }
}

fn cmd_sweep(common: &Common, params: &[String], stdout: &mut dyn Write) -> Result<(), CliError> {
    let axes = params
        .iter()
        .map(|p| parse_sweep_axis(p))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(CliError::Usage(format!("parameter `{}` swept twice", a.name)));
        }
    }
    let doc = ConfigDocument::load(&common.config)?;
    let stats = doc.raw_stats()?;
    let rates = doc.rates.ok_or(ConfigError::MissingSection("rates"))?;
    let rows = sweep_rows(stats, rates, &axes);
    let mut buf = Vec::new();
    report::write_sweep_csv(&mut buf, &rows)?;
    emit(common.output.as_deref(), "sweep.csv", &buf, stdout)?;
    if rows.iter().all(|r| r.outcome.is_err()) {
        let first = rows[0].outcome.as_ref().unwrap_err().clone();
        return Err(CliError::Model(ModelError::PolicyUnresolvable(format!(
            "every sweep row failed; first error: {first}"
        ))));
    }
    Ok(())
}

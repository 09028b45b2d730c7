//! Command-line runner for sweeps, figure data, oracles and the acceptance
//! suite.
//!
//! Exit status: 0 on success, 1 when an acceptance criterion fails, 2 on
//! usage, configuration or I/O errors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cvqueue::config::{RunConfig, SensorMode, SignalDemandConfig};
use cvqueue::error::{Error, Result};
use cvqueue::estimators::EstimatorKind;
use cvqueue::harness::{
    emit_figure_data, run_acceptance, run_sweep, write_verdicts, AcceptanceOptions, ExperimentSpec, Figure, Suite,
};
use cvqueue::oracle::{mc_moment_oracles, overflow_oracles, quadrature_oracle, OverflowOracleRun, QuadFunctional};
use cvqueue::overflow::{OverflowKind, OverflowModel};

#[derive(Parser, Debug)]
#[command(name = "cvqueue", version, about = "Connected-vehicle queue length experiments")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Cap on simulated cycles summed over cells and replications.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Estimator name; repeat or comma-separate for several.
    #[arg(long, global = true, value_delimiter = ',')]
    estimator: Vec<String>,
    /// on, off or both.
    #[arg(long, global = true)]
    sensor: Option<String>,
    /// Overflow model name, or `none` for runs without overflow.
    #[arg(long = "overflow-model", global = true)]
    overflow_model: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a (lambda, p) grid and write summary.csv.
    Sweep {
        /// Arrival rates, comma-separated. Defaults to the reference grid.
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        /// Penetration rates, comma-separated.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        /// Recorded cycles per replication.
        #[arg(long)]
        cycles: Option<u32>,
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long)]
        warmup: Option<u32>,
        /// Also write per-cycle estimates under estimates/.
        #[arg(long)]
        record_cycles: bool,
    },
    /// Run acceptance criteria and write verdicts.json.
    Accept {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Write figure CSVs (fig2a, fig2b, fig3, fig4, fig5, fig7, fig8 or all).
    Figure {
        #[arg(required = true)]
        figures: Vec<String>,
    },
    /// Check closed forms at one configuration against independent oracles.
    Oracle {
        #[arg(long, default_value_t = 0.239)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        /// Red phases simulated for the moment oracles.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

enum Outcome {
    Ok,
    CriteriaFailed,
}

fn overflow_override(cli: &Cli) -> Result<Option<Option<OverflowModel>>> {
    match cli.overflow_model.as_deref() {
        None => Ok(None),
        Some("none") => Ok(Some(None)),
        Some(name) => Ok(Some(Some(OverflowModel::new(name.parse::<OverflowKind>()?)))),
    }
}

fn estimators(cli: &Cli) -> Result<Vec<EstimatorKind>> {
    cli.estimator
        .iter()
        .map(|name| {
            EstimatorKind::ALL
                .into_iter()
                .find(|k| k.as_str() == name)
                .ok_or_else(|| Error::UnknownName { what: "estimator", name: name.clone() })
        })
        .collect()
}

fn apply_common(cli: &Cli, spec: &mut ExperimentSpec) -> Result<()> {
    if let Some(model) = overflow_override(cli)? {
        if model.is_some() != spec.overflow_model.is_some() {
            spec.estimators = match model {
                Some(_) => vec![EstimatorKind::KnownWithQ, EstimatorKind::KnownWithQNoSensor],
                None => vec![EstimatorKind::KnownNoQ],
            };
            let defaults = if model.is_some() {
                ExperimentSpec::overflow(spec.seed)
            } else {
                ExperimentSpec::no_overflow(spec.seed)
            };
            spec.warmup = defaults.warmup;
        }
        spec.overflow_model = model;
    }
    let kinds = estimators(cli)?;
    if !kinds.is_empty() {
        spec.estimators = kinds;
    }
    if let Some(mode) = &cli.sensor {
        spec.sensor_modes = mode.parse::<SensorMode>()?.flags().to_vec();
    }
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(budget) = cli.budget {
        spec.budget = budget;
    }
    Ok(())
}

fn base_spec(cli: &Cli) -> Result<ExperimentSpec> {
    if let Some(path) = &cli.config {
        return Ok(ExperimentSpec::from_run_config(&RunConfig::from_file(path)?));
    }
    Ok(match overflow_override(cli)? {
        Some(Some(model)) => ExperimentSpec { overflow_model: Some(model), ..ExperimentSpec::overflow(0) },
        _ => ExperimentSpec::no_overflow(0),
    })
}

fn sweep(cli: &Cli, lambda: &[f64], p: &[f64], cycles: Option<u32>, replications: Option<u32>, warmup: Option<u32>, record: bool) -> Result<Outcome> {
    let mut spec = base_spec(cli)?;
    apply_common(cli, &mut spec)?;
    if !lambda.is_empty() {
        spec.lambdas = lambda.to_vec();
    }
    if !p.is_empty() {
        spec.ps = p.to_vec();
    }
    spec.cycles = cycles.unwrap_or(spec.cycles);
    spec.replications = replications.unwrap_or(spec.replications);
    spec.warmup = warmup.unwrap_or(spec.warmup);
    spec.record_cycles = record;
    spec.outputs = Some(cli.out.clone());
    let out = run_sweep(&spec)?;
    let rows: usize = out.cells.iter().map(|c| c.streams.len()).sum();
    println!("wrote {rows} summary rows to {}", cli.out.join("summary.csv").display());
    Ok(Outcome::Ok)
}

fn accept(cli: &Cli, suite: &str) -> Result<Outcome> {
    let suite: Suite = suite.parse()?;
    let opts = AcceptanceOptions { seed: cli.seed.unwrap_or(AcceptanceOptions::default().seed), ..Default::default() };
    let verdicts = run_acceptance(suite, &opts)?;
    for v in &verdicts {
        println!("{}", v.line());
    }
    let path = cli.out.join("verdicts.json");
    write_verdicts(&path, &verdicts)?;
    println!("wrote {}", path.display());
    Ok(if verdicts.iter().all(|v| v.pass) { Outcome::Ok } else { Outcome::CriteriaFailed })
}

fn figures(cli: &Cli, names: &[String]) -> Result<Outcome> {
    let mut wanted = Vec::new();
    for name in names {
        if name == "all" {
            wanted.extend(Figure::ALL);
        } else {
            wanted.push(name.parse::<Figure>()?);
        }
    }
    wanted.dedup();
    // Figures sharing a grid share one sweep.
    let mut cache: HashMap<(bool, Vec<u64>), cvqueue::harness::SweepOutput> = HashMap::new();
    for fig in wanted {
        let mut spec = fig.sweep_spec(0);
        apply_common(cli, &mut spec)?;
        let key = (fig.needs_overflow(), spec.lambdas.iter().map(|l| l.to_bits()).collect());
        if !cache.contains_key(&key) {
            cache.insert(key.clone(), run_sweep(&spec)?);
        }
        for path in emit_figure_data(&cache[&key], fig, &cli.out)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(Outcome::Ok)
}

fn oracle(cli: &Cli, lambda: f64, p: f64, samples: usize) -> Result<Outcome> {
    let (cfg, kind) = match &cli.config {
        Some(path) => {
            let rc = RunConfig::from_file(path)?;
            (rc.signal, rc.overflow_model)
        }
        None => (SignalDemandConfig::reference(lambda, p)?, None),
    };
    let kind = match overflow_override(cli)? {
        Some(model) => model.map(|m| m.kind),
        None => kind,
    };
    let seed = cli.seed.unwrap_or(0);
    let reports = match kind {
        Some(kind) => {
            let run = OverflowOracleRun { seed, ..Default::default() };
            overflow_oracles(&cfg, &OverflowModel::new(kind), &run)?
        }
        None => {
            let mut r = mc_moment_oracles(&cfg, samples, seed)?;
            for f in QuadFunctional::ALL {
                r.push(quadrature_oracle(&cfg, f)?);
            }
            r
        }
    };
    for r in &reports {
        let verdicts: Vec<String> = r.verdicts.iter().map(|(k, v)| format!("{k}={}", if *v { "pass" } else { "fail" })).collect();
        println!("{:<16} oracle {:.6} (se {:.2e})  {}", r.quantity, r.oracle.value, r.oracle.se, verdicts.join(" "));
    }
    write_json(&cli.out.join("oracle.json"), &reports)?;
    Ok(Outcome::Ok)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::create_dir_all(&path.parent().unwrap_or(Path::new(".")))?;
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Sweep { lambda, p, cycles, replications, warmup, record_cycles } => {
            sweep(cli, lambda, p, *cycles, *replications, *warmup, *record_cycles)
        }
        Command::Accept { suite } => accept(cli, suite),
        Command::Figure { figures: names } => figures(cli, names),
        Command::Oracle { lambda, p, samples } => oracle(cli, *lambda, *p, *samples),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CriteriaFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

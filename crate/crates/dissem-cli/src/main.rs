//! Command-line front end: parse a scenario file, run the requested engine,
//! and emit deterministic CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 input error. Diagnostics go
//! to stderr only.

mod emit;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dissem::apps::optimize_backup_rate;
use dissem::model::validate;
use dissem::moments::{
    stability, stationary_means, transient_means, transient_second_moments, StationaryMeans,
};
use dissem::oracle::{evolve, OracleOptions};
use dissem::sim::simulate_ensemble;

use scenario::{parse_scenario, ModelDoc, ScenarioFile};

#[derive(Debug)]
pub enum CliError {
    /// Bad scenario, flags, or model (exit 2).
    Input(String),
    /// Engine or I/O failure during a run (exit 1).
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dissem",
    about = "Markov-modulated stochastic dissemination toolkit",
    version
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Override the master seed from the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of simulation runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Override the integration step.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Override the time horizon.
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// With `simulate`: also dump the first path's event log (tab-separated:
    /// time, kind, wealth vector, background state) to this file.
    #[arg(long, global = true)]
    dump_trajectory: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every model invariant; report violations.
    Validate,
    /// Integrate the first-moment ODE system; writes means.csv.
    Moments,
    /// Integrate first and second moments jointly; writes means.csv and
    /// seconds.csv.
    SecondMoments,
    /// Solve for stationary means; writes stationary.json.
    Stationary,
    /// Spectral abscissa and the sufficient ergodicity flag; writes
    /// stationary.json with means omitted.
    Stability,
    /// Monte Carlo ensemble; writes ensemble.csv.
    Simulate,
    /// Truncated master-equation evolution; writes oracle.csv.
    Oracle,
    /// Optimal backup rate for the storage cost model; writes optimum.json.
    StorageOptimize,
    /// Build the preset (or custom) model and write it out as model.json.
    PresetEmit,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
    }
}

struct RunSettings {
    t_end: f64,
    step: f64,
    sample_times: Vec<f64>,
    runs: usize,
    seed: u64,
}

fn settings(cli: &Cli, file: &ScenarioFile) -> Result<RunSettings, CliError> {
    let t_end = cli.t_end.or(file.run.t_end).unwrap_or(10.0);
    let step = cli.step.or(file.run.step).unwrap_or(1e-3);
    if !(t_end >= 0.0 && step > 0.0) {
        return Err(CliError::Input(format!(
            "run settings need t_end >= 0 and step > 0 (got {t_end}, {step})"
        )));
    }
    let sample_times = file.run.sample_times.clone().unwrap_or_else(|| {
        // Default grid: 21 evenly spaced points including 0 and t_end.
        (0..=20).map(|i| t_end * i as f64 / 20.0).collect()
    });
    if !sample_times.windows(2).all(|w| w[0] <= w[1]) {
        return Err(CliError::Input("run.sample_times must be sorted".into()));
    }
    if let Some(bad) = sample_times.iter().find(|&&t| !(0.0..=t_end).contains(&t)) {
        return Err(CliError::Input(format!(
            "run.sample_times entry {bad} outside [0, {t_end}]"
        )));
    }
    Ok(RunSettings {
        t_end,
        step,
        sample_times,
        runs: cli.runs.or(file.simulate.runs).unwrap_or(1000),
        seed: cli.seed.or(file.simulate.seed).unwrap_or(0),
    })
}

fn wants(file: &ScenarioFile, product: &str) -> bool {
    file.outputs.is_empty() || file.outputs.iter().any(|o| o == product)
}

fn load(cli: &Cli) -> Result<ScenarioFile, CliError> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Input("--scenario <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("reading {path:?}: {e}")))?;
    parse_scenario(&text)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file = load(cli)?;
    let opts = settings(cli, &file)?;

    match cli.command {
        Command::Validate => {
            let spec = file.model.build_unchecked()?;
            let report = validate(&spec);
            if report.is_valid() {
                println!("valid");
                Ok(())
            } else {
                for violation in &report.violations {
                    eprintln!("{violation}");
                }
                Err(CliError::Input(format!(
                    "{} violation(s)",
                    report.violations.len()
                )))
            }
        }
        Command::Moments => {
            let spec = file.model.build()?;
            let curves = transient_means(&spec, opts.t_end, opts.step)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            if wants(&file, "means") {
                emit::write_means_csv(&cli.out, &curves, spec.agents, spec.states())?;
            }
            Ok(())
        }
        Command::SecondMoments => {
            let spec = file.model.build()?;
            let curves = transient_second_moments(&spec, opts.t_end, opts.step)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            if wants(&file, "means") {
                emit::write_means_csv(&cli.out, &curves, spec.agents, spec.states())?;
            }
            if wants(&file, "seconds") {
                emit::write_seconds_csv(&cli.out, &curves, spec.agents, spec.states())?;
            }
            Ok(())
        }
        Command::Stationary => {
            let spec = file.model.build()?;
            match stationary_means(&spec).map_err(|e| CliError::Runtime(e.to_string()))? {
                StationaryMeans::Stable(means) => {
                    let report = stability(&spec).map_err(|e| CliError::Runtime(e.to_string()))?;
                    emit::write_stationary_json(
                        &cli.out,
                        report.omega,
                        report.ergodic_sufficient,
                        Some(&means),
                    )
                }
                StationaryMeans::Unverified { omega } => {
                    emit::write_stationary_json(&cli.out, omega, false, None)
                }
            }
        }
        Command::Stability => {
            let spec = file.model.build()?;
            let report = stability(&spec).map_err(|e| CliError::Runtime(e.to_string()))?;
            emit::write_stationary_json(&cli.out, report.omega, report.ergodic_sufficient, None)
        }
        Command::Simulate => {
            let spec = file.model.build()?;
            let stats =
                simulate_ensemble(&spec, opts.t_end, opts.runs, opts.seed, &opts.sample_times);
            if wants(&file, "ensemble") {
                emit::write_ensemble_csv(&cli.out, &stats)?;
            }
            if let Some(path) = &cli.dump_trajectory {
                let trajectory =
                    dissem::sim::simulate_path(&spec, opts.t_end, opts.seed, &opts.sample_times);
                let out = std::fs::File::create(path)
                    .map_err(|e| CliError::Runtime(format!("creating {path:?}: {e}")))?;
                trajectory
                    .write_events_tsv(std::io::BufWriter::new(out))
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            Ok(())
        }
        Command::Oracle => {
            let spec = file.model.build()?;
            let cap = file.oracle.cap.clone().ok_or_else(|| {
                CliError::Input("oracle.cap is required for the oracle command".into())
            })?;
            if cap.len() != spec.agents {
                return Err(CliError::Input(format!(
                    "oracle.cap needs {} entries, got {}",
                    spec.agents,
                    cap.len()
                )));
            }
            let options = OracleOptions {
                budget: file.oracle.budget.unwrap_or(5_000_000),
                overflow_threshold: file.oracle.overflow_threshold.unwrap_or(1e-6),
            };
            let run = evolve(
                &spec,
                &cap,
                opts.t_end,
                opts.step,
                &opts.sample_times,
                &options,
            )
            .map_err(|e| match e {
                dissem::oracle::OracleError::BudgetExceeded { .. }
                | dissem::oracle::OracleError::InitialAboveCap { .. } => {
                    CliError::Input(e.to_string())
                }
                other => CliError::Runtime(other.to_string()),
            })?;
            if run.overflow_flagged {
                eprintln!(
                    "warning: overflow {} exceeds threshold {}",
                    run.result.overflow(),
                    options.overflow_threshold
                );
            }
            if wants(&file, "oracle") {
                emit::write_oracle_csv(&cli.out, &run, spec.agents, spec.states())?;
            }
            Ok(())
        }
        Command::StorageOptimize => {
            let preset = match &file.model {
                ModelDoc::Preset(p) if p.name == "storage" => p,
                _ => {
                    return Err(CliError::Input(
                        "storage-optimize needs a storage preset model".into(),
                    ))
                }
            };
            let params: scenario::StorageParamsDoc =
                serde_path_to_error::deserialize(preset.params.clone()).map_err(|e| {
                    CliError::Input(format!(
                        "model.preset.params at {}: {}",
                        e.path(),
                        e.inner()
                    ))
                })?;
            let (sc, _) = scenario::storage_scenario(&params)?;
            let optimum =
                optimize_backup_rate(&sc).map_err(|e| CliError::Runtime(e.to_string()))?;
            emit::write_optimum_json(&cli.out, optimum.rate, optimum.cost, optimum.boundary)
        }
        Command::PresetEmit => {
            let spec = file.model.build()?;
            let doc = scenario::CustomModelDoc::from_spec(&spec);
            emit::write_model_json(&cli.out, &doc)
        }
    }
}

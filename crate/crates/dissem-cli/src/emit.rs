//! Deterministic artifact writers. Every floating-point number is printed
//! with 17 significant digits so the decimal output round-trips the binary
//! value exactly; identical inputs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dissem::moments::{pair_state_index, stacked_index, MomentCurves};
use dissem::oracle::OracleRun;
use dissem::sim::EnsembleStats;

use crate::CliError;

/// Shortest exact representation: 17 significant digits in scientific form.
pub fn fmt(value: f64) -> String {
    format!("{value:.16e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("creating {dir:?}: {e}")))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("writing {path:?}: {e}")))?;
    Ok(())
}

/// `means.csv`: time, stacked means (agent-major, state-minor), then the
/// per-agent means aggregated over the background state.
pub fn write_means_csv(
    dir: &Path,
    curves: &MomentCurves,
    agents: usize,
    states: usize,
) -> Result<(), CliError> {
    let mut out = String::from("t");
    for i in 0..agents {
        for k in 0..states {
            write!(out, ",m[{i}][{k}]").unwrap();
        }
    }
    for i in 0..agents {
        write!(out, ",mean[{i}]").unwrap();
    }
    out.push('\n');
    for (idx, time) in curves.times.iter().enumerate() {
        out.push_str(&fmt(*time));
        for value in &curves.means[idx] {
            out.push(',');
            out.push_str(&fmt(*value));
        }
        for i in 0..agents {
            let total: f64 = (0..states)
                .map(|k| curves.means[idx][stacked_index(i, k, states)])
                .sum();
            out.push(',');
            out.push_str(&fmt(total));
        }
        out.push('\n');
    }
    write_file(dir, "means.csv", &out)
}

/// `seconds.csv`: time, stacked symmetric-reduced second moments
/// (pair-major, state-minor), then per-agent variances.
pub fn write_seconds_csv(
    dir: &Path,
    curves: &MomentCurves,
    agents: usize,
    states: usize,
) -> Result<(), CliError> {
    let seconds = curves
        .seconds
        .as_ref()
        .ok_or_else(|| CliError::Runtime("second moments were not computed".into()))?;
    let mut out = String::from("t");
    for i in 0..agents {
        for ip in i..agents {
            for k in 0..states {
                write!(out, ",v[{i}][{ip}][{k}]").unwrap();
            }
        }
    }
    for i in 0..agents {
        write!(out, ",var[{i}]").unwrap();
    }
    out.push('\n');
    for (idx, time) in curves.times.iter().enumerate() {
        out.push_str(&fmt(*time));
        for value in &seconds[idx] {
            out.push(',');
            out.push_str(&fmt(*value));
        }
        let central =
            dissem::moments::central_moments(&curves.means[idx], &seconds[idx], agents, states);
        for variance in &central.variances {
            out.push(',');
            out.push_str(&fmt(*variance));
        }
        out.push('\n');
    }
    write_file(dir, "seconds.csv", &out)
}

/// `stationary.json`: `{omega, ergodic_sufficient, means}` with `means` null
/// when the sufficient stability condition fails.
pub fn write_stationary_json(
    dir: &Path,
    omega: f64,
    ergodic_sufficient: bool,
    means: Option<&[f64]>,
) -> Result<(), CliError> {
    let means_text = match means {
        Some(values) => {
            let items: Vec<String> = values.iter().map(|v| fmt(*v)).collect();
            format!("[{}]", items.join(", "))
        }
        None => "null".into(),
    };
    let body = format!(
        "{{\n  \"omega\": {},\n  \"ergodic_sufficient\": {},\n  \"means\": {}\n}}\n",
        fmt(omega),
        ergodic_sufficient,
        means_text
    );
    write_file(dir, "stationary.json", &body)
}

/// `ensemble.csv`: one row per (time, agent) with mean, standard error and
/// sample variance.
pub fn write_ensemble_csv(dir: &Path, stats: &EnsembleStats) -> Result<(), CliError> {
    let mut out = String::from("t,agent,mean,stderr,var\n");
    for (t_idx, time) in stats.sample_times.iter().enumerate() {
        for agent in 0..stats.agents {
            writeln!(
                out,
                "{},{agent},{},{},{}",
                fmt(*time),
                fmt(stats.mean(t_idx, agent)),
                fmt(stats.stderr(t_idx, agent)),
                fmt(stats.variance(t_idx, agent))
            )
            .unwrap();
        }
    }
    write_file(dir, "ensemble.csv", &out)
}

/// `oracle.csv`: time, certified overflow, stacked means, per-agent variance.
pub fn write_oracle_csv(
    dir: &Path,
    run: &OracleRun,
    agents: usize,
    states: usize,
) -> Result<(), CliError> {
    let mut out = String::from("t,overflow");
    for i in 0..agents {
        for k in 0..states {
            write!(out, ",m[{i}][{k}]").unwrap();
        }
    }
    for i in 0..agents {
        write!(out, ",var[{i}]").unwrap();
    }
    out.push('\n');
    for snapshot in &run.history {
        out.push_str(&fmt(snapshot.time));
        out.push(',');
        out.push_str(&fmt(snapshot.overflow));
        for value in &snapshot.means {
            out.push(',');
            out.push_str(&fmt(*value));
        }
        for i in 0..agents {
            let mean: f64 = (0..states)
                .map(|k| snapshot.means[stacked_index(i, k, states)])
                .sum();
            let reduced: f64 = (0..states)
                .map(|k| snapshot.seconds[pair_state_index(i, i, k, agents, states)])
                .sum();
            let variance = reduced + mean - mean * mean;
            out.push(',');
            out.push_str(&fmt(variance));
        }
        out.push('\n');
    }
    write_file(dir, "oracle.csv", &out)
}

/// `optimum.json`: `{gamma_star, F, boundary}`.
pub fn write_optimum_json(
    dir: &Path,
    gamma_star: f64,
    cost: f64,
    boundary: bool,
) -> Result<(), CliError> {
    let body = format!(
        "{{\n  \"gamma_star\": {},\n  \"F\": {},\n  \"boundary\": {}\n}}\n",
        fmt(gamma_star),
        fmt(cost),
        boundary
    );
    write_file(dir, "optimum.json", &body)
}

/// `model.json`: the fully built model in the custom-model schema.
pub fn write_model_json(dir: &Path, doc: &crate::scenario::CustomModelDoc) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(&serde_json::json!({
        "model": { "custom": doc }
    }))
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(dir, "model.json", &format!("{body}\n"))
}

#![allow(clippy::needless_range_loop)]

//! Cross-engine ground-truth checks on models small enough for the
//! master-equation oracle: oracle vs moment ODEs at tight absolute
//! tolerances, oracle cell probabilities vs ensemble frequencies, and the
//! simulator against a closed-form mean.

use dissem::apps::{
    build_storage_spec, storage_transient_closed_form, StorageScenario, StorageVariant,
};
use dissem::kernels::OffspringDistribution;
use dissem::model::{ArrivalClass, BackgroundChain, ModelSpec};
use dissem::moments::{central_moments, transient_second_moments};
use dissem::numerics::Matrix;
use dissem::oracle::{evolve, OracleOptions};
use dissem::sim::simulate_ensemble;

/// Two agents, two states, mild rates: everything stays well inside the cap.
fn mini_wealth_spec() -> ModelSpec {
    ModelSpec::single_stream(
        2,
        BackgroundChain::with_fixed_start(
            Matrix::from_rows(&[vec![-0.4, 0.4], vec![0.3, -0.3]]),
            0,
        ),
        vec![
            ArrivalClass::new(vec![0], vec![1.2, 0.6]),
            ArrivalClass::new(vec![0, 1], vec![0.3, 0.5]),
        ],
        vec![1.0, 0.7],
        vec![
            vec![
                OffspringDistribution::UnitMultinomialWithLeak(vec![0.55, 0.25]),
                OffspringDistribution::UnitMultinomialWithLeak(vec![0.4, 0.2]),
            ],
            vec![
                OffspringDistribution::UnitMultinomialWithLeak(vec![0.2, 0.6]),
                OffspringDistribution::Amplified {
                    double_prob: 0.15,
                    placement: vec![0.1, 0.5],
                },
            ],
        ],
        vec![1, 1],
    )
}

#[test]
fn oracle_and_moment_odes_agree_to_truncation_accuracy() {
    let spec = mini_wealth_spec();
    let t = 2.0;
    let run = evolve(&spec, &[20, 20], t, 1e-3, &[t], &OracleOptions::default()).unwrap();
    assert!(!run.overflow_flagged);
    let bound = run.result.overflow() + 1e-7;

    let curves = transient_second_moments(&spec, t, 5e-4).unwrap();
    let idx = curves.times.len() - 1;
    let (oracle_means, oracle_seconds) = run.result.moments();
    let ode_means = &curves.means[idx];
    let ode_seconds = &curves.seconds.as_ref().unwrap()[idx];

    for (a, b) in oracle_means.iter().zip(ode_means) {
        assert!(
            (a - b).abs() <= bound,
            "stacked mean: oracle {a} vs ODE {b}"
        );
    }
    for (a, b) in oracle_seconds.iter().zip(ode_seconds) {
        assert!(
            (a - b).abs() <= bound,
            "stacked second: oracle {a} vs ODE {b}"
        );
    }
    let oracle_central = central_moments(&oracle_means, &oracle_seconds, 2, 2);
    let ode_central = central_moments(ode_means, ode_seconds, 2, 2);
    for agent in 0..2 {
        assert!(
            (oracle_central.variances[agent] - ode_central.variances[agent]).abs() <= 10.0 * bound
        );
    }
}

#[test]
fn oracle_cell_probabilities_match_ensemble_frequencies() {
    let spec = mini_wealth_spec();
    let t = 1.5;
    let run = evolve(&spec, &[20, 20], t, 1e-3, &[t], &OracleOptions::default()).unwrap();
    let runs = 20_000usize;
    let stats = simulate_ensemble(&spec, t, runs, 0xCE11, &[t]);

    // Every cell with noticeable mass, within four binomial standard errors.
    let mut checked = 0;
    for a in 0..=6usize {
        for b in 0..=6usize {
            for k in 0..2usize {
                let p = run.result.probability_of(&[a, b], k);
                if p < 5e-3 {
                    continue;
                }
                let hits = stats
                    .terminal
                    .iter()
                    .filter(|(w, state)| w[0] as usize == a && w[1] as usize == b && *state == k)
                    .count();
                let freq = hits as f64 / runs as f64;
                let se = (p * (1.0 - p) / runs as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 4.0 * se + run.result.overflow(),
                    "cell ({a},{b},{k}): oracle {p:.5} vs frequency {freq:.5} (4se {:.5})",
                    4.0 * se
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 20, "too few cells carried mass ({checked})");
}

fn failure_storage_spec() -> ModelSpec {
    let sc = StorageScenario::basic(1.1, 1.4)
        .with_link(dissem::apps::LinkRates {
            outage: 0.5,
            repair: 0.8,
        })
        .with_failures(0.35);
    build_storage_spec(&sc, StorageVariant::WithFailures).unwrap()
}

#[test]
fn failure_model_simulation_matches_moment_odes() {
    // Two independent shock streams (backups racing failures) through the
    // simulator against the stream-additive moment system.
    let spec = failure_storage_spec();
    let grid = [1.0, 2.5, 5.0];
    let curves = dissem::moments::transient_means(&spec, 5.0, 1e-3).unwrap();
    let stats = simulate_ensemble(&spec, 5.0, 4000, 0xFA11, &grid);
    for (t_idx, &t) in grid.iter().enumerate() {
        let ode = curves.agent_means_at(curves.closest_index(t), 3, 2);
        for agent in 0..3 {
            let mean = stats.mean(t_idx, agent);
            let se = stats.stderr(t_idx, agent).max(1e-4);
            assert!(
                (mean - ode[agent]).abs() <= 4.0 * se,
                "t={t} agent {agent}: ensemble {mean:.4} vs ODE {:.4} (4se {:.4})",
                ode[agent],
                4.0 * se
            );
        }
    }
}

#[test]
fn failure_model_oracle_matches_moment_odes() {
    // The same two-stream model through the truncated master equation.
    let spec = failure_storage_spec();
    let t = 2.0;
    // Total created files are Poisson(2.2); caps of 14 leave ~1e-8 in the tail.
    let cap = [14usize, 14, 14];
    let run = evolve(&spec, &cap, t, 2e-3, &[t], &OracleOptions::default()).unwrap();
    assert!(!run.overflow_flagged, "overflow {}", run.result.overflow());
    let curves = transient_second_moments(&spec, t, 1e-3).unwrap();
    let bound = run.result.overflow() + 1e-6;
    let (oracle_means, oracle_seconds) = run.result.moments();
    let ode_means = curves.means.last().unwrap();
    let ode_seconds = curves.seconds.as_ref().unwrap().last().unwrap();
    for (a, b) in oracle_means.iter().zip(ode_means) {
        assert!((a - b).abs() <= bound, "mean: oracle {a} vs ODE {b}");
    }
    for (a, b) in oracle_seconds.iter().zip(ode_seconds) {
        assert!((a - b).abs() <= bound, "second: oracle {a} vs ODE {b}");
    }
}

#[test]
fn simulator_tracks_the_storage_closed_form_mean() {
    let sc = StorageScenario::basic(2.0, 1.5);
    let spec = build_storage_spec(&sc, StorageVariant::Basic).unwrap();
    let grid = [0.5, 1.0, 2.0, 4.0];
    let stats = simulate_ensemble(&spec, 4.0, 2000, 0x5703, &grid);
    for (idx, &t) in grid.iter().enumerate() {
        let closed = storage_transient_closed_form(&sc, t);
        for (agent, reference) in [(0usize, closed.m1), (1usize, closed.m2)] {
            let mean = stats.mean(idx, agent);
            let se = stats.stderr(idx, agent);
            assert!(
                (mean - reference).abs() <= 3.0 * se,
                "t={t} agent {agent}: {mean:.4} vs closed form {reference:.4}"
            );
        }
    }
}

//! Exact stochastic simulation of the joint wealth/background process by
//! competing exponential clocks, plus deterministic ensemble statistics.
//!
//! Every path owns a counter-based ChaCha stream whose seed is derived from
//! `(master_seed, path_index)` with a SplitMix64 hash, so ensembles are
//! reproducible under any parallel schedule. Ensemble accumulators are exact
//! integer sums, which makes merged statistics independent of reduction
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

use crate::model::{InitialState, ModelSpec};

/// What happened at an event epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// The background chain jumped.
    Background,
    /// External arrival of the given class index.
    Arrival(usize),
    /// Shock of the given stream index: full redistribution of all units.
    Shock(usize),
}

/// One event with the post-event system state.
#[derive(Debug, Clone)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    pub wealth: Vec<u64>,
    pub state: usize,
}

/// Wealth and background state carried forward onto a sample grid point.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub wealth: Vec<u64>,
    pub state: usize,
}

/// A single simulated path: the ordered event log plus grid snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub events: Vec<PathEvent>,
    pub samples: Vec<Snapshot>,
}

impl Trajectory {
    /// Tab-separated event dump: time, kind, wealth vector, background state.
    pub fn write_events_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for event in &self.events {
            let kind = match event.kind {
                EventKind::Background => "background".to_string(),
                EventKind::Arrival(j) => format!("arrival({j})"),
                EventKind::Shock(s) => format!("shock({s})"),
            };
            let wealth = event
                .wealth
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",");
            writeln!(
                out,
                "{:.17e}\t{kind}\t{wealth}\t{}",
                event.time, event.state
            )?;
        }
        Ok(())
    }
}

/// Derive the per-path stream seed from the master seed and the path index.
fn path_seed(master_seed: u64, path: u64) -> u64 {
    const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut z = master_seed ^ path.wrapping_mul(GOLDEN_GAMMA);
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn path_rng(master_seed: u64, path: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(path_seed(master_seed, path))
}

/// Simulate one path to `t_end`, recording every event and carrying the state
/// forward onto `sample_times` (which must be sorted).
pub fn simulate_path(spec: &ModelSpec, t_end: f64, seed: u64, sample_times: &[f64]) -> Trajectory {
    let mut rng = path_rng(seed, 0);
    run_path(spec, t_end, &mut rng, sample_times, true).trajectory
}

struct PathOutcome {
    trajectory: Trajectory,
    final_wealth: Vec<u64>,
    final_state: usize,
}

fn run_path(
    spec: &ModelSpec,
    t_end: f64,
    rng: &mut ChaCha8Rng,
    sample_times: &[f64],
    record_events: bool,
) -> PathOutcome {
    assert!(t_end >= 0.0);
    debug_assert!(sample_times.windows(2).all(|w| w[0] <= w[1]));
    let d = spec.states();
    let q = spec.chain.generator();

    let mut state = match spec.chain.initial() {
        InitialState::Fixed(k) => *k,
        InitialState::Mixed(probs) => {
            let mut u = rng.gen::<f64>();
            let mut chosen = d - 1;
            for (k, &p) in probs.iter().enumerate() {
                if u < p {
                    chosen = k;
                    break;
                }
                u -= p;
            }
            chosen
        }
    };
    let mut wealth = spec.initial_wealth.clone();
    let mut scratch = vec![0u64; spec.agents];

    let mut events = Vec::new();
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0usize;
    let mut t = 0.0;

    loop {
        let background_rate: f64 = (0..d).filter(|&l| l != state).map(|l| q[(state, l)]).sum();
        let arrival_total: f64 = spec.arrivals.iter().map(|c| c.rates[state]).sum();
        let shock_total: f64 = spec.shocks.iter().map(|s| s.rates[state]).sum();
        let total_rate = background_rate + arrival_total + shock_total;

        let t_event = if total_rate > 0.0 {
            t - (1.0 - rng.gen::<f64>()).ln() / total_rate
        } else {
            // Absorbing configuration: the path idles to the horizon.
            f64::INFINITY
        };

        while next_sample < sample_times.len()
            && sample_times[next_sample] < t_event
            && sample_times[next_sample] <= t_end
        {
            samples.push(Snapshot {
                time: sample_times[next_sample],
                wealth: wealth.clone(),
                state,
            });
            next_sample += 1;
        }
        if t_event > t_end {
            break;
        }
        t = t_event;

        let mut pick = rng.gen::<f64>() * total_rate;
        let kind;
        'chosen: {
            for l in 0..d {
                if l == state {
                    continue;
                }
                let rate = q[(state, l)];
                if pick < rate {
                    state = l;
                    kind = EventKind::Background;
                    break 'chosen;
                }
                pick -= rate;
            }
            for (j, class) in spec.arrivals.iter().enumerate() {
                let rate = class.rates[state];
                if pick < rate {
                    for &i in &class.targets {
                        wealth[i] += 1;
                    }
                    kind = EventKind::Arrival(j);
                    break 'chosen;
                }
                pick -= rate;
            }
            for (s, stream) in spec.shocks.iter().enumerate() {
                let rate = stream.rates[state];
                if pick < rate {
                    // Redistribute every unit independently, agents in order.
                    scratch.iter_mut().for_each(|v| *v = 0);
                    for (i, &units) in wealth.iter().enumerate() {
                        let kernel = stream.kernel(i, state);
                        for _ in 0..units {
                            kernel.sample_into(rng, &mut scratch);
                        }
                    }
                    wealth.copy_from_slice(&scratch);
                    kind = EventKind::Shock(s);
                    break 'chosen;
                }
                pick -= rate;
            }
            // Numerical slack at the end of the cumulative walk: treat as a
            // background self-loop (no state change).
            kind = EventKind::Background;
        }

        if record_events {
            events.push(PathEvent {
                time: t,
                kind,
                wealth: wealth.clone(),
                state,
            });
        }
    }

    PathOutcome {
        trajectory: Trajectory { events, samples },
        final_wealth: wealth,
        final_state: state,
    }
}

/// Merged statistics over an ensemble of independent paths.
///
/// Accumulators are exact integer sums over the sampled wealth values, so
/// merging is associative and commutative and results are byte-identical
/// across thread schedules.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub sample_times: Vec<f64>,
    pub runs: usize,
    pub agents: usize,
    sum: Vec<u128>,
    pair_sum: Vec<u128>,
    /// Per-run terminal wealth and background state, in path order.
    pub terminal: Vec<(Vec<u64>, usize)>,
}

impl EnsembleStats {
    fn pair_count(&self) -> usize {
        self.agents * (self.agents + 1) / 2
    }

    fn pair_offset(i: usize, ip: usize, agents: usize) -> usize {
        debug_assert!(i <= ip);
        i * agents - (i * i - i) / 2 + (ip - i)
    }

    /// Sample mean of agent `i` at sample index `t_idx`.
    pub fn mean(&self, t_idx: usize, agent: usize) -> f64 {
        self.sum[t_idx * self.agents + agent] as f64 / self.runs as f64
    }

    /// Unbiased sample variance of agent `i` at sample index `t_idx`.
    pub fn variance(&self, t_idx: usize, agent: usize) -> f64 {
        let n = self.runs as f64;
        let sum = self.sum[t_idx * self.agents + agent] as f64;
        let sq = self.pair_sum
            [t_idx * self.pair_count() + Self::pair_offset(agent, agent, self.agents)]
            as f64;
        ((sq - sum * sum / n) / (n - 1.0)).max(0.0)
    }

    /// Sample covariance of agents `i` and `ip` at sample index `t_idx`.
    pub fn covariance(&self, t_idx: usize, i: usize, ip: usize) -> f64 {
        let (a, b) = (i.min(ip), i.max(ip));
        let n = self.runs as f64;
        let cross =
            self.pair_sum[t_idx * self.pair_count() + Self::pair_offset(a, b, self.agents)] as f64;
        (cross
            - self.sum[t_idx * self.agents + a] as f64 * self.sum[t_idx * self.agents + b] as f64
                / n)
            / (n - 1.0)
    }

    /// Standard error of the mean estimate.
    pub fn stderr(&self, t_idx: usize, agent: usize) -> f64 {
        (self.variance(t_idx, agent) / self.runs as f64).sqrt()
    }

    /// Empirical CDF of one agent's terminal wealth at integer thresholds.
    pub fn terminal_cdf(&self, agent: usize, threshold: u64) -> f64 {
        let hits = self
            .terminal
            .iter()
            .filter(|(w, _)| w[agent] <= threshold)
            .count();
        hits as f64 / self.runs as f64
    }
}

/// Run `runs` independent paths with per-path streams derived from
/// `(master_seed, path index)` and merge their snapshots in path order.
pub fn simulate_ensemble(
    spec: &ModelSpec,
    t_end: f64,
    runs: usize,
    master_seed: u64,
    sample_times: &[f64],
) -> EnsembleStats {
    assert!(runs >= 1);
    assert!(
        sample_times.windows(2).all(|w| w[0] <= w[1]),
        "sample times must be sorted"
    );
    assert!(
        sample_times.iter().all(|&t| (0.0..=t_end).contains(&t)),
        "sample times must lie within [0, t_end]"
    );
    let agents = spec.agents;
    let times = sample_times.len();

    let per_path: Vec<(Vec<u64>, Vec<u64>, usize)> = (0..runs as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(master_seed, path);
            let outcome = run_path(spec, t_end, &mut rng, sample_times, false);
            let mut flat = vec![0u64; times * agents];
            for (s_idx, snapshot) in outcome.trajectory.samples.iter().enumerate() {
                flat[s_idx * agents..(s_idx + 1) * agents].copy_from_slice(&snapshot.wealth);
            }
            (flat, outcome.final_wealth, outcome.final_state)
        })
        .collect();

    let pair_count = agents * (agents + 1) / 2;
    let mut stats = EnsembleStats {
        sample_times: sample_times.to_vec(),
        runs,
        agents,
        sum: vec![0u128; times * agents],
        pair_sum: vec![0u128; times * pair_count],
        terminal: Vec::with_capacity(runs),
    };
    for (flat, terminal_wealth, terminal_state) in per_path {
        for t_idx in 0..times {
            let w = &flat[t_idx * agents..(t_idx + 1) * agents];
            for i in 0..agents {
                stats.sum[t_idx * agents + i] += u128::from(w[i]);
                for ip in i..agents {
                    stats.pair_sum
                        [t_idx * pair_count + EnsembleStats::pair_offset(i, ip, agents)] +=
                        u128::from(w[i]) * u128::from(w[ip]);
                }
            }
        }
        stats.terminal.push((terminal_wealth, terminal_state));
    }
    stats
}

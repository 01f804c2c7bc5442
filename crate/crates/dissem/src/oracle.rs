//! Brute-force ground truth: the forward (master) equation for the joint law
//! of (wealth vector, background state) on a truncated lattice.
//!
//! Mass that leaves the cap region is routed to a single absorbing overflow
//! cell, so the accumulated overflow certifies a truncation-error bound for
//! every downstream comparison. Shock transition rows are precomputed per
//! (source state, background state) by dynamic-programming convolution of the
//! offspring laws; they dominate the cost and are reused across time steps.

use thiserror::Error;

use crate::kernels::LatticeDistribution;
use crate::model::ModelSpec;
use crate::moments::{pair_count, pair_state_index, stacked_index};
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("state table needs {required} entries, exceeding the budget of {budget}")]
    BudgetExceeded { required: usize, budget: usize },
    #[error("initial wealth {wealth} of agent {agent} exceeds its cap {cap}")]
    InitialAboveCap {
        agent: usize,
        wealth: u64,
        cap: usize,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Maximum number of probability-table entries (lattice size times the
    /// number of background states).
    pub budget: usize,
    /// Runs whose final overflow exceeds this are flagged in the result.
    pub overflow_threshold: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            budget: 5_000_000,
            overflow_threshold: 1e-6,
        }
    }
}

/// Explicit joint probability table over capped wealth vectors and background
/// states, plus the absorbed overflow mass.
#[derive(Debug, Clone)]
pub struct TruncatedDistribution {
    cap: Vec<usize>,
    states: usize,
    /// Indexed `lattice_index * states + k`.
    probs: Vec<f64>,
    overflow: f64,
}

impl TruncatedDistribution {
    /// Point mass at wealth vector `at`, background law `chain_probs`.
    pub fn point_mass(
        cap: Vec<usize>,
        states: usize,
        at: &[u64],
        chain_probs: &[f64],
    ) -> Result<Self, OracleError> {
        for (agent, (&w, &c)) in at.iter().zip(&cap).enumerate() {
            if w as usize > c {
                return Err(OracleError::InitialAboveCap {
                    agent,
                    wealth: w,
                    cap: c,
                });
            }
        }
        let lattice: Vec<usize> = at.iter().map(|&w| w as usize).collect();
        let mut dist = TruncatedDistribution {
            probs: vec![0.0; table_len(&cap) * states],
            cap,
            states,
            overflow: 0.0,
        };
        let base = dist.lattice_index(&lattice) * states;
        for (k, &p) in chain_probs.iter().enumerate() {
            dist.probs[base + k] = p;
        }
        Ok(dist)
    }

    pub fn cap(&self) -> &[usize] {
        &self.cap
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn lattice_len(&self) -> usize {
        table_len(&self.cap)
    }

    fn lattice_index(&self, point: &[usize]) -> usize {
        let mut idx = 0;
        for (&x, &c) in point.iter().zip(&self.cap) {
            idx = idx * (c + 1) + x;
        }
        idx
    }

    fn point_of(&self, mut idx: usize) -> Vec<usize> {
        let mut point = vec![0; self.cap.len()];
        for i in (0..self.cap.len()).rev() {
            point[i] = idx % (self.cap[i] + 1);
            idx /= self.cap[i] + 1;
        }
        point
    }

    pub fn probability_of(&self, wealth: &[usize], state: usize) -> f64 {
        if wealth.iter().zip(&self.cap).any(|(&w, &c)| w > c) {
            return 0.0;
        }
        self.probs[self.lattice_index(wealth) * self.states + state]
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.overflow
    }

    /// Marginal probability of each background state (in-cap mass only).
    pub fn state_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.states];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[idx % self.states] += p;
        }
        out
    }

    /// Exact stacked means and symmetric-reduced second moments in the moment
    /// engines' layouts, computed from the in-cap table.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let agents = self.cap.len();
        let d = self.states;
        let mut means = vec![0.0; agents * d];
        let mut seconds = vec![0.0; pair_count(agents) * d];
        let lattice = self.lattice_len();
        for li in 0..lattice {
            let point = self.point_of(li);
            for k in 0..d {
                let p = self.probs[li * d + k];
                if p == 0.0 {
                    continue;
                }
                for i in 0..agents {
                    let mi = point[i] as f64;
                    means[stacked_index(i, k, d)] += mi * p;
                    seconds[pair_state_index(i, i, k, agents, d)] += mi * (mi - 1.0) * p;
                    for ip in i + 1..agents {
                        seconds[pair_state_index(i, ip, k, agents, d)] += mi * point[ip] as f64 * p;
                    }
                }
            }
        }
        (means, seconds)
    }
}

fn table_len(cap: &[usize]) -> usize {
    cap.iter().map(|&c| c + 1).product()
}

struct SparseRow {
    entries: Vec<(u32, f64)>,
    overflow: f64,
}

/// Precomputed generator of the truncated master equation.
pub struct MasterOperator {
    cap: Vec<usize>,
    agents: usize,
    states: usize,
    /// Exit rate per background state for each mechanism bundle.
    q_out: Vec<f64>,
    q: Vec<Vec<f64>>,
    arrival_rates: Vec<Vec<f64>>,
    /// Per class, per lattice index: shifted index or `u32::MAX` when the
    /// arrival pushes past the cap.
    arrival_shift: Vec<Vec<u32>>,
    /// Per stream, per state (empty when the rate is zero), per lattice
    /// index: the shock image law.
    shock_rows: Vec<Vec<Vec<SparseRow>>>,
    shock_rates: Vec<Vec<f64>>,
}

impl MasterOperator {
    pub fn new(spec: &ModelSpec, cap: &[usize], budget: usize) -> Result<Self, OracleError> {
        assert_eq!(cap.len(), spec.agents, "cap must have one entry per agent");
        let d = spec.states();
        let lattice = table_len(cap);
        let required = lattice * d;
        if required > budget {
            return Err(OracleError::BudgetExceeded { required, budget });
        }

        let q = spec.chain.generator();
        let q_rows: Vec<Vec<f64>> = (0..d)
            .map(|k| (0..d).map(|l| q[(k, l)]).collect())
            .collect();
        let q_out: Vec<f64> = (0..d)
            .map(|k| (0..d).filter(|&l| l != k).map(|l| q[(k, l)]).sum())
            .collect();

        let scratch = TruncatedDistribution {
            cap: cap.to_vec(),
            states: d,
            probs: Vec::new(),
            overflow: 0.0,
        };

        let arrival_rates: Vec<Vec<f64>> = spec.arrivals.iter().map(|c| c.rates.clone()).collect();
        let mut arrival_shift = Vec::with_capacity(spec.arrivals.len());
        for class in &spec.arrivals {
            let mut table = vec![u32::MAX; lattice];
            for (li, slot) in table.iter_mut().enumerate() {
                let mut point = scratch.point_of(li);
                let mut ok = true;
                for &i in &class.targets {
                    point[i] += 1;
                    if point[i] > cap[i] {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    *slot = scratch.lattice_index(&point) as u32;
                }
            }
            arrival_shift.push(table);
        }

        let mut shock_rows = Vec::with_capacity(spec.shocks.len());
        let mut shock_rates = Vec::with_capacity(spec.shocks.len());
        for stream in &spec.shocks {
            shock_rates.push(stream.rates.clone());
            let mut per_state = Vec::with_capacity(d);
            for k in 0..d {
                if stream.rates[k] == 0.0 {
                    per_state.push(Vec::new());
                    continue;
                }
                // Incremental per-agent laws of the summed offspring.
                let agent_laws: Vec<Vec<LatticeDistribution>> = (0..spec.agents)
                    .map(|i| {
                        let support = stream.kernel(i, k).support();
                        let mut laws = Vec::with_capacity(cap[i] + 1);
                        laws.push(LatticeDistribution::point_mass(
                            cap.to_vec(),
                            &vec![0; spec.agents],
                        ));
                        for c in 1..=cap[i] {
                            let next = laws[c - 1].convolve_support(&support);
                            laws.push(next);
                        }
                        laws
                    })
                    .collect();

                let mut rows = Vec::with_capacity(lattice);
                for li in 0..lattice {
                    let point = scratch.point_of(li);
                    let mut law = agent_laws[0][point[0]].clone();
                    for (i, &units) in point.iter().enumerate().skip(1) {
                        if units > 0 {
                            law = law.convolve(&agent_laws[i][units]);
                        }
                    }
                    let entries: Vec<(u32, f64)> = law
                        .probs()
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(idx, &p)| (idx as u32, p))
                        .collect();
                    rows.push(SparseRow {
                        entries,
                        overflow: law.overflow(),
                    });
                }
                per_state.push(rows);
            }
            shock_rows.push(per_state);
        }

        Ok(MasterOperator {
            cap: cap.to_vec(),
            agents: spec.agents,
            states: d,
            q_out,
            q: q_rows,
            arrival_rates,
            arrival_shift,
            shock_rows,
            shock_rates,
        })
    }

    /// Apply the generator to a probability table: returns the derivative of
    /// the in-cap table and of the overflow cell.
    pub fn apply(&self, probs: &[f64], out: &mut [f64]) -> f64 {
        let d = self.states;
        let lattice = probs.len() / d;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut d_overflow = 0.0;

        for li in 0..lattice {
            for k in 0..d {
                let p = probs[li * d + k];
                if p == 0.0 {
                    continue;
                }
                let mut out_rate = self.q_out[k];

                for l in 0..d {
                    if l != k {
                        out[li * d + l] += self.q[k][l] * p;
                    }
                }
                for (j, rates) in self.arrival_rates.iter().enumerate() {
                    let rate = rates[k];
                    if rate == 0.0 {
                        continue;
                    }
                    out_rate += rate;
                    let target = self.arrival_shift[j][li];
                    if target == u32::MAX {
                        d_overflow += rate * p;
                    } else {
                        out[target as usize * d + k] += rate * p;
                    }
                }
                for (s, rates) in self.shock_rates.iter().enumerate() {
                    let rate = rates[k];
                    if rate == 0.0 {
                        continue;
                    }
                    out_rate += rate;
                    let row = &self.shock_rows[s][k][li];
                    for &(target, w) in &row.entries {
                        out[target as usize * d + k] += rate * w * p;
                    }
                    d_overflow += rate * row.overflow * p;
                }
                out[li * d + k] -= out_rate * p;
            }
        }
        d_overflow
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn cap(&self) -> &[usize] {
        &self.cap
    }
}

/// One-shot generator application. Builds the operator each call; use
/// [`MasterOperator`] directly when applying repeatedly.
pub fn generator_apply(
    spec: &ModelSpec,
    dist: &TruncatedDistribution,
    options: &OracleOptions,
) -> Result<(Vec<f64>, f64), OracleError> {
    let operator = MasterOperator::new(spec, dist.cap(), options.budget)?;
    let mut out = vec![0.0; dist.probs.len()];
    let d_overflow = operator.apply(&dist.probs, &mut out);
    Ok((out, d_overflow))
}

/// Moments recorded along an evolution.
#[derive(Debug, Clone)]
pub struct OracleSnapshot {
    pub time: f64,
    pub means: Vec<f64>,
    pub seconds: Vec<f64>,
    pub overflow: f64,
}

/// Result of evolving the master equation to `t_end`.
#[derive(Debug)]
pub struct OracleRun {
    pub result: TruncatedDistribution,
    pub history: Vec<OracleSnapshot>,
    /// Set when the final overflow exceeded the configured threshold; the
    /// overflow value itself is the certified truncation-error bound.
    pub overflow_flagged: bool,
}

/// RK4 evolution of the truncated master equation from the model's initial
/// condition, recording moment snapshots at `sample_times`.
pub fn evolve(
    spec: &ModelSpec,
    cap: &[usize],
    t_end: f64,
    step: f64,
    sample_times: &[f64],
    options: &OracleOptions,
) -> Result<OracleRun, OracleError> {
    assert!(step > 0.0 && t_end >= 0.0);
    debug_assert!(
        sample_times.windows(2).all(|w| w[0] <= w[1]),
        "sample times must be sorted"
    );
    let operator = MasterOperator::new(spec, cap, options.budget)?;
    let mut dist = TruncatedDistribution::point_mass(
        cap.to_vec(),
        spec.states(),
        &spec.initial_wealth,
        &spec.chain.initial_probs(),
    )?;

    let mut history = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0usize;
    let mut record_due = |dist: &TruncatedDistribution, t: f64, next: &mut usize| {
        while *next < sample_times.len() && sample_times[*next] <= t + 1e-12 {
            let (means, seconds) = dist.moments();
            history.push(OracleSnapshot {
                time: sample_times[*next],
                means,
                seconds,
                overflow: dist.overflow,
            });
            *next += 1;
        }
    };
    record_due(&dist, 0.0, &mut next_sample);

    let n = dist.probs.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    let mut t = 0.0;
    let full_steps = (t_end / step + 1e-12).floor() as usize;
    let mut advance = |dist: &mut TruncatedDistribution, h: f64| {
        let o1 = operator.apply(&dist.probs, &mut k1);
        for i in 0..n {
            stage[i] = dist.probs[i] + 0.5 * h * k1[i];
        }
        let o2 = operator.apply(&stage, &mut k2);
        for i in 0..n {
            stage[i] = dist.probs[i] + 0.5 * h * k2[i];
        }
        let o3 = operator.apply(&stage, &mut k3);
        for i in 0..n {
            stage[i] = dist.probs[i] + h * k3[i];
        }
        let o4 = operator.apply(&stage, &mut k4);
        for i in 0..n {
            dist.probs[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        dist.overflow += h / 6.0 * (o1 + 2.0 * o2 + 2.0 * o3 + o4);
    };

    for s in 0..full_steps {
        advance(&mut dist, step);
        t = (s + 1) as f64 * step;
        record_due(&dist, t, &mut next_sample);
    }
    let remainder = t_end - t;
    if remainder > 1e-12 * step.max(t_end) {
        advance(&mut dist, remainder);
        record_due(&dist, t_end, &mut next_sample);
    }

    let overflow_flagged = dist.overflow > options.overflow_threshold;
    Ok(OracleRun {
        result: dist,
        history,
        overflow_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::OffspringDistribution;
    use crate::model::{ArrivalClass, BackgroundChain, ModelSpec};
    use crate::numerics::Matrix;
    use approx::assert_abs_diff_eq;

    fn chain1() -> BackgroundChain {
        BackgroundChain::with_fixed_start(Matrix::from_rows(&[vec![0.0]]), 0)
    }

    #[test]
    fn point_mass_moments() {
        let dist = TruncatedDistribution::point_mass(vec![5, 5], 2, &[3, 1], &[0.0, 1.0]).unwrap();
        let (means, seconds) = dist.moments();
        assert_abs_diff_eq!(means[stacked_index(0, 1, 2)], 3.0);
        assert_abs_diff_eq!(means[stacked_index(0, 0, 2)], 0.0);
        assert_abs_diff_eq!(means[stacked_index(1, 1, 2)], 1.0);
        // E[M0 (M0-1)] = 6, E[M0 M1] = 3, E[M1(M1-1)] = 0.
        assert_abs_diff_eq!(seconds[pair_state_index(0, 0, 1, 2, 2)], 6.0);
        assert_abs_diff_eq!(seconds[pair_state_index(0, 1, 1, 2, 2)], 3.0);
        assert_abs_diff_eq!(seconds[pair_state_index(1, 1, 1, 2, 2)], 0.0);
    }

    #[test]
    fn two_point_law_hand_weighted() {
        let mut dist = TruncatedDistribution::point_mass(vec![4], 1, &[1], &[1.0]).unwrap();
        // Move 40% of the mass to wealth 3.
        let idx1 = dist.lattice_index(&[1]);
        let idx3 = dist.lattice_index(&[3]);
        dist.probs[idx1] = 0.6;
        dist.probs[idx3] = 0.4;
        let (means, seconds) = dist.moments();
        assert_abs_diff_eq!(means[0], 0.6 + 1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(seconds[0], 0.4 * 6.0, epsilon = 1e-14);
    }

    #[test]
    fn generator_of_frozen_system_is_zero() {
        let spec = ModelSpec::single_stream(
            1,
            chain1(),
            vec![],
            vec![0.0],
            vec![vec![OffspringDistribution::Deterministic(vec![1])]],
            vec![2],
        );
        let dist = TruncatedDistribution::point_mass(vec![5], 1, &[2], &[1.0]).unwrap();
        let (derivative, d_overflow) =
            generator_apply(&spec, &dist, &OracleOptions::default()).unwrap();
        assert!(derivative.iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(d_overflow, 0.0);
    }

    #[test]
    fn generator_of_pure_birth_matches_poisson_rows() {
        let lambda = 1.3;
        let spec = ModelSpec::single_stream(
            1,
            chain1(),
            vec![ArrivalClass::new(vec![0], vec![lambda])],
            vec![0.0],
            vec![vec![OffspringDistribution::Deterministic(vec![1])]],
            vec![1],
        );
        let dist = TruncatedDistribution::point_mass(vec![5], 1, &[1], &[1.0]).unwrap();
        let (derivative, _) = generator_apply(&spec, &dist, &OracleOptions::default()).unwrap();
        assert_abs_diff_eq!(derivative[1], -lambda, epsilon = 1e-14);
        assert_abs_diff_eq!(derivative[2], lambda, epsilon = 1e-14);
    }

    #[test]
    fn shock_image_of_single_unit_is_the_kernel_law() {
        let kernel = OffspringDistribution::UnitMultinomialWithLeak(vec![0.3, 0.5]);
        let spec = ModelSpec::single_stream(
            2,
            chain1(),
            vec![],
            vec![1.0],
            vec![vec![kernel.clone()], vec![kernel]],
            vec![1, 0],
        );
        let dist = TruncatedDistribution::point_mass(vec![3, 3], 1, &[1, 0], &[1.0]).unwrap();
        let (derivative, _) = generator_apply(&spec, &dist, &OracleOptions::default()).unwrap();
        // Source (1,0) at rate 1: image places the unit per the kernel.
        let idx = |a: usize, b: usize| dist.lattice_index(&[a, b]);
        assert_abs_diff_eq!(derivative[idx(1, 0)], -1.0 + 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(derivative[idx(0, 1)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(derivative[idx(0, 0)], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn initial_wealth_above_cap_is_rejected() {
        let spec = ModelSpec::single_stream(
            1,
            chain1(),
            vec![],
            vec![1.0],
            vec![vec![OffspringDistribution::Deterministic(vec![1])]],
            vec![9],
        );
        let err = evolve(&spec, &[5], 1.0, 0.1, &[], &OracleOptions::default()).unwrap_err();
        assert!(matches!(err, OracleError::InitialAboveCap { agent: 0, .. }));
    }

    #[test]
    fn budget_is_enforced_before_allocation() {
        fn expect_budget_error(res: Result<MasterOperator, OracleError>) -> OracleError {
            match res {
                Ok(_) => panic!("expected budget error"),
                Err(e) => e,
            }
        }
        let spec = ModelSpec::single_stream(
            2,
            chain1(),
            vec![],
            vec![1.0],
            vec![
                vec![OffspringDistribution::Deterministic(vec![1, 0])],
                vec![OffspringDistribution::Deterministic(vec![0, 1])],
            ],
            vec![0, 0],
        );
        let err = expect_budget_error(MasterOperator::new(&spec, &[99, 99], 100));
        assert!(matches!(err, OracleError::BudgetExceeded { .. }));
    }

    #[test]
    fn evolve_at_zero_is_the_point_mass() {
        let spec = ModelSpec::single_stream(
            1,
            chain1(),
            vec![],
            vec![1.0],
            vec![vec![OffspringDistribution::Deterministic(vec![1])]],
            vec![3],
        );
        let run = evolve(&spec, &[6], 0.0, 0.1, &[0.0], &OracleOptions::default()).unwrap();
        assert_abs_diff_eq!(run.result.probability_of(&[3], 0), 1.0, epsilon = 1e-14);
        assert!(!run.overflow_flagged);
    }

    #[test]
    fn pure_death_kernel_decays_exponentially() {
        // All mass leaks at shocks: P(M = 1 at t) = exp(-gamma t).
        let spec = ModelSpec::single_stream(
            1,
            chain1(),
            vec![],
            vec![1.0],
            vec![vec![OffspringDistribution::UnitMultinomialWithLeak(vec![
                0.0,
            ])]],
            vec![1],
        );
        let t = 1.5;
        let run = evolve(&spec, &[3], t, 1e-3, &[t], &OracleOptions::default()).unwrap();
        assert_abs_diff_eq!(
            run.result.probability_of(&[1], 0),
            (-t).exp(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            run.result.probability_of(&[0], 0),
            1.0 - (-t).exp(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn mass_conservation_and_monotone_overflow() {
        let spec = ModelSpec::single_stream(
            2,
            BackgroundChain::with_fixed_start(
                Matrix::from_rows(&[vec![-0.4, 0.4], vec![0.6, -0.6]]),
                0,
            ),
            vec![ArrivalClass::new(vec![0, 1], vec![0.8, 0.3])],
            vec![1.0, 0.5],
            vec![
                vec![
                    OffspringDistribution::UnitMultinomialWithLeak(vec![0.4, 0.4]),
                    OffspringDistribution::UnitMultinomialWithLeak(vec![0.6, 0.2]),
                ],
                vec![
                    OffspringDistribution::UnitMultinomialWithLeak(vec![0.1, 0.7]),
                    OffspringDistribution::UnitMultinomialWithLeak(vec![0.3, 0.5]),
                ],
            ],
            vec![1, 1],
        );
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        let run = evolve(&spec, &[7, 7], 4.0, 5e-3, &grid, &OracleOptions::default()).unwrap();
        assert_abs_diff_eq!(run.result.total_mass(), 1.0, epsilon = 1e-9);
        let overflows: Vec<f64> = run.history.iter().map(|s| s.overflow).collect();
        for pair in overflows.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-12,
                "overflow not monotone: {overflows:?}"
            );
        }
    }
}

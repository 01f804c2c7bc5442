//! Linear moment systems for the dissemination model: assembly of the
//! first-moment matrix pair (A, Lambda) and the second-moment system, fixed
//! grid transient integration, a matrix-exponential quadrature cross-check,
//! stationary solutions and the spectral-abscissa stability verdict.
//!
//! Layouts are fixed so serialized outputs stay stable:
//! * first moments are stacked agent-major, state-minor:
//!   `m[i * d + k] = E[M_i(t) 1{X(t)=k}]`;
//! * reduced second moments are stored symmetric-reduced over agent pairs
//!   `i <= i'`, pair-major, state-minor (see [`pair_index`]).

use crate::model::ModelSpec;
use crate::numerics::{
    expm, gauss_legendre, integrate_linear_ode, solve_linear, spectral_abscissa, Matrix,
    NumericsError, OdeSolution,
};

/// Position of `(agent, state)` in the stacked mean vector.
pub fn stacked_index(agent: usize, state: usize, states: usize) -> usize {
    agent * states + state
}

/// Position of the unordered agent pair `(i, i')`, `i <= i'`, in the
/// symmetric-reduced enumeration.
pub fn pair_index(i: usize, ip: usize, agents: usize) -> usize {
    debug_assert!(i <= ip && ip < agents);
    // Row i of the upper triangle starts after sum_{r<i} (agents - r) entries.
    i * agents - (i * i - i) / 2 + (ip - i)
}

/// Number of unordered agent pairs, including `i = i'`.
pub fn pair_count(agents: usize) -> usize {
    agents * (agents + 1) / 2
}

/// Position of `(pair, state)` in the stacked second-moment vector.
pub fn pair_state_index(i: usize, ip: usize, state: usize, agents: usize, states: usize) -> usize {
    pair_index(i, ip, agents) * states + state
}

/// Assembled first-moment ODE data: `m'(t) = A m(t) + Lambda pi_stacked(t)`.
#[derive(Debug, Clone)]
pub struct FirstMomentSystem {
    /// The `dI x dI` drift matrix with `Q^T` diagonal blocks plus the shock
    /// redistribution gains.
    pub matrix: Matrix,
    /// Diagonal `dI x dI` matrix of total arrival rates per (agent, state).
    pub arrival_gain: Matrix,
    pub agents: usize,
    pub states: usize,
}

/// Assembled second-moment ODE data:
/// `v'(t) = B v(t) + C m(t) + D pi(t)`, `v` symmetric-reduced.
#[derive(Debug, Clone)]
pub struct SecondMomentSystem {
    pub matrix: Matrix,
    /// Gain on the stacked first moments (the arrival cross terms and the
    /// kernel second-moment terms).
    pub mean_gain: Matrix,
    /// Gain on the background state probabilities (the joint-arrival term for
    /// classes containing both agents of a pair).
    pub chain_gain: Matrix,
    pub agents: usize,
    pub states: usize,
}

/// Build `A` and `Lambda` from the kernel mean vectors.
pub fn build_first_moment_system(spec: &ModelSpec) -> FirstMomentSystem {
    let i_count = spec.agents;
    let d = spec.states();
    let q = spec.chain.generator();
    let dim = i_count * d;
    let mut a = Matrix::zeros(dim, dim);
    let mut gain = Matrix::zeros(dim, dim);

    for i in 0..i_count {
        for k in 0..d {
            let row = stacked_index(i, k, d);
            // Modulation: sum_l q_{lk} m_{il}.
            for l in 0..d {
                a[(row, stacked_index(i, l, d))] += q[(l, k)];
            }
            gain[(row, row)] = spec.arrival_rate_onto(i, k);
        }
    }

    for stream in &spec.shocks {
        for k in 0..d {
            let rate = stream.rates[k];
            if rate == 0.0 {
                continue;
            }
            for j in 0..i_count {
                let mean = stream.kernel(j, k).mean_vector();
                let col = stacked_index(j, k, d);
                for i in 0..i_count {
                    a[(stacked_index(i, k, d), col)] += rate * mean[i];
                }
                a[(col, col)] -= rate;
            }
        }
    }

    FirstMomentSystem {
        matrix: a,
        arrival_gain: gain,
        agents: i_count,
        states: d,
    }
}

/// Build the second-moment system, implementing every term of the reduced
/// second-moment ODE: modulation, the joint-arrival term for classes
/// containing both pair members, the two single-arrival cross terms, the
/// kernel product terms, the kernel second-moment terms, and the shock decay.
pub fn build_second_moment_system(spec: &ModelSpec) -> SecondMomentSystem {
    let i_count = spec.agents;
    let d = spec.states();
    let q = spec.chain.generator();
    let n = pair_count(i_count) * d;
    let mut b = Matrix::zeros(n, n);
    let mut c = Matrix::zeros(n, i_count * d);
    let mut chain_gain = Matrix::zeros(n, d);

    // Per-stream, per-state kernel summaries.
    for i in 0..i_count {
        for ip in i..i_count {
            for k in 0..d {
                let row = pair_state_index(i, ip, k, i_count, d);

                for l in 0..d {
                    b[(row, pair_state_index(i, ip, l, i_count, d))] += q[(l, k)];
                }

                // Single-arrival cross terms; for i = i' they stack to 2 lambda.
                c[(row, stacked_index(ip, k, d))] += spec.arrival_rate_onto(i, k);
                c[(row, stacked_index(i, k, d))] += spec.arrival_rate_onto(ip, k);

                // Joint arrivals: classes covering both pair members.
                if i != ip {
                    let joint: f64 = spec
                        .arrivals
                        .iter()
                        .filter(|class| class.targets.contains(&i) && class.targets.contains(&ip))
                        .map(|class| class.rates[k])
                        .sum();
                    chain_gain[(row, k)] += joint;
                }
            }
        }
    }

    for stream in &spec.shocks {
        for k in 0..d {
            let rate = stream.rates[k];
            if rate == 0.0 {
                continue;
            }
            let means: Vec<Vec<f64>> = (0..i_count)
                .map(|j| stream.kernel(j, k).mean_vector())
                .collect();
            let second: Vec<Matrix> = (0..i_count)
                .map(|j| stream.kernel(j, k).second_moment_table())
                .collect();
            for i in 0..i_count {
                for ip in i..i_count {
                    let row = pair_state_index(i, ip, k, i_count, d);
                    // Product term over ordered source pairs (j, j').
                    for j in 0..i_count {
                        let w_ji = means[j][i];
                        if w_ji == 0.0 {
                            continue;
                        }
                        for jp in 0..i_count {
                            let w = w_ji * means[jp][ip];
                            if w == 0.0 {
                                continue;
                            }
                            let col = pair_state_index(j.min(jp), j.max(jp), k, i_count, d);
                            b[(row, col)] += rate * w;
                        }
                    }
                    // Kernel reduced-second-moment term on the means.
                    for j in 0..i_count {
                        let w2 = second[j][(i, ip)];
                        if w2 != 0.0 {
                            c[(row, stacked_index(j, k, d))] += rate * w2;
                        }
                    }
                    b[(row, row)] -= rate;
                }
            }
        }
    }

    SecondMomentSystem {
        matrix: b,
        mean_gain: c,
        chain_gain,
        agents: i_count,
        states: d,
    }
}

/// Time-indexed moment curves on the integration grid.
#[derive(Debug, Clone)]
pub struct MomentCurves {
    pub times: Vec<f64>,
    /// Background state probabilities, one `d`-vector per grid point.
    pub chain_probs: Vec<Vec<f64>>,
    /// Stacked means, one `dI`-vector per grid point.
    pub means: Vec<Vec<f64>>,
    /// Stacked symmetric-reduced second moments, when requested.
    pub seconds: Option<Vec<Vec<f64>>>,
}

impl MomentCurves {
    /// Index of the grid point closest to `t`.
    pub fn closest_index(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }

    /// Per-agent mean (aggregated over background states) at a grid index.
    pub fn agent_means_at(&self, index: usize, agents: usize, states: usize) -> Vec<f64> {
        let stacked = &self.means[index];
        (0..agents)
            .map(|i| {
                (0..states)
                    .map(|k| stacked[stacked_index(i, k, states)])
                    .sum()
            })
            .collect()
    }

    /// Total mean mass at a grid index.
    pub fn total_mass_at(&self, index: usize) -> f64 {
        self.means[index].iter().sum()
    }
}

/// Initial stacked mean vector `m_ik(0) = m0_i * P(X(0) = k)`.
fn initial_means(spec: &ModelSpec) -> Vec<f64> {
    let d = spec.states();
    let pi0 = spec.chain.initial_probs();
    let mut m = vec![0.0; spec.agents * d];
    for i in 0..spec.agents {
        for k in 0..d {
            m[stacked_index(i, k, d)] = spec.initial_wealth[i] as f64 * pi0[k];
        }
    }
    m
}

/// Initial stacked second moments for a deterministic starting wealth vector.
fn initial_seconds(spec: &ModelSpec) -> Vec<f64> {
    let d = spec.states();
    let pi0 = spec.chain.initial_probs();
    let mut v = vec![0.0; pair_count(spec.agents) * d];
    for i in 0..spec.agents {
        for ip in i..spec.agents {
            let m0 = spec.initial_wealth[i] as f64;
            let m0p = spec.initial_wealth[ip] as f64;
            let value = if i == ip { m0 * (m0 - 1.0) } else { m0 * m0p };
            if value == 0.0 {
                continue;
            }
            for k in 0..d {
                v[pair_state_index(i, ip, k, spec.agents, d)] = value * pi0[k];
            }
        }
    }
    v
}

/// Integrate the first-moment system jointly with the background state
/// probabilities on a fixed RK4 grid.
pub fn transient_means(
    spec: &ModelSpec,
    t_end: f64,
    step: f64,
) -> Result<MomentCurves, NumericsError> {
    let system = build_first_moment_system(spec);
    let d = spec.states();
    let dim = spec.agents * d;
    let combined = combined_first_matrix(spec, &system);

    let mut y0 = spec.chain.initial_probs();
    y0.extend(initial_means(spec));
    let sol = integrate_linear_ode(&combined, |_| vec![0.0; d + dim], y0, t_end, step)?;
    Ok(split_solution(sol, d, dim, None))
}

/// Integrate first and second moments jointly (one combined linear state, no
/// interpolation of `m(t)` into the second-moment equation).
pub fn transient_second_moments(
    spec: &ModelSpec,
    t_end: f64,
    step: f64,
) -> Result<MomentCurves, NumericsError> {
    let first = build_first_moment_system(spec);
    let second = build_second_moment_system(spec);
    let d = spec.states();
    let dim = spec.agents * d;
    let n = second.matrix.rows();

    let total = d + dim + n;
    let mut combined = Matrix::zeros(total, total);
    embed(&mut combined, spec.chain.generator().transpose(), 0, 0);
    embed_first_coupling(&mut combined, spec, &first, d);
    embed(&mut combined, second.chain_gain.clone(), d + dim, 0);
    embed(&mut combined, second.mean_gain.clone(), d + dim, d);
    embed(&mut combined, second.matrix.clone(), d + dim, d + dim);

    let mut y0 = spec.chain.initial_probs();
    y0.extend(initial_means(spec));
    y0.extend(initial_seconds(spec));
    let sol = integrate_linear_ode(&combined, |_| vec![0.0; total], y0, t_end, step)?;
    Ok(split_solution(sol, d, dim, Some(n)))
}

fn combined_first_matrix(spec: &ModelSpec, system: &FirstMomentSystem) -> Matrix {
    let d = spec.states();
    let dim = spec.agents * d;
    let mut combined = Matrix::zeros(d + dim, d + dim);
    embed(&mut combined, spec.chain.generator().transpose(), 0, 0);
    embed_first_coupling(&mut combined, spec, system, d);
    combined
}

fn embed_first_coupling(
    target: &mut Matrix,
    spec: &ModelSpec,
    system: &FirstMomentSystem,
    d: usize,
) {
    let dim = spec.agents * d;
    // Lambda couples m to the d chain probabilities: row (i,k) reads pi_k.
    for i in 0..spec.agents {
        for k in 0..d {
            let row = stacked_index(i, k, d);
            target[(d + row, k)] += system.arrival_gain[(row, row)];
        }
    }
    for r in 0..dim {
        for c in 0..dim {
            let v = system.matrix[(r, c)];
            if v != 0.0 {
                target[(d + r, d + c)] = v;
            }
        }
    }
}

fn embed(target: &mut Matrix, block: Matrix, row0: usize, col0: usize) {
    for r in 0..block.rows() {
        for c in 0..block.cols() {
            let v = block[(r, c)];
            if v != 0.0 {
                target[(row0 + r, col0 + c)] = v;
            }
        }
    }
}

fn split_solution(sol: OdeSolution, d: usize, dim: usize, n: Option<usize>) -> MomentCurves {
    let mut chain_probs = Vec::with_capacity(sol.states.len());
    let mut means = Vec::with_capacity(sol.states.len());
    let mut seconds = n.map(|_| Vec::with_capacity(sol.states.len()));
    for state in &sol.states {
        chain_probs.push(state[..d].to_vec());
        means.push(state[d..d + dim].to_vec());
        if let Some(acc) = seconds.as_mut() {
            acc.push(state[d + dim..].to_vec());
        }
    }
    MomentCurves {
        times: sol.times,
        chain_probs,
        means,
        seconds,
    }
}

/// Evaluate the matrix-exponential closed form
/// `m(t) = e^{At} m(0) + int_0^t e^{A(t-s)} Lambda pi_stacked(s) ds`
/// with Gauss-Legendre quadrature in `s`. Cross-check for [`transient_means`].
pub fn transient_means_quadrature(spec: &ModelSpec, t: f64) -> Vec<f64> {
    const NODES: usize = 40;
    let system = build_first_moment_system(spec);
    let d = spec.states();
    let m0 = initial_means(spec);
    if t == 0.0 {
        return m0;
    }
    let mut m = expm(&system.matrix.scale(t)).apply(&m0);

    let (nodes, weights) = gauss_legendre(NODES);
    let half = 0.5 * t;
    for (&x, &w) in nodes.iter().zip(&weights) {
        let s = half * (x + 1.0);
        let pi_s = spec.chain.transient_distribution(s);
        // Lambda applied to the stacked replicate of pi(s).
        let mut forced = vec![0.0; spec.agents * d];
        for i in 0..spec.agents {
            for k in 0..d {
                let idx = stacked_index(i, k, d);
                forced[idx] = system.arrival_gain[(idx, idx)] * pi_s[k];
            }
        }
        let propagated = expm(&system.matrix.scale(t - s)).apply(&forced);
        for (mi, pi) in m.iter_mut().zip(&propagated) {
            *mi += w * half * pi;
        }
    }
    m
}

/// Stability report: the spectral abscissa of `A` and whether the sufficient
/// ergodicity condition holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub omega: f64,
    /// True only when `omega < -1e-10`. This is a sufficient condition:
    /// marginal models (conservation kernels give `omega = 0`) may still
    /// converge, so a false flag never asserts instability.
    pub ergodic_sufficient: bool,
}

pub fn stability(spec: &ModelSpec) -> Result<Stability, NumericsError> {
    let system = build_first_moment_system(spec);
    let omega = spectral_abscissa(&system.matrix)?;
    Ok(Stability {
        omega,
        ergodic_sufficient: omega < -1e-10,
    })
}

/// Stationary mean vector, or the abscissa when stability is not guaranteed.
#[derive(Debug, Clone, PartialEq)]
pub enum StationaryMeans {
    Stable(Vec<f64>),
    /// The sufficient condition `omega < 0` failed; no solve is attempted.
    Unverified {
        omega: f64,
    },
}

/// Steady-state stacked means `-A^{-1} Lambda pi` with `pi` stationary.
pub fn stationary_means(spec: &ModelSpec) -> Result<StationaryMeans, NumericsError> {
    let system = build_first_moment_system(spec);
    let omega = spectral_abscissa(&system.matrix)?;
    if omega >= -1e-10 {
        return Ok(StationaryMeans::Unverified { omega });
    }
    let pi = spec
        .chain
        .stationary_distribution()
        .map_err(|e| NumericsError::Dimension(e.to_string()))?;
    let rhs = stacked_arrival_forcing(spec, &system, &pi)
        .iter()
        .map(|v| -v)
        .collect::<Vec<f64>>();
    let means = solve_linear(&system.matrix, &rhs)?;
    Ok(StationaryMeans::Stable(means))
}

/// Steady-state symmetric-reduced second moments, solving
/// `B v = -(C m + D pi)` at the stationary means.
pub fn stationary_second_moments(
    spec: &ModelSpec,
    stationary: &[f64],
) -> Result<Vec<f64>, NumericsError> {
    let second = build_second_moment_system(spec);
    let pi = spec
        .chain
        .stationary_distribution()
        .map_err(|e| NumericsError::Dimension(e.to_string()))?;
    let mut rhs = second.mean_gain.apply(stationary);
    for (r, extra) in rhs.iter_mut().zip(second.chain_gain.apply(&pi)) {
        *r = -(*r + extra);
    }
    solve_linear(&second.matrix, &rhs)
}

fn stacked_arrival_forcing(spec: &ModelSpec, system: &FirstMomentSystem, pi: &[f64]) -> Vec<f64> {
    let d = spec.states();
    let mut out = vec![0.0; spec.agents * d];
    for i in 0..spec.agents {
        for k in 0..d {
            let idx = stacked_index(i, k, d);
            out[idx] = system.arrival_gain[(idx, idx)] * pi[k];
        }
    }
    out
}

/// Per-agent central moments aggregated over the background state.
#[derive(Debug, Clone)]
pub struct CentralMoments {
    /// Per-agent means.
    pub means: Vec<f64>,
    /// Per-agent variances.
    pub variances: Vec<f64>,
    /// Full covariance matrix (variances on the diagonal).
    pub covariance: Matrix,
}

/// Convert stacked raw/reduced moments into variances and covariances:
/// `Var_i = sum_k v_iik + m_i - m_i^2`,
/// `Cov_ii' = sum_k v_ii'k - m_i m_i'`.
pub fn central_moments(
    means: &[f64],
    seconds: &[f64],
    agents: usize,
    states: usize,
) -> CentralMoments {
    let agent_mean: Vec<f64> = (0..agents)
        .map(|i| {
            (0..states)
                .map(|k| means[stacked_index(i, k, states)])
                .sum()
        })
        .collect();
    let mut covariance = Matrix::zeros(agents, agents);
    for i in 0..agents {
        for ip in i..agents {
            let v_sum: f64 = (0..states)
                .map(|k| seconds[pair_state_index(i, ip, k, agents, states)])
                .sum();
            let value = if i == ip {
                v_sum + agent_mean[i] - agent_mean[i] * agent_mean[i]
            } else {
                v_sum - agent_mean[i] * agent_mean[ip]
            };
            covariance[(i, ip)] = value;
            covariance[(ip, i)] = value;
        }
    }
    let variances = (0..agents).map(|i| covariance[(i, i)]).collect();
    CentralMoments {
        means: agent_mean,
        variances,
        covariance,
    }
}

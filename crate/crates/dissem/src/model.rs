//! Domain types for the dissemination model: the modulating background chain,
//! external arrival classes, shock streams with their redistribution kernels,
//! and validation. Everything downstream consumes these types.

use thiserror::Error;

use crate::kernels::OffspringDistribution;
use crate::numerics::{expm, solve_linear, Matrix, NumericsError};

/// Tolerance for user-entered rates and probabilities. Inputs are literals,
/// not computed quantities, so the bound is tight and absolute.
pub const INPUT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("background chain is invalid: {0}")]
    InvalidChain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How the background chain starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Deterministic start in a fixed state.
    Fixed(usize),
    /// Probability vector over the states.
    Mixed(Vec<f64>),
}

/// Autonomous continuous-time Markov chain modulating all model rates.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundChain {
    generator: Matrix,
    initial: InitialState,
}

impl BackgroundChain {
    pub fn new(generator: Matrix, initial: InitialState) -> Self {
        BackgroundChain { generator, initial }
    }

    /// Chain starting deterministically in `state`.
    pub fn with_fixed_start(generator: Matrix, state: usize) -> Self {
        Self::new(generator, InitialState::Fixed(state))
    }

    /// Chain started from its own stationary distribution.
    pub fn in_stationarity(generator: Matrix) -> Result<Self, ModelError> {
        let chain = Self::new(generator.clone(), InitialState::Fixed(0));
        let pi = chain.stationary_distribution()?;
        Ok(Self::new(generator, InitialState::Mixed(pi)))
    }

    /// Number of background states `d`.
    pub fn dim(&self) -> usize {
        self.generator.rows()
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    /// Initial law as a probability vector of length `d`.
    pub fn initial_probs(&self) -> Vec<f64> {
        match &self.initial {
            InitialState::Fixed(k) => {
                let mut p = vec![0.0; self.dim()];
                p[*k] = 1.0;
                p
            }
            InitialState::Mixed(p) => p.clone(),
        }
    }

    /// Unique stationary distribution, solving the balance equations with the
    /// normalization row appended.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>, ModelError> {
        let d = self.dim();
        if d == 1 {
            return Ok(vec![1.0]);
        }
        // pi Q = 0 with sum(pi) = 1: transpose and replace the last row.
        let mut system = self.generator.transpose();
        let mut rhs = vec![0.0; d];
        for j in 0..d {
            system[(d - 1, j)] = 1.0;
        }
        rhs[d - 1] = 1.0;
        let pi = solve_linear(&system, &rhs)?;
        Ok(pi)
    }

    /// State distribution at time `t` given the chain's initial law.
    pub fn transient_distribution(&self, t: f64) -> Vec<f64> {
        self.transient_from(&self.initial_probs(), t)
    }

    /// Propagate an arbitrary starting law by `t`: `p(t)^T = p(0)^T e^{Qt}`.
    pub fn transient_from(&self, start: &[f64], t: f64) -> Vec<f64> {
        assert!(t >= 0.0, "time must be non-negative");
        let d = self.dim();
        assert_eq!(start.len(), d);
        let transition = expm(&self.generator.scale(t));
        let mut out = vec![0.0; d];
        for (k, &pk) in start.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for l in 0..d {
                out[l] += pk * transition[(k, l)];
            }
        }
        out
    }
}

/// External Poisson stream that adds one unit to every agent in `targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalClass {
    /// Target set, agent indices (0-based).
    pub targets: Vec<usize>,
    /// Per-background-state rates, length `d`. Zero means the class is
    /// inactive in that state.
    pub rates: Vec<f64>,
}

impl ArrivalClass {
    pub fn new(mut targets: Vec<usize>, rates: Vec<f64>) -> Self {
        targets.sort_unstable();
        targets.dedup();
        ArrivalClass { targets, rates }
    }
}

/// One Poisson shock mechanism: per-state rates plus the kernel table
/// indexed by (agent, background state).
///
/// The base model has a single stream; superimposing several independent
/// streams with their own redistribution maps covers systems like storage
/// backups racing against storage failures. The generator is additive across
/// streams, so all moment formulas extend stream-by-stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockStream {
    pub name: String,
    /// Per-state shock rates, length `d`. Zero disables the stream in that
    /// state.
    pub rates: Vec<f64>,
    /// `kernels[i][k]`: law of the destinations of one unit of agent `i`
    /// when the background state is `k`.
    pub kernels: Vec<Vec<OffspringDistribution>>,
}

impl ShockStream {
    pub fn kernel(&self, agent: usize, state: usize) -> &OffspringDistribution {
        &self.kernels[agent][state]
    }
}

/// Full model: agent count, background chain, arrival classes, shock streams
/// and the initial wealth vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub agents: usize,
    pub chain: BackgroundChain,
    pub arrivals: Vec<ArrivalClass>,
    pub shocks: Vec<ShockStream>,
    pub initial_wealth: Vec<u64>,
}

impl ModelSpec {
    /// The common single-stream model.
    pub fn single_stream(
        agents: usize,
        chain: BackgroundChain,
        arrivals: Vec<ArrivalClass>,
        shock_rates: Vec<f64>,
        kernels: Vec<Vec<OffspringDistribution>>,
        initial_wealth: Vec<u64>,
    ) -> Self {
        ModelSpec {
            agents,
            chain,
            arrivals,
            shocks: vec![ShockStream {
                name: "shocks".into(),
                rates: shock_rates,
                kernels,
            }],
            initial_wealth,
        }
    }

    pub fn states(&self) -> usize {
        self.chain.dim()
    }

    /// Total arrival rate onto agent `i` in state `k` (the lambda-bar of the
    /// first-moment system).
    pub fn arrival_rate_onto(&self, agent: usize, state: usize) -> f64 {
        self.arrivals
            .iter()
            .filter(|class| class.targets.contains(&agent))
            .map(|class| class.rates[state])
            .sum()
    }
}

/// A single violated invariant with a path-like locator.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Outcome of validating a spec; empty means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Check every structural invariant of a spec. Pure and side-effect-free;
/// violations are data, not failures.
pub fn validate(spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let d = spec.states();

    if spec.agents == 0 {
        report.push("agents", "agent count must be positive");
    }

    validate_chain(&spec.chain, &mut report);

    for (j, class) in spec.arrivals.iter().enumerate() {
        let path = format!("arrivals[{j}]");
        if class.targets.is_empty() {
            report.push(format!("{path}.targets"), "empty target set");
        }
        for &i in &class.targets {
            if i >= spec.agents {
                report.push(
                    format!("{path}.targets"),
                    format!("agent index {i} out of range (I = {})", spec.agents),
                );
            }
        }
        if class.rates.len() != d {
            report.push(
                format!("{path}.rates"),
                format!("expected {d} per-state rates, got {}", class.rates.len()),
            );
        }
        for (k, &rate) in class.rates.iter().enumerate() {
            if !rate.is_finite() || rate < 0.0 {
                report.push(format!("{path}.rates[{k}]"), format!("invalid rate {rate}"));
            }
        }
    }

    if spec.shocks.is_empty() {
        report.push("shocks", "at least one shock stream is required");
    }
    for (s, stream) in spec.shocks.iter().enumerate() {
        let path = format!("shocks[{s}]");
        if stream.rates.len() != d {
            report.push(
                format!("{path}.rates"),
                format!("expected {d} per-state rates, got {}", stream.rates.len()),
            );
        }
        for (k, &rate) in stream.rates.iter().enumerate() {
            if !rate.is_finite() || rate < 0.0 {
                report.push(format!("{path}.rates[{k}]"), format!("invalid rate {rate}"));
            }
        }
        if stream.kernels.len() != spec.agents {
            report.push(
                format!("{path}.kernels"),
                format!(
                    "expected one kernel row per agent ({}), got {}",
                    spec.agents,
                    stream.kernels.len()
                ),
            );
            continue;
        }
        for (i, row) in stream.kernels.iter().enumerate() {
            if row.len() != d {
                report.push(
                    format!("{path}.kernels[{i}]"),
                    format!("expected {d} per-state kernels, got {}", row.len()),
                );
                continue;
            }
            for (k, kernel) in row.iter().enumerate() {
                let kpath = format!("{path}.kernels[{i}][{k}]");
                if kernel.dimension() != spec.agents {
                    report.push(
                        &kpath,
                        format!(
                            "kernel dimension {} does not match agent count {}",
                            kernel.dimension(),
                            spec.agents
                        ),
                    );
                }
                for issue in kernel.check() {
                    report.push(&kpath, issue);
                }
            }
        }
    }

    if spec.initial_wealth.len() != spec.agents {
        report.push(
            "initial_wealth",
            format!(
                "expected {} entries, got {}",
                spec.agents,
                spec.initial_wealth.len()
            ),
        );
    }

    report
}

fn validate_chain(chain: &BackgroundChain, report: &mut ValidationReport) {
    let q = chain.generator();
    let d = q.rows();
    if d == 0 {
        report.push("chain.q", "chain needs at least one state");
        return;
    }
    if !q.is_square() {
        report.push(
            "chain.q",
            format!("generator must be square, got {}x{}", q.rows(), q.cols()),
        );
        return;
    }
    if !q.is_finite() {
        report.push("chain.q", "generator has non-finite entries");
        return;
    }
    for i in 0..d {
        let mut row_sum = 0.0;
        for j in 0..d {
            row_sum += q[(i, j)];
            if i != j && q[(i, j)] < 0.0 {
                report.push(
                    format!("chain.q[{i}][{j}]"),
                    format!("negative off-diagonal rate {}", q[(i, j)]),
                );
            }
        }
        if row_sum.abs() > INPUT_TOLERANCE {
            report.push(
                format!("chain.q[{i}]"),
                format!("row sums to {row_sum:e}, not 0"),
            );
        }
    }
    if !is_strongly_connected(q) {
        report.push("chain.q", "chain not irreducible");
    }
    match chain.initial() {
        InitialState::Fixed(k) => {
            if *k >= d {
                report.push(
                    "chain.initial",
                    format!("initial state {k} out of range (d = {d})"),
                );
            }
        }
        InitialState::Mixed(p) => {
            if p.len() != d {
                report.push(
                    "chain.initial",
                    format!("initial vector length {} does not match d = {d}", p.len()),
                );
            } else {
                let mut total = 0.0;
                for (k, &pk) in p.iter().enumerate() {
                    if !pk.is_finite() || pk < 0.0 {
                        report.push(
                            format!("chain.initial[{k}]"),
                            format!("invalid probability {pk}"),
                        );
                    }
                    total += pk;
                }
                if (total - 1.0).abs() > INPUT_TOLERANCE {
                    report.push(
                        "chain.initial",
                        format!("probabilities sum to {total}, not 1"),
                    );
                }
            }
        }
    }
}

/// Structural irreducibility: the directed graph of strictly positive
/// off-diagonal rates is strongly connected. Exact and cheap at these
/// dimensions (reachability from state 0 in the graph and its reverse).
fn is_strongly_connected(q: &Matrix) -> bool {
    let d = q.rows();
    if d <= 1 {
        return true;
    }
    let reaches = |reverse: bool| {
        let mut seen = vec![false; d];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..d {
                if u == v || seen[v] {
                    continue;
                }
                let rate = if reverse { q[(v, u)] } else { q[(u, v)] };
                if rate > 0.0 {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reaches(false) && reaches(true)
}

//! Leader/followers wealth redistribution and the poverty-trap analytics.
//!
//! One distinguished agent (the leader) receives all external income; at
//! shock epochs a wealth unit of the leader stays put with the retention
//! probability, moves to each follower with a small transfer probability, or
//! leaks out of the economy. Follower units circulate among the followers
//! (including their owner) or leak. A two-state background chain switches the
//! whole parameter set between growth and recession.

use crate::kernels::OffspringDistribution;
use crate::model::{ArrivalClass, BackgroundChain, ModelSpec};
use crate::numerics::{bivariate_normal_cdf, std_normal_cdf, Matrix};

/// Parameters of the two-state leader/followers economy.
#[derive(Debug, Clone)]
pub struct WealthScenario {
    /// Total number of agents, leader included.
    pub agents: usize,
    /// Rate growth -> recession.
    pub growth_to_recession: f64,
    /// Rate recession -> growth.
    pub recession_to_growth: f64,
    /// Leader income rate per state.
    pub leader_income: [f64; 2],
    /// Redistribution (shock) rate per state.
    pub shock_rates: [f64; 2],
    /// Leader self-retention probability per state.
    pub retention: [f64; 2],
    /// Leader-to-each-follower transfer probability per state.
    pub leader_to_follower: [f64; 2],
    /// Follower-to-each-follower transfer probability per state.
    pub follower_to_follower: [f64; 2],
}

impl WealthScenario {
    /// Build from the leak complements usually quoted for this model:
    /// `leader_leak = 1 - p - (I-1) r` and `follower_leak = 1 - (I-1) s`.
    /// The per-follower probabilities are recovered by inversion.
    #[allow(clippy::too_many_arguments)]
    pub fn from_leaks(
        agents: usize,
        growth_to_recession: f64,
        recession_to_growth: f64,
        leader_income: [f64; 2],
        shock_rates: [f64; 2],
        retention: [f64; 2],
        leader_leak: [f64; 2],
        follower_leak: [f64; 2],
    ) -> Self {
        let followers = (agents - 1) as f64;
        let leader_to_follower = [
            (1.0 - retention[0] - leader_leak[0]) / followers,
            (1.0 - retention[1] - leader_leak[1]) / followers,
        ];
        let follower_to_follower = [
            (1.0 - follower_leak[0]) / followers,
            (1.0 - follower_leak[1]) / followers,
        ];
        WealthScenario {
            agents,
            growth_to_recession,
            recession_to_growth,
            leader_income,
            shock_rates,
            retention,
            leader_to_follower,
            follower_to_follower,
        }
    }

    /// Invariant violations; empty when the scenario is admissible.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.agents < 2 {
            issues.push("need a leader and at least one follower".into());
        }
        let followers = (self.agents - 1) as f64;
        for k in 0..2 {
            let p = self.retention[k];
            let r = self.leader_to_follower[k];
            let s = self.follower_to_follower[k];
            if !(0.0..=1.0).contains(&p) {
                issues.push(format!("retention[{k}] = {p} outside [0, 1]"));
            }
            if r < 0.0 || r > (1.0 - p) / followers + 1e-12 {
                issues.push(format!("leader_to_follower[{k}] = {r} above (1-p)/(I-1)"));
            }
            if s < 0.0 || s > 1.0 / followers + 1e-12 {
                issues.push(format!("follower_to_follower[{k}] = {s} above 1/(I-1)"));
            }
        }
        issues
    }
}

/// Assemble the full model: leader kernel `(p_k, r_k, ..., r_k)`, follower
/// kernel `(0, s_k, ..., s_k)`, income arriving only at the leader, chain
/// started in stationarity, everyone starting at zero wealth.
pub fn build_wealth_spec(sc: &WealthScenario) -> ModelSpec {
    let agents = sc.agents;
    let q = Matrix::from_rows(&[
        vec![-sc.growth_to_recession, sc.growth_to_recession],
        vec![sc.recession_to_growth, -sc.recession_to_growth],
    ]);
    let chain = BackgroundChain::in_stationarity(q).expect("two-state chain is irreducible");

    let kernels = (0..agents)
        .map(|i| {
            (0..2usize)
                .map(|k| {
                    let mut placement = vec![0.0; agents];
                    if i == 0 {
                        placement[0] = sc.retention[k];
                        for slot in placement.iter_mut().skip(1) {
                            *slot = sc.leader_to_follower[k];
                        }
                    } else {
                        for slot in placement.iter_mut().skip(1) {
                            *slot = sc.follower_to_follower[k];
                        }
                    }
                    OffspringDistribution::UnitMultinomialWithLeak(placement)
                })
                .collect()
        })
        .collect();

    ModelSpec::single_stream(
        agents,
        chain,
        vec![ArrivalClass::new(vec![0], sc.leader_income.to_vec())],
        sc.shock_rates.to_vec(),
        kernels,
        vec![0; agents],
    )
}

/// Continuity-corrected normal approximation of the probability that a
/// follower's wealth is at or below `threshold`:
/// `Phi((c + 1/2 - m_F) / sqrt(v_FF_central))`.
pub fn poverty_threshold_prob(follower_mean: f64, follower_var: f64, threshold: f64) -> f64 {
    assert!(follower_var > 0.0, "follower variance must be positive");
    std_normal_cdf((threshold + 0.5 - follower_mean) / follower_var.sqrt())
}

/// Bivariate normal approximation of two distinct followers both sitting at
/// or below `threshold`. `follower_cross` is the central covariance between
/// two followers; the covariance matrix must be positive definite.
pub fn poverty_pair_prob(
    follower_mean: f64,
    follower_var: f64,
    follower_cross: f64,
    threshold: f64,
) -> f64 {
    assert!(
        follower_var > 0.0 && follower_cross.abs() < follower_var,
        "covariance matrix must be positive definite"
    );
    let z = (threshold + 0.5 - follower_mean) / follower_var.sqrt();
    bivariate_normal_cdf(z, z, follower_cross / follower_var)
}

/// Normal approximation of the poverty count over the follower population.
#[derive(Debug, Clone)]
pub struct PovertyCount {
    pub mean: f64,
    pub std_dev: f64,
    /// `pmf[k]` approximates `P(B = k)` for `k = 0..=I-1` followers.
    pub pmf: Vec<f64>,
}

/// Distribution of the number of followers at or below the threshold,
/// from the marginal probability `f_n` and the pair probability `f_pair`.
/// The followers share the background environment, so the count is not
/// binomial; the pair correction enters the variance.
pub fn poverty_count_distribution(agents: usize, f_n: f64, f_pair: f64) -> PovertyCount {
    assert!((0.0..=1.0).contains(&f_n) && (0.0..=1.0).contains(&f_pair));
    let followers = (agents - 1) as f64;
    let mean = followers * f_n;
    let variance =
        followers * f_n * (1.0 - f_n) + followers * (followers - 1.0) * (f_pair - f_n * f_n);
    assert!(variance > 0.0, "degenerate count variance {variance}");
    let std_dev = variance.sqrt();
    let pmf = (0..agents)
        .map(|k| {
            let hi = (k as f64 + 0.5 - mean) / std_dev;
            let lo = (k as f64 - 0.5 - mean) / std_dev;
            std_normal_cdf(hi) - std_normal_cdf(lo)
        })
        .collect();
    PovertyCount { mean, std_dev, pmf }
}

//! Two-group opinion dynamics with a normal/adapted background mode.
//!
//! In the normal mode both groups spread opinion units over the whole
//! population with within/cross-group placement probabilities chosen so that
//! no opinion mass can leak. In the adapted mode the groups separate: group B
//! circulates internally, while group A units may double before placement
//! and group A agents can pick up external reinforcement.

use crate::kernels::OffspringDistribution;
use crate::model::{ArrivalClass, BackgroundChain, ModelSpec};
use crate::moments::MomentCurves;
use crate::numerics::Matrix;

/// Parameters of the two-group opinion model.
#[derive(Debug, Clone)]
pub struct OpinionScenario {
    pub group_a: usize,
    pub group_b: usize,
    /// Rate normal -> adapted.
    pub normal_to_adapted: f64,
    /// Rate adapted -> normal.
    pub adapted_to_normal: f64,
    /// External reinforcement rate of each group-A agent in the adapted mode.
    pub adapted_arrival_rate: f64,
    /// Probability that a group-A unit doubles in the adapted mode.
    pub double_prob: f64,
    /// Opinion redistribution rate (both modes).
    pub shock_rate: f64,
    /// Normal-mode placement probabilities (per destination agent).
    pub a_to_a: f64,
    pub a_to_b: f64,
    pub b_to_a: f64,
    pub b_to_b: f64,
    /// Initial opinion per agent of group A and group B.
    pub initial_opinion: [u64; 2],
}

impl OpinionScenario {
    /// Build the normal-mode placements from attention ratios:
    /// `ratio_a = I_A p_AA / (I_B p_AB)` and `ratio_b = I_A p_BA / (I_B p_BB)`,
    /// resolving the mass-conservation constraints
    /// `I_A p_AA + I_B p_AB = 1` and `I_A p_BA + I_B p_BB = 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_attention_ratios(
        group_a: usize,
        group_b: usize,
        normal_to_adapted: f64,
        adapted_to_normal: f64,
        adapted_arrival_rate: f64,
        double_prob: f64,
        shock_rate: f64,
        ratio_a: f64,
        ratio_b: f64,
        initial_opinion: [u64; 2],
    ) -> Self {
        let ia = group_a as f64;
        let ib = group_b as f64;
        OpinionScenario {
            group_a,
            group_b,
            normal_to_adapted,
            adapted_to_normal,
            adapted_arrival_rate,
            double_prob,
            shock_rate,
            a_to_a: ratio_a / ((1.0 + ratio_a) * ia),
            a_to_b: 1.0 / ((1.0 + ratio_a) * ib),
            b_to_a: ratio_b / ((1.0 + ratio_b) * ia),
            b_to_b: 1.0 / ((1.0 + ratio_b) * ib),
            initial_opinion,
        }
    }

    /// Invariant violations; empty when admissible. Normal-mode placements
    /// must conserve opinion mass exactly.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let ia = self.group_a as f64;
        let ib = self.group_b as f64;
        let row_a = ia * self.a_to_a + ib * self.a_to_b;
        let row_b = ia * self.b_to_a + ib * self.b_to_b;
        if (row_a - 1.0).abs() > 1e-12 {
            issues.push(format!(
                "group A normal-mode placement sums to {row_a}, not 1"
            ));
        }
        if (row_b - 1.0).abs() > 1e-12 {
            issues.push(format!(
                "group B normal-mode placement sums to {row_b}, not 1"
            ));
        }
        if !(0.0..=1.0).contains(&self.double_prob) {
            issues.push(format!("double_prob {} outside [0, 1]", self.double_prob));
        }
        if self.adapted_arrival_rate < 0.0 {
            issues.push("adapted arrival rate must be non-negative".into());
        }
        issues
    }

    pub fn total_initial_mass(&self) -> f64 {
        self.group_a as f64 * self.initial_opinion[0] as f64
            + self.group_b as f64 * self.initial_opinion[1] as f64
    }
}

/// Assemble the full model. Group A occupies agent indices `0..group_a`,
/// group B the rest; the chain starts in stationarity.
pub fn build_opinion_spec(sc: &OpinionScenario) -> ModelSpec {
    let agents = sc.group_a + sc.group_b;
    let q = Matrix::from_rows(&[
        vec![-sc.normal_to_adapted, sc.normal_to_adapted],
        vec![sc.adapted_to_normal, -sc.adapted_to_normal],
    ]);
    let chain = BackgroundChain::in_stationarity(q).expect("two-state chain is irreducible");

    // Adapted-mode placements keep each group's mass internal.
    let within_a = 1.0 / sc.group_a as f64;
    let within_b = 1.0 / sc.group_b as f64;

    let kernels = (0..agents)
        .map(|i| {
            let in_group_a = i < sc.group_a;
            let normal = {
                let (to_a, to_b) = if in_group_a {
                    (sc.a_to_a, sc.a_to_b)
                } else {
                    (sc.b_to_a, sc.b_to_b)
                };
                let mut placement = vec![to_a; sc.group_a];
                placement.extend(std::iter::repeat_n(to_b, sc.group_b));
                OffspringDistribution::UnitMultinomialWithLeak(placement)
            };
            let adapted = if in_group_a {
                let mut placement = vec![within_a; sc.group_a];
                placement.extend(std::iter::repeat_n(0.0, sc.group_b));
                OffspringDistribution::Amplified {
                    double_prob: sc.double_prob,
                    placement,
                }
            } else {
                let mut placement = vec![0.0; sc.group_a];
                placement.extend(std::iter::repeat_n(within_b, sc.group_b));
                OffspringDistribution::UnitMultinomialWithLeak(placement)
            };
            vec![normal, adapted]
        })
        .collect();

    let arrivals = if sc.adapted_arrival_rate > 0.0 {
        (0..sc.group_a)
            .map(|i| ArrivalClass::new(vec![i], vec![0.0, sc.adapted_arrival_rate]))
            .collect()
    } else {
        Vec::new()
    };

    let mut initial = vec![sc.initial_opinion[0]; sc.group_a];
    initial.extend(std::iter::repeat_n(sc.initial_opinion[1], sc.group_b));

    ModelSpec::single_stream(
        agents,
        chain,
        arrivals,
        vec![sc.shock_rate, sc.shock_rate],
        kernels,
        initial,
    )
}

/// Mean dynamics of the four group-state aggregates
/// `(m_A_normal, m_A_adapted, m_B_normal, m_B_adapted)`: the reduction of the
/// full first-moment matrix onto the group-symmetric subspace.
pub fn opinion_reduced_matrix(sc: &OpinionScenario) -> Matrix {
    let ia = sc.group_a as f64;
    let ib = sc.group_b as f64;
    let g = sc.shock_rate;
    let (q12, q21) = (sc.normal_to_adapted, sc.adapted_to_normal);
    Matrix::from_rows(&[
        vec![
            -q12 + g * (ia * sc.a_to_a - 1.0),
            q21,
            g * ib * sc.b_to_a,
            0.0,
        ],
        vec![q12, -q21 + g * sc.double_prob, 0.0, 0.0],
        vec![
            g * ia * sc.a_to_b,
            0.0,
            -q12 + g * (ib * sc.b_to_b - 1.0),
            q21,
        ],
        vec![0.0, 0.0, q12, -q21],
    ])
}

/// Steady state of the conservation regime (no doubling, no reinforcement):
/// the null direction `(1, q12/q21, p_AB/p_BA, p_AB q12 / (p_BA q21))`
/// normalized so that total opinion mass equals `total_mass`.
pub fn opinion_steady_state(sc: &OpinionScenario, total_mass: f64) -> [f64; 4] {
    assert!(
        sc.double_prob == 0.0 && sc.adapted_arrival_rate == 0.0,
        "steady state requires the conservation regime"
    );
    let ratio_q = sc.normal_to_adapted / sc.adapted_to_normal;
    let ratio_p = sc.a_to_b / sc.b_to_a;
    let direction = [1.0, ratio_q, ratio_p, ratio_p * ratio_q];
    let mass = sc.group_a as f64 * (direction[0] + direction[1])
        + sc.group_b as f64 * (direction[2] + direction[3]);
    direction.map(|v| v * total_mass / mass)
}

/// Divide each stacked mean vector by the total opinion mass at that time.
/// Absolute opinion values lose meaning when mass grows without bound; the
/// normalized curves still converge.
pub fn relative_normalize(curves: &MomentCurves) -> Vec<Vec<f64>> {
    curves
        .means
        .iter()
        .map(|stacked| {
            let total: f64 = stacked.iter().sum();
            assert!(total > 0.0, "total opinion mass must stay positive");
            stacked.iter().map(|m| m / total).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use crate::moments::{stability, stacked_index, transient_means};
    use crate::numerics::spectral_abscissa;
    use approx::assert_abs_diff_eq;

    /// The base two-group configuration: 10 vs 30 agents, slow switching,
    /// conservation regime.
    fn base_scenario() -> OpinionScenario {
        OpinionScenario::from_attention_ratios(10, 30, 0.3, 0.2, 0.0, 0.0, 0.625, 2.0, 0.8, [1, 5])
    }

    #[test]
    fn attention_ratios_reproduce_expected_placements() {
        let sc = base_scenario();
        assert!(sc.check().is_empty());
        assert_abs_diff_eq!(sc.a_to_b, 1.0 / 90.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sc.b_to_a, 2.0 / 45.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sc.a_to_a, 1.0 / 15.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sc.b_to_b, 1.0 / 54.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sc.total_initial_mass(), 160.0);
    }

    #[test]
    fn built_spec_is_valid() {
        let spec = build_opinion_spec(&base_scenario());
        let report = validate(&spec);
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn conservation_regime_keeps_total_mass() {
        let spec = build_opinion_spec(&base_scenario());
        let curves = transient_means(&spec, 30.0, 0.01).unwrap();
        for idx in 0..curves.times.len() {
            assert_abs_diff_eq!(curves.total_mass_at(idx), 160.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn reinforcement_grows_total_mass() {
        let mut sc = base_scenario();
        sc.adapted_arrival_rate = 2.0;
        let spec = build_opinion_spec(&sc);
        let curves = transient_means(&spec, 10.0, 0.01).unwrap();
        let masses: Vec<f64> = (0..curves.times.len())
            .step_by(100)
            .map(|i| curves.total_mass_at(i))
            .collect();
        for pair in masses.windows(2) {
            assert!(pair[1] > pair[0], "mass should grow: {masses:?}");
        }
    }

    #[test]
    fn reduced_matrix_abscissa_matches_full_system() {
        for double_prob in [0.0, 0.1] {
            let mut sc = base_scenario();
            sc.double_prob = double_prob;
            let reduced = opinion_reduced_matrix(&sc);
            let reduced_abscissa = spectral_abscissa(&reduced).unwrap();
            let full = stability(&build_opinion_spec(&sc)).unwrap();
            assert_abs_diff_eq!(full.omega, reduced_abscissa, epsilon = 1e-7);
        }
    }

    #[test]
    fn conservation_regime_is_marginal() {
        let report = stability(&build_opinion_spec(&base_scenario())).unwrap();
        assert_abs_diff_eq!(report.omega, 0.0, epsilon = 1e-8);
        assert!(!report.ergodic_sufficient);
    }

    #[test]
    fn symmetric_parameters_give_uniform_direction() {
        let sc = OpinionScenario::from_attention_ratios(
            10,
            10,
            0.4,
            0.4,
            0.0,
            0.0,
            1.0,
            1.0,
            1.0,
            [2, 2],
        );
        // q12 = q21 and p_AB = p_BA: direction (1, 1, 1, 1).
        let steady = opinion_steady_state(&sc, 80.0);
        for v in steady {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn steady_state_direction_and_normalization() {
        let sc = base_scenario();
        let steady = opinion_steady_state(&sc, 160.0);
        let direction = [1.0, 1.5, 0.25, 0.375];
        let scale = steady[0] / direction[0];
        for (s, d) in steady.iter().zip(&direction) {
            assert_abs_diff_eq!(*s, d * scale, epsilon = 1e-12);
        }
        let mass = 10.0 * (steady[0] + steady[1]) + 30.0 * (steady[2] + steady[3]);
        assert_abs_diff_eq!(mass, 160.0, epsilon = 1e-10);
    }

    #[test]
    fn steady_state_annihilates_the_reduced_matrix() {
        let sc = base_scenario();
        let steady = opinion_steady_state(&sc, 160.0);
        let image = opinion_reduced_matrix(&sc).apply(&steady);
        for v in image {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn long_run_means_reach_the_steady_state() {
        let sc = base_scenario();
        let spec = build_opinion_spec(&sc);
        let curves = transient_means(&spec, 120.0, 0.01).unwrap();
        let last = curves.means.last().unwrap();
        let steady = opinion_steady_state(&sc, 160.0);
        // Group aggregates per state: any representative agent works since
        // groups are exchangeable.
        let d = 2;
        assert_abs_diff_eq!(last[stacked_index(0, 0, d)], steady[0], epsilon = 1e-4);
        assert_abs_diff_eq!(last[stacked_index(0, 1, d)], steady[1], epsilon = 1e-4);
        assert_abs_diff_eq!(last[stacked_index(10, 0, d)], steady[2], epsilon = 1e-4);
        assert_abs_diff_eq!(last[stacked_index(10, 1, d)], steady[3], epsilon = 1e-4);
    }

    #[test]
    fn longer_adapted_periods_share_the_group_steady_state() {
        // Raising the normal->adapted rate redistributes mass between the
        // per-state components but leaves the aggregated group means alone;
        // convergence just takes longer.
        let base = base_scenario();
        let mut longer = base_scenario();
        longer.normal_to_adapted = 1.0;
        let mut terminal = Vec::new();
        let mut midway_gap = Vec::new();
        for sc in [&base, &longer] {
            let spec = build_opinion_spec(sc);
            let curves = transient_means(&spec, 400.0, 0.01).unwrap();
            let last = curves.times.len() - 1;
            let limit = curves.agent_means_at(last, 40, 2);
            let mid = curves.agent_means_at(curves.closest_index(30.0), 40, 2);
            midway_gap.push((mid[0] - limit[0]).abs());
            terminal.push(limit);
        }
        // Slower approach with the higher switching rate.
        assert!(
            midway_gap[1] > midway_gap[0],
            "expected slower convergence: gaps {midway_gap:?}"
        );
        // Identical group-level steady states.
        assert_abs_diff_eq!(terminal[0][0], terminal[1][0], epsilon = 1e-3);
        assert_abs_diff_eq!(terminal[0][15], terminal[1][15], epsilon = 1e-3);
    }

    #[test]
    fn relative_curves_converge_while_raw_curves_grow() {
        let mut sc = base_scenario();
        sc.double_prob = 0.1;
        let spec = build_opinion_spec(&sc);
        let curves = transient_means(&spec, 60.0, 0.01).unwrap();
        let raw_last = curves.total_mass_at(curves.times.len() - 1);
        let raw_mid = curves.total_mass_at(curves.times.len() / 2);
        assert!(raw_last > raw_mid * 1.5, "raw mass should keep growing");
        let normalized = relative_normalize(&curves);
        let len = curves.times.len();
        // Successive-difference norm at late times.
        let successive: f64 = normalized[len - 1]
            .iter()
            .zip(&normalized[len - 2])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(successive < 1e-4, "successive difference {successive}");
        // Windowed settling: ten time units apart, the normalized curves
        // barely move while the raw mass keeps compounding.
        let windowed: f64 = normalized[len - 1]
            .iter()
            .zip(&normalized[len - 1000])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            windowed < 2e-3,
            "normalized curves still moving by {windowed}"
        );
    }

    #[test]
    fn single_agent_normalization_is_constant_one() {
        let spec = crate::model::ModelSpec::single_stream(
            1,
            crate::model::BackgroundChain::with_fixed_start(Matrix::from_rows(&[vec![0.0]]), 0),
            vec![ArrivalClass::new(vec![0], vec![1.0])],
            vec![0.0],
            vec![vec![OffspringDistribution::Deterministic(vec![1])]],
            vec![3],
        );
        let curves = transient_means(&spec, 5.0, 0.1).unwrap();
        for row in relative_normalize(&curves) {
            assert_abs_diff_eq!(row[0], 1.0, epsilon = 1e-12);
        }
    }
}

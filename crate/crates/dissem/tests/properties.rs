//! Randomized invariants: matrix-exponential identities, abscissa shift
//! equivariance, kernel moment/pgf consistency, convolution mean identities,
//! and background-chain laws.

use proptest::prelude::*;

use dissem::kernels::{offspring_convolution, OffspringDistribution};
use dissem::model::BackgroundChain;
use dissem::numerics::{expm, spectral_abscissa, Matrix};

fn small_matrix(dim: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-scale..scale, dim * dim)
        .prop_map(move |entries| Matrix::from_fn(dim, dim, |i, j| entries[i * dim + j]))
}

// Random placement vector with total mass at most one (leak possible).
fn placement(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..1.0f64, dim).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        let scale = if total > 0.0 {
            0.9 / total.max(1.0)
        } else {
            0.0
        };
        raw.into_iter().map(|p| p * scale).collect()
    })
}

// Random irreducible generator: strictly positive off-diagonals.
fn generator(dim: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(0.05..2.0f64, dim * dim).prop_map(move |rates| {
        Matrix::from_fn(dim, dim, |i, j| {
            if i == j {
                -(0..dim)
                    .filter(|&l| l != i)
                    .map(|l| rates[i * dim + l])
                    .sum::<f64>()
            } else {
                rates[i * dim + j]
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_times_expm_of_negation_is_identity(a in small_matrix(3, 3.0)) {
        let product = expm(&a).matmul(&expm(&a.scale(-1.0)));
        let eye = Matrix::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((product[(i, j)] - eye[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn expm_semigroup(a in small_matrix(3, 2.0), s in 0.1..2.0f64, t in 0.1..2.0f64) {
        let joint = expm(&a.scale(s + t));
        let split = expm(&a.scale(s)).matmul(&expm(&a.scale(t)));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((joint[(i, j)] - split[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn abscissa_shift_equivariance(a in small_matrix(4, 2.0), c in -3.0..3.0f64) {
        let base = spectral_abscissa(&a).unwrap();
        let shifted = spectral_abscissa(&a.add(&Matrix::identity(4).scale(c))).unwrap();
        prop_assert!((shifted - (base + c)).abs() < 1e-8);
    }

    #[test]
    fn unit_multinomial_mean_is_the_placement(p in placement(3)) {
        let kernel = OffspringDistribution::UnitMultinomialWithLeak(p.clone());
        let mean = kernel.mean_vector();
        for (m, expected) in mean.iter().zip(&p) {
            prop_assert!((m - expected).abs() < 1e-14);
        }
        // And the pgf at the all-ones point is exactly one.
        let total = kernel.pgf(&[1.0; 3]).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplified_moments_track_the_pgf(
        p in placement(2),
        alpha in 0.0..1.0f64,
    ) {
        let kernel = OffspringDistribution::Amplified {
            double_prob: alpha,
            placement: p,
        };
        // Mean from one-sided finite differences of the pgf at z = 1.
        let h = 1e-6;
        for j in 0..2 {
            let mut z = vec![1.0; 2];
            let f0 = kernel.pgf(&z).unwrap();
            z[j] = 1.0 - h;
            let f1 = kernel.pgf(&z).unwrap();
            z[j] = 1.0 - 2.0 * h;
            let f2 = kernel.pgf(&z).unwrap();
            let derivative = (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h);
            prop_assert!((derivative - kernel.mean_vector()[j]).abs() < 1e-5);
        }
    }

    #[test]
    fn convolution_mean_scales_with_count(
        p in placement(2),
        count in 0usize..6,
    ) {
        let kernel = OffspringDistribution::UnitMultinomialWithLeak(p);
        let law = offspring_convolution(&kernel, count, &[12, 12]);
        prop_assert!(law.overflow() < 1e-12);
        let mean = law.mean();
        let single = kernel.mean_vector();
        for j in 0..2 {
            prop_assert!((mean[j] - count as f64 * single[j]).abs() < 1e-10);
        }
        prop_assert!((law.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stationary_distribution_survives_rescaling(q in generator(3), c in 0.1..10.0f64) {
        let base = BackgroundChain::with_fixed_start(q.clone(), 0)
            .stationary_distribution()
            .unwrap();
        let scaled = BackgroundChain::with_fixed_start(q.scale(c), 0)
            .stationary_distribution()
            .unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transient_distribution_semigroup(q in generator(3), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let chain = BackgroundChain::with_fixed_start(q, 1);
        let direct = chain.transient_distribution(s + t);
        let stepped = chain.transient_from(&chain.transient_distribution(s), t);
        for (a, b) in direct.iter().zip(&stepped) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

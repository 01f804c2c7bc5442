//! Offspring (redistribution) kernels: the joint law of how one wealth unit
//! of a given agent is split across destination agents when a shock fires.
//!
//! Every variant carries exact first and mixed second moments alongside its
//! sampler, so the moment engines never have to estimate anything, and a
//! finite-support view used by the convolution machinery behind the
//! master-equation oracle.

use rand::Rng;
use thiserror::Error;

use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("pgf argument out of domain: |z[{index}]| = {value} > 1")]
    PgfDomain { index: usize, value: f64 },
}

/// Joint distribution of the destination vector for a single wealth unit.
///
/// Dependence across destination coordinates is first-class: a unit placed at
/// agent 2 is a different joint outcome from a unit placed at agent 3, never
/// a product of independent per-coordinate laws.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringDistribution {
    /// The unit always produces exactly this destination vector.
    Deterministic(Vec<u32>),
    /// One unit lands at agent `j` with probability `p[j]`; with probability
    /// `1 - sum(p)` it leaves the system.
    UnitMultinomialWithLeak(Vec<f64>),
    /// With probability `double_prob` the unit becomes two units, each placed
    /// independently by the inner unit-multinomial `placement`; otherwise a
    /// single placement happens.
    Amplified {
        double_prob: f64,
        placement: Vec<f64>,
    },
    /// Arbitrary finite-support joint law: pairs of (destination vector,
    /// probability) summing to one.
    FiniteTable(Vec<(Vec<u32>, f64)>),
}

impl OffspringDistribution {
    /// Number of destination agents this kernel addresses.
    pub fn dimension(&self) -> usize {
        match self {
            Self::Deterministic(v) => v.len(),
            Self::UnitMultinomialWithLeak(p) => p.len(),
            Self::Amplified { placement, .. } => placement.len(),
            Self::FiniteTable(rows) => rows.first().map_or(0, |(v, _)| v.len()),
        }
    }

    /// Validation messages; empty when the kernel is well formed.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        match self {
            Self::Deterministic(_) => {}
            Self::UnitMultinomialWithLeak(p) => {
                check_placement(p, &mut issues);
            }
            Self::Amplified {
                double_prob,
                placement,
            } => {
                if !(0.0..=1.0).contains(double_prob) {
                    issues.push(format!(
                        "amplification probability {double_prob} outside [0, 1]"
                    ));
                }
                check_placement(placement, &mut issues);
            }
            Self::FiniteTable(rows) => {
                if rows.is_empty() {
                    issues.push("finite table has empty support".into());
                }
                let dim = self.dimension();
                let mut total = 0.0;
                for (i, (v, p)) in rows.iter().enumerate() {
                    if v.len() != dim {
                        issues.push(format!("support vector {i} has mismatched dimension"));
                    }
                    if !(0.0..=1.0).contains(p) {
                        issues.push(format!("support probability {i} = {p} outside [0, 1]"));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-12 {
                    issues.push(format!("finite table probabilities sum to {total}, not 1"));
                }
            }
        }
        issues
    }

    /// Draw one destination vector, adding the offspring counts onto `acc`.
    /// Consumes a bounded number of uniform draws (at most three).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, acc: &mut [u64]) {
        match self {
            Self::Deterministic(v) => {
                for (a, &units) in acc.iter_mut().zip(v) {
                    *a += u64::from(units);
                }
            }
            Self::UnitMultinomialWithLeak(p) => {
                place_unit(p, rng.gen::<f64>(), acc);
            }
            Self::Amplified {
                double_prob,
                placement,
            } => {
                if rng.gen::<f64>() < *double_prob {
                    place_unit(placement, rng.gen::<f64>(), acc);
                    place_unit(placement, rng.gen::<f64>(), acc);
                } else {
                    place_unit(placement, rng.gen::<f64>(), acc);
                }
            }
            Self::FiniteTable(rows) => {
                let mut u = rng.gen::<f64>();
                for (v, p) in rows {
                    if u < *p {
                        for (a, &units) in acc.iter_mut().zip(v) {
                            *a += u64::from(units);
                        }
                        return;
                    }
                    u -= p;
                }
                // Tie-break numerical slack onto the last outcome.
                if let Some((v, _)) = rows.last() {
                    for (a, &units) in acc.iter_mut().zip(v) {
                        *a += u64::from(units);
                    }
                }
            }
        }
    }

    /// Draw one destination vector as a fresh allocation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut out = vec![0; self.dimension()];
        self.sample_into(rng, &mut out);
        out
    }

    /// Exact expectation of the destination vector, computed analytically.
    pub fn mean_vector(&self) -> Vec<f64> {
        match self {
            Self::Deterministic(v) => v.iter().map(|&x| f64::from(x)).collect(),
            Self::UnitMultinomialWithLeak(p) => p.clone(),
            Self::Amplified {
                double_prob,
                placement,
            } => placement.iter().map(|&p| (1.0 + double_prob) * p).collect(),
            Self::FiniteTable(rows) => {
                let dim = self.dimension();
                let mut mean = vec![0.0; dim];
                for (v, p) in rows {
                    for (m, &x) in mean.iter_mut().zip(v) {
                        *m += p * f64::from(x);
                    }
                }
                mean
            }
        }
    }

    /// Exact mixed second moments: entry `(j, j')` holds `E[W_j W_j']` for
    /// `j != j'` and the reduced moment `E[W_j (W_j - 1)]` on the diagonal.
    pub fn second_moment_table(&self) -> Matrix {
        let dim = self.dimension();
        match self {
            Self::Deterministic(v) => Matrix::from_fn(dim, dim, |j, jp| {
                let (a, b) = (f64::from(v[j]), f64::from(v[jp]));
                if j == jp {
                    a * (a - 1.0)
                } else {
                    a * b
                }
            }),
            // A single unit can never occupy two slots, and W_j is 0/1.
            Self::UnitMultinomialWithLeak(_) => Matrix::zeros(dim, dim),
            Self::Amplified {
                double_prob,
                placement,
            } => Matrix::from_fn(dim, dim, |j, jp| {
                2.0 * double_prob * placement[j] * placement[jp]
            }),
            Self::FiniteTable(rows) => Matrix::from_fn(dim, dim, |j, jp| {
                rows.iter()
                    .map(|(v, p)| {
                        let (a, b) = (f64::from(v[j]), f64::from(v[jp]));
                        if j == jp {
                            p * a * (a - 1.0)
                        } else {
                            p * a * b
                        }
                    })
                    .sum()
            }),
        }
    }

    /// Probability generating function `E[prod_j z_j^{W_j}]` for
    /// `max |z_j| <= 1`.
    pub fn pgf(&self, z: &[f64]) -> Result<f64, KernelError> {
        assert_eq!(z.len(), self.dimension(), "pgf argument dimension mismatch");
        for (index, &value) in z.iter().enumerate() {
            if value.abs() > 1.0 + 1e-15 {
                return Err(KernelError::PgfDomain {
                    index,
                    value: value.abs(),
                });
            }
        }
        Ok(match self {
            Self::Deterministic(v) => z.iter().zip(v).map(|(&zi, &w)| zi.powi(w as i32)).product(),
            Self::UnitMultinomialWithLeak(p) => unit_pgf(p, z),
            Self::Amplified {
                double_prob,
                placement,
            } => {
                let g = unit_pgf(placement, z);
                (1.0 - double_prob) * g + double_prob * g * g
            }
            Self::FiniteTable(rows) => rows
                .iter()
                .map(|(v, p)| {
                    p * z
                        .iter()
                        .zip(v)
                        .map(|(&zi, &w)| zi.powi(w as i32))
                        .product::<f64>()
                })
                .sum(),
        })
    }

    /// Finite-support view: the full list of (destination vector, probability)
    /// outcomes. Used by the convolution machinery.
    pub fn support(&self) -> Vec<(Vec<u32>, f64)> {
        match self {
            Self::Deterministic(v) => vec![(v.clone(), 1.0)],
            Self::UnitMultinomialWithLeak(p) => unit_support(p, 1.0),
            Self::Amplified {
                double_prob,
                placement,
            } => {
                let single = unit_support(placement, 1.0 - double_prob);
                let one = unit_support(placement, 1.0);
                let mut out = single;
                // Two independent placements, each outcome pair merged.
                for (va, pa) in &one {
                    for (vb, pb) in &one {
                        let sum: Vec<u32> = va.iter().zip(vb).map(|(a, b)| a + b).collect();
                        merge_outcome(&mut out, sum, double_prob * pa * pb);
                    }
                }
                out
            }
            Self::FiniteTable(rows) => rows.clone(),
        }
    }
}

fn check_placement(p: &[f64], issues: &mut Vec<String>) {
    let mut total = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&pj) {
            issues.push(format!("placement probability [{j}] = {pj} outside [0, 1]"));
        }
        total += pj;
    }
    if total > 1.0 + 1e-12 {
        issues.push(format!("placement probabilities sum to {total} > 1"));
    }
}

// Inverse-CDF placement of a single unit; u is uniform on [0, 1).
fn place_unit(p: &[f64], mut u: f64, acc: &mut [u64]) {
    for (j, &pj) in p.iter().enumerate() {
        if u < pj {
            acc[j] += 1;
            return;
        }
        u -= pj;
    }
    // Remaining mass is the leak: unit leaves the system.
}

fn unit_pgf(p: &[f64], z: &[f64]) -> f64 {
    let leak = 1.0 - p.iter().sum::<f64>();
    leak + p.iter().zip(z).map(|(&pj, &zj)| pj * zj).sum::<f64>()
}

fn unit_support(p: &[f64], weight: f64) -> Vec<(Vec<u32>, f64)> {
    let dim = p.len();
    let leak = 1.0 - p.iter().sum::<f64>();
    let mut out = Vec::with_capacity(dim + 1);
    if leak > 0.0 {
        out.push((vec![0; dim], weight * leak));
    }
    for (j, &pj) in p.iter().enumerate() {
        if pj > 0.0 {
            let mut v = vec![0; dim];
            v[j] = 1;
            out.push((v, weight * pj));
        }
    }
    out
}

fn merge_outcome(rows: &mut Vec<(Vec<u32>, f64)>, v: Vec<u32>, p: f64) {
    if p == 0.0 {
        return;
    }
    if let Some((_, q)) = rows.iter_mut().find(|(existing, _)| *existing == v) {
        *q += p;
    } else {
        rows.push((v, p));
    }
}

/// Explicit probability table over capped destination vectors, with mass that
/// left the cap region accumulated in `overflow`.
#[derive(Debug, Clone)]
pub struct LatticeDistribution {
    cap: Vec<usize>,
    probs: Vec<f64>,
    overflow: f64,
}

impl LatticeDistribution {
    /// Point mass at the given vector. Panics if the point exceeds the cap.
    pub fn point_mass(cap: Vec<usize>, at: &[usize]) -> Self {
        let mut dist = LatticeDistribution {
            probs: vec![0.0; table_len(&cap)],
            cap,
            overflow: 0.0,
        };
        let idx = dist.index_of(at).expect("point mass outside cap");
        dist.probs[idx] = 1.0;
        dist
    }

    pub fn cap(&self) -> &[usize] {
        &self.cap
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dimension(&self) -> usize {
        self.cap.len()
    }

    /// Mixed-radix index of a lattice point, or `None` above the cap.
    pub fn index_of(&self, point: &[usize]) -> Option<usize> {
        debug_assert_eq!(point.len(), self.cap.len());
        let mut idx = 0;
        for (&x, &c) in point.iter().zip(&self.cap) {
            if x > c {
                return None;
            }
            idx = idx * (c + 1) + x;
        }
        Some(idx)
    }

    /// Lattice point for a mixed-radix index.
    pub fn point_of(&self, mut idx: usize) -> Vec<usize> {
        let mut point = vec![0; self.cap.len()];
        for i in (0..self.cap.len()).rev() {
            let base = self.cap[i] + 1;
            point[i] = idx % base;
            idx /= base;
        }
        point
    }

    pub fn probability_at(&self, point: &[usize]) -> f64 {
        self.index_of(point).map_or(0.0, |i| self.probs[i])
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.overflow
    }

    /// Mean vector of the in-cap portion of the law.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cap.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let point = self.point_of(idx);
            for (m, &x) in mean.iter_mut().zip(&point) {
                *m += p * x as f64;
            }
        }
        mean
    }

    /// Convolve with a finite-support law: the distribution of `X + W`.
    /// Mass exceeding the cap in any coordinate is routed to `overflow`.
    pub fn convolve_support(&self, support: &[(Vec<u32>, f64)]) -> Self {
        let mut out = LatticeDistribution {
            cap: self.cap.clone(),
            probs: vec![0.0; self.probs.len()],
            overflow: self.overflow,
        };
        for (idx, &mass) in self.probs.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let point = self.point_of(idx);
            for (shift, p) in support {
                let target: Vec<usize> = point
                    .iter()
                    .zip(shift)
                    .map(|(&x, &w)| x + w as usize)
                    .collect();
                match out.index_of(&target) {
                    Some(t) => out.probs[t] += mass * p,
                    None => out.overflow += mass * p,
                }
            }
        }
        out
    }

    /// Convolve two capped lattice laws (sum of independent vectors).
    pub fn convolve(&self, other: &LatticeDistribution) -> Self {
        debug_assert_eq!(self.cap, other.cap);
        let mut out = LatticeDistribution {
            cap: self.cap.clone(),
            probs: vec![0.0; self.probs.len()],
            // Overflow is absorbing under further convolution.
            overflow: self.overflow + other.overflow - self.overflow * other.overflow,
        };
        for (ia, &pa) in self.probs.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let point_a = self.point_of(ia);
            for (ib, &pb) in other.probs.iter().enumerate() {
                if pb == 0.0 {
                    continue;
                }
                let point_b = other.point_of(ib);
                let sum: Vec<usize> = point_a.iter().zip(&point_b).map(|(&a, &b)| a + b).collect();
                match out.index_of(&sum) {
                    Some(t) => out.probs[t] += pa * pb,
                    None => out.overflow += pa * pb,
                }
            }
        }
        out
    }
}

fn table_len(cap: &[usize]) -> usize {
    cap.iter().map(|&c| c + 1).product()
}

/// Exact law of the sum of `count` i.i.d. copies of `dist`, over the capped
/// lattice, by iterated convolution. Never samples.
pub fn offspring_convolution(
    dist: &OffspringDistribution,
    count: usize,
    cap: &[usize],
) -> LatticeDistribution {
    assert_eq!(dist.dimension(), cap.len(), "cap dimension mismatch");
    let support = dist.support();
    let zero = vec![0; cap.len()];
    let mut law = LatticeDistribution::point_mass(cap.to_vec(), &zero);
    for _ in 0..count {
        law = law.convolve_support(&support);
    }
    law
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_kernels() -> Vec<OffspringDistribution> {
        vec![
            OffspringDistribution::Deterministic(vec![0, 2, 1]),
            OffspringDistribution::UnitMultinomialWithLeak(vec![0.3, 0.25, 0.15]),
            OffspringDistribution::Amplified {
                double_prob: 0.4,
                placement: vec![0.5, 0.2, 0.1],
            },
            OffspringDistribution::FiniteTable(vec![
                (vec![1, 0, 0], 0.5),
                (vec![0, 2, 0], 0.3),
                (vec![0, 0, 0], 0.2),
            ]),
        ]
    }

    // One-sided finite differences of the pgf at z = 1 (the domain caps at 1,
    // so forward differences are unavailable). Richardson-extrapolated.
    fn pgf_grad_fd(dist: &OffspringDistribution, j: usize) -> f64 {
        let dim = dist.dimension();
        let g = |h: f64| {
            let mut z = vec![1.0; dim];
            z[j] = 1.0 - h;
            let f1 = dist.pgf(&z).unwrap();
            z[j] = 1.0 - 2.0 * h;
            let f2 = dist.pgf(&z).unwrap();
            let f0 = dist.pgf(&vec![1.0; dim]).unwrap();
            (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
        };
        g(1e-6)
    }

    fn pgf_second_fd(dist: &OffspringDistribution, j: usize, jp: usize) -> f64 {
        let dim = dist.dimension();
        let eval = |offsets: &[(usize, f64)]| {
            let mut z = vec![1.0; dim];
            for &(idx, dz) in offsets {
                z[idx] += dz;
            }
            dist.pgf(&z).unwrap()
        };
        let corner = |h: f64| {
            if j == jp {
                (eval(&[]) - 2.0 * eval(&[(j, -h)]) + eval(&[(j, -2.0 * h)])) / (h * h)
            } else {
                (eval(&[]) - eval(&[(j, -h)]) - eval(&[(jp, -h)]) + eval(&[(j, -h), (jp, -h)]))
                    / (h * h)
            }
        };
        // First-order one-sided stencil, Richardson-extrapolated to O(h^2).
        let h = 1e-4;
        2.0 * corner(h / 2.0) - corner(h)
    }

    #[test]
    fn pgf_at_one_is_one() {
        for dist in example_kernels() {
            let z = vec![1.0; dist.dimension()];
            assert_abs_diff_eq!(dist.pgf(&z).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn pgf_domain_violation() {
        let dist = OffspringDistribution::UnitMultinomialWithLeak(vec![0.5, 0.5]);
        assert!(dist.pgf(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn unit_multinomial_pgf_closed_form() {
        let p = vec![0.3, 0.25, 0.15];
        let dist = OffspringDistribution::UnitMultinomialWithLeak(p.clone());
        let z = vec![0.9, -0.5, 0.2];
        let expected = (1.0 - 0.7) + p[0] * z[0] + p[1] * z[1] + p[2] * z[2];
        assert_abs_diff_eq!(dist.pgf(&z).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn mean_matches_pgf_gradient() {
        for dist in example_kernels() {
            let mean = dist.mean_vector();
            for j in 0..dist.dimension() {
                assert_abs_diff_eq!(mean[j], pgf_grad_fd(&dist, j), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn second_moments_match_pgf_hessian() {
        for dist in example_kernels() {
            let table = dist.second_moment_table();
            for j in 0..dist.dimension() {
                for jp in 0..dist.dimension() {
                    assert_abs_diff_eq!(
                        table[(j, jp)],
                        pgf_second_fd(&dist, j, jp),
                        epsilon = 1e-4
                    );
                }
            }
        }
    }

    #[test]
    fn second_moment_table_is_symmetric() {
        for dist in example_kernels() {
            let table = dist.second_moment_table();
            for j in 0..dist.dimension() {
                for jp in 0..j {
                    assert_abs_diff_eq!(table[(j, jp)], table[(jp, j)], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn amplified_moments_closed_form() {
        let p = vec![0.5, 0.2, 0.1];
        let alpha = 0.4;
        let dist = OffspringDistribution::Amplified {
            double_prob: alpha,
            placement: p.clone(),
        };
        let mean = dist.mean_vector();
        for j in 0..3 {
            assert_abs_diff_eq!(mean[j], (1.0 + alpha) * p[j], epsilon = 1e-14);
        }
        let table = dist.second_moment_table();
        assert_abs_diff_eq!(table[(0, 0)], 2.0 * alpha * p[0] * p[0], epsilon = 1e-14);
        assert_abs_diff_eq!(table[(0, 1)], 2.0 * alpha * p[0] * p[1], epsilon = 1e-14);
    }

    #[test]
    fn deterministic_sampling_is_point_mass() {
        let dist = OffspringDistribution::Deterministic(vec![1, 0, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            assert_eq!(dist.sample(&mut rng), vec![1, 0, 3]);
        }
    }

    #[test]
    fn degenerate_multinomial_always_places_first() {
        let dist = OffspringDistribution::UnitMultinomialWithLeak(vec![1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(dist.sample(&mut rng), vec![1, 0]);
        }
    }

    #[test]
    fn empirical_moments_within_standard_errors() {
        let n = 100_000;
        for dist in example_kernels() {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let dim = dist.dimension();
            let mut sums = vec![0.0; dim];
            let mut sq = vec![0.0; dim];
            for _ in 0..n {
                let draw = dist.sample(&mut rng);
                for j in 0..dim {
                    sums[j] += draw[j] as f64;
                    sq[j] += (draw[j] as f64).powi(2);
                }
            }
            let mean = dist.mean_vector();
            let table = dist.second_moment_table();
            for j in 0..dim {
                let emp = sums[j] / n as f64;
                // Var(W_j) = E[W_j(W_j-1)] + E[W_j] - E[W_j]^2.
                let var = (table[(j, j)] + mean[j] - mean[j] * mean[j]).max(0.0);
                let se = (var / n as f64).sqrt();
                assert!(
                    (emp - mean[j]).abs() <= 5.0 * se + 1e-12,
                    "coordinate {j}: empirical {emp} vs {} (se {se})",
                    mean[j]
                );
                let _ = sq;
            }
        }
    }

    #[test]
    fn convolution_zero_copies_is_point_mass_at_origin() {
        let dist = OffspringDistribution::UnitMultinomialWithLeak(vec![0.5, 0.5]);
        let law = offspring_convolution(&dist, 0, &[4, 4]);
        assert_abs_diff_eq!(law.probability_at(&[0, 0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(law.overflow(), 0.0);
    }

    #[test]
    fn convolution_single_copy_is_the_law_itself() {
        let dist = OffspringDistribution::FiniteTable(vec![(vec![1, 0], 0.25), (vec![0, 1], 0.75)]);
        let law = offspring_convolution(&dist, 1, &[3, 3]);
        assert_abs_diff_eq!(law.probability_at(&[1, 0]), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(law.probability_at(&[0, 1]), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn convolution_two_unit_multinomials() {
        let dist = OffspringDistribution::UnitMultinomialWithLeak(vec![0.5, 0.5]);
        let law = offspring_convolution(&dist, 2, &[4, 4]);
        assert_abs_diff_eq!(law.probability_at(&[2, 0]), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(law.probability_at(&[1, 1]), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(law.probability_at(&[0, 2]), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(law.probability_at(&[0, 0]), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(law.overflow(), 0.0);
    }

    #[test]
    fn convolution_mean_is_count_times_mean() {
        let dist = OffspringDistribution::Amplified {
            double_prob: 0.3,
            placement: vec![0.4, 0.3],
        };
        let count = 5;
        let law = offspring_convolution(&dist, count, &[40, 40]);
        assert!(
            law.overflow() < 1e-15,
            "cap wide enough that nothing spills"
        );
        let mean = law.mean();
        let single = dist.mean_vector();
        for j in 0..2 {
            assert_abs_diff_eq!(mean[j], count as f64 * single[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn convolution_mass_is_conserved() {
        let dist = OffspringDistribution::Deterministic(vec![2, 1]);
        let law = offspring_convolution(&dist, 6, &[5, 5]);
        assert_abs_diff_eq!(law.total_mass(), 1.0, epsilon = 1e-12);
        assert!(law.overflow() > 0.9, "most mass exceeds the tight cap");
    }

    #[test]
    fn support_probabilities_sum_to_one() {
        for dist in example_kernels() {
            let total: f64 = dist.support().iter().map(|(_, p)| p).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }
}

//! File storage system: clients generate files at rate lambda, backups copy
//! every uncopied file to the storage unit at rate gamma. Refinements add a
//! faulty upload link (backups only run while the link is up) and storage
//! failures that lose all stored files.

use thiserror::Error;

use crate::kernels::OffspringDistribution;
use crate::model::{ArrivalClass, BackgroundChain, ModelSpec};
use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("variant {variant:?} needs {missing}")]
    MissingRates {
        variant: StorageVariant,
        missing: &'static str,
    },
    #[error("cost optimization needs positive lambda, t, kappa_B, kappa_NC")]
    BadOptimizationInputs,
    #[error("cost function returned a non-finite value at gamma = {gamma}")]
    NonFiniteCost { gamma: f64 },
}

/// Up/down dynamics of the client-to-storage link.
#[derive(Debug, Clone, Copy)]
pub struct LinkRates {
    /// Rate at which a working link breaks.
    pub outage: f64,
    /// Rate at which a broken link is repaired.
    pub repair: f64,
}

/// Parameters of the storage model family.
#[derive(Debug, Clone)]
pub struct StorageScenario {
    /// File creation rate of the aggregate client population.
    pub create_rate: f64,
    /// Backup rate.
    pub backup_rate: f64,
    /// Present for the faulty-link variants.
    pub link: Option<LinkRates>,
    /// Storage-unit failure rate, present for the failure variant.
    pub failure_rate: Option<f64>,
    /// Cost per unit of backup rate and time.
    pub cost_per_backup: f64,
    /// Cost per uncopied file.
    pub cost_per_uncopied: f64,
    /// Horizon of the cost optimization.
    pub horizon: f64,
}

impl StorageScenario {
    /// Basic variant without link or failure dynamics.
    pub fn basic(create_rate: f64, backup_rate: f64) -> Self {
        StorageScenario {
            create_rate,
            backup_rate,
            link: None,
            failure_rate: None,
            cost_per_backup: 0.0,
            cost_per_uncopied: 0.0,
            horizon: 0.0,
        }
    }

    pub fn with_costs(mut self, per_backup: f64, per_uncopied: f64, horizon: f64) -> Self {
        self.cost_per_backup = per_backup;
        self.cost_per_uncopied = per_uncopied;
        self.horizon = horizon;
        self
    }

    pub fn with_link(mut self, link: LinkRates) -> Self {
        self.link = Some(link);
        self
    }

    pub fn with_failures(mut self, failure_rate: f64) -> Self {
        self.failure_rate = Some(failure_rate);
        self
    }
}

/// Which storage model to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageVariant {
    /// Two agents (uncopied, stored), no modulation.
    Basic,
    /// Link up/down modulation; backups fire only while up.
    FaultyLink,
    /// Faulty link plus storage failures moving stored files to a lost pool.
    WithFailures,
}

/// All closed-form transient moments of the basic variant started empty.
#[derive(Debug, Clone, Copy)]
pub struct StorageMoments {
    pub m1: f64,
    pub m2: f64,
    pub v11: f64,
    pub v12: f64,
    pub v22: f64,
    pub var1: f64,
    pub var2: f64,
}

/// Evaluate the closed forms of the basic variant at time `t`:
/// `m1(t) = (lambda/gamma)(1 - e^{-gamma t})`, `m2(t) = lambda t - m1(t)`,
/// the three reduced second moments, and both variances.
pub fn storage_transient_closed_form(sc: &StorageScenario, t: f64) -> StorageMoments {
    assert!(sc.backup_rate > 0.0 && t >= 0.0);
    let lambda = sc.create_rate;
    let gamma = sc.backup_rate;
    let ratio = lambda / gamma;
    let decay = (-gamma * t).exp();
    let gt = gamma * t;

    let m1 = ratio * (1.0 - decay);
    let m2 = lambda * t - m1;
    let r2 = ratio * ratio;
    let v11 = r2 * (2.0 * (1.0 - decay) - 2.0 * gt * decay);
    let v12 = r2 * (gt * (1.0 + decay) + 2.0 * (decay - 1.0));
    let v22 = r2 * (2.0 * (1.0 - decay) + gt * gt - 2.0 * gt);
    let var1 =
        r2 * (-2.0 * gt * decay - decay * decay - (gamma / lambda) * decay + 1.0 + gamma / lambda);
    let var2 = r2
        * (-2.0 * gt * decay - decay * decay
            + (gamma / lambda) * decay
            + (gamma * gamma / lambda) * t
            + 1.0
            - gamma / lambda);
    StorageMoments {
        m1,
        m2,
        v11,
        v12,
        v22,
        var1,
        var2,
    }
}

/// Result of the backup-rate cost optimization.
#[derive(Debug, Clone, Copy)]
pub struct BackupOptimum {
    pub rate: f64,
    pub cost: f64,
    /// True when the optimum sits at the boundary `gamma = 0`.
    pub boundary: bool,
}

/// Minimize `F(gamma) = gamma t kappa_B + (lambda/gamma)(1 - e^{-gamma t})
/// kappa_NC` over `gamma >= 0`.
///
/// `F'(0) >= 0` is equivalent to `2 kappa_B >= lambda t kappa_NC`, in which
/// case the boundary is optimal. Otherwise the convex interior minimum is
/// bracketed by doubling and then located by golden-section search to
/// `1e-8` of the bracket width.
pub fn optimize_backup_rate(sc: &StorageScenario) -> Result<BackupOptimum, StorageError> {
    let lambda = sc.create_rate;
    let t = sc.horizon;
    let kappa_b = sc.cost_per_backup;
    let kappa_nc = sc.cost_per_uncopied;
    if lambda <= 0.0 || t <= 0.0 || kappa_b <= 0.0 || kappa_nc <= 0.0 {
        return Err(StorageError::BadOptimizationInputs);
    }

    let cost = |gamma: f64| -> f64 {
        if gamma == 0.0 {
            return lambda * t * kappa_nc;
        }
        gamma * t * kappa_b + lambda / gamma * (1.0 - (-gamma * t).exp()) * kappa_nc
    };
    let derivative = |gamma: f64| -> f64 {
        t * kappa_b
            + kappa_nc * lambda * (gamma * t * (-gamma * t).exp() - (1.0 - (-gamma * t).exp()))
                / (gamma * gamma)
    };

    if 2.0 * kappa_b >= lambda * t * kappa_nc {
        return Ok(BackupOptimum {
            rate: 0.0,
            cost: cost(0.0),
            boundary: true,
        });
    }

    // Bracket: F is convex with F'(0) < 0, so the first gamma with positive
    // slope closes the bracket. Growth is capped; coercivity guarantees
    // closure long before the cap.
    let mut hi = 1.0;
    let mut doublings = 0;
    while derivative(hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            break;
        }
    }
    if !cost(hi).is_finite() {
        return Err(StorageError::NonFiniteCost { gamma: hi });
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let tolerance = 1e-8 * hi;
    let (mut a, mut b) = (0.0f64, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = cost(x1);
    let mut f2 = cost(x2);
    while b - a > tolerance {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = cost(x2);
        }
        if !f1.is_finite() || !f2.is_finite() {
            return Err(StorageError::NonFiniteCost { gamma: x1 });
        }
    }
    let rate = 0.5 * (a + b);
    Ok(BackupOptimum {
        rate,
        cost: cost(rate),
        boundary: false,
    })
}

/// Assemble the requested storage model as a full spec.
///
/// Agent 0 holds uncopied files, agent 1 stored files, and (failure variant)
/// agent 2 lost files. Backups move agent-0 units to agent 1; failures move
/// agent-1 units to agent 2 as an independent second shock stream.
pub fn build_storage_spec(
    sc: &StorageScenario,
    variant: StorageVariant,
) -> Result<ModelSpec, StorageError> {
    let lambda = sc.create_rate;
    let gamma = sc.backup_rate;
    match variant {
        StorageVariant::Basic => {
            let chain = BackgroundChain::with_fixed_start(Matrix::from_rows(&[vec![0.0]]), 0);
            Ok(ModelSpec::single_stream(
                2,
                chain,
                vec![ArrivalClass::new(vec![0], vec![lambda])],
                vec![gamma],
                vec![
                    vec![OffspringDistribution::Deterministic(vec![0, 1])],
                    vec![OffspringDistribution::Deterministic(vec![0, 1])],
                ],
                vec![0, 0],
            ))
        }
        StorageVariant::FaultyLink => {
            let link = sc.link.ok_or(StorageError::MissingRates {
                variant,
                missing: "link rates",
            })?;
            let chain = link_chain(link);
            let to_store = |v: Vec<u32>| {
                vec![
                    OffspringDistribution::Deterministic(v.clone()),
                    OffspringDistribution::Deterministic(v),
                ]
            };
            Ok(ModelSpec::single_stream(
                2,
                chain,
                vec![ArrivalClass::new(vec![0], vec![lambda, lambda])],
                vec![gamma, 0.0],
                vec![to_store(vec![0, 1]), to_store(vec![0, 1])],
                vec![0, 0],
            ))
        }
        StorageVariant::WithFailures => {
            let link = sc.link.ok_or(StorageError::MissingRates {
                variant,
                missing: "link rates",
            })?;
            let failure_rate = sc.failure_rate.ok_or(StorageError::MissingRates {
                variant,
                missing: "failure rate",
            })?;
            let chain = link_chain(link);
            let per_state = |v: Vec<u32>| {
                vec![
                    OffspringDistribution::Deterministic(v.clone()),
                    OffspringDistribution::Deterministic(v),
                ]
            };
            let backup = crate::model::ShockStream {
                name: "backup".into(),
                rates: vec![gamma, 0.0],
                kernels: vec![
                    per_state(vec![0, 1, 0]),
                    per_state(vec![0, 1, 0]),
                    per_state(vec![0, 0, 1]),
                ],
            };
            let failure = crate::model::ShockStream {
                name: "failure".into(),
                rates: vec![failure_rate, failure_rate],
                kernels: vec![
                    per_state(vec![1, 0, 0]),
                    per_state(vec![0, 0, 1]),
                    per_state(vec![0, 0, 1]),
                ],
            };
            Ok(ModelSpec {
                agents: 3,
                chain,
                arrivals: vec![ArrivalClass::new(vec![0], vec![lambda, lambda])],
                shocks: vec![backup, failure],
                initial_wealth: vec![0, 0, 0],
            })
        }
    }
}

fn link_chain(link: LinkRates) -> BackgroundChain {
    // State 0: link up, state 1: link down. The system starts up.
    BackgroundChain::with_fixed_start(
        Matrix::from_rows(&[
            vec![-link.outage, link.outage],
            vec![link.repair, -link.repair],
        ]),
        0,
    )
}

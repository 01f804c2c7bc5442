//! Worked application scenarios: each builds a full [`crate::ModelSpec`]
//! from a handful of domain parameters and ships its own analytics
//! (closed forms, normal approximations, steady-state directions, cost
//! optimization).

mod opinion;
mod storage;
mod wealth;

pub use opinion::{
    build_opinion_spec, opinion_reduced_matrix, opinion_steady_state, relative_normalize,
    OpinionScenario,
};
pub use storage::{
    build_storage_spec, optimize_backup_rate, storage_transient_closed_form, BackupOptimum,
    LinkRates, StorageError, StorageMoments, StorageScenario, StorageVariant,
};
pub use wealth::{
    build_wealth_spec, poverty_count_distribution, poverty_pair_prob, poverty_threshold_prob,
    PovertyCount, WealthScenario,
};

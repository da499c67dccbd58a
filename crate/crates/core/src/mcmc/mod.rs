//! Heat-bath sampling of the disordered pinning measure, exact small-volume
//! references and the path observables.

mod chain;
mod diagnostics;
mod disorder;
mod estimate;
mod oracle;
mod truncnorm;

pub use chain::{ChainState, PinningModel, QuenchedParams};
pub use diagnostics::{
    bi_gradient_sup, box_diagnostics, contact_fractions, BoxDiagnostics, BoxThresholds,
};
pub use disorder::DisorderField;
pub use estimate::{
    coupling_path, integrate_over_h, monotonicity_violations, run_chain, Anchor, ChainConfig,
    ChainSummary, CouplingPathEstimate, Estimate, FreeEnergyCurve, HeightProfile, HeightSpec,
    MIN_BATCHES,
};
pub use oracle::{
    exact_partition, ks_critical, ks_one_sample, ks_two_sample, ExactSolution, OneSiteLaw,
    ORACLE_MAX_VOLUME,
};
pub use truncnorm::{standard_truncated, truncated_normal};

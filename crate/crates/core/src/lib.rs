//! Modularity landscape of the stochastic block model.
//!
//! The crate covers the full experimental pipeline: sparse block-model graph
//! generation and its mean-field (weighted) counterpart, partition algebra
//! (signatures against the planted partition, classification-error distance),
//! exact and incrementally maintained modularity, closed-form and enumerated
//! optima of the landscape functional over the signature polytope,
//! circulation-based transfer moves between signatures, and greedy / Markov
//! chain dynamics used to certify the overlap gap structure of the landscape.

pub mod assignment;
pub mod circulation;
pub mod dynamics;
pub mod error;
pub mod landscape;
pub mod modularity;
pub mod partition;
pub mod sbm;
pub mod verify;

pub use circulation::{
    balanced_max_descent, cycle_decompose, transfer_move, Circulation, CycleDecomposition,
};
pub use dynamics::{
    beta_rule, delta_prime, exact_gibbs, greedy_run, mcmc_run, mcmc_step, ogp_certificate,
    standard_probes, ChainConfig, ChainTrace, GibbsTable, Kernel, OgpParams, OgpReport, Region,
    TraceSample,
};
pub use error::{Error, Result};
pub use landscape::{
    empirical_h_sweep, far_bound, g_of_signature, grid_max_g, h_curve, max_g_closed_form,
    optimizer_signature, LandscapePoint, SignaturePolytopeSpec,
};
pub use modularity::{
    amalgamate_eta_fat, mean_field_prediction, modularity, robustness_gap, weighted_modularity,
    FatteningParams, ModularityBreakdown, MoveState,
};
pub use partition::{
    balanced_random_partition, decoy, distance, interpolated_partition, load_partition,
    random_partition, save_partition, signature, DistanceReport, OverlapTracker, Partition,
    Signature,
};
pub use sbm::{
    generate_sbm, load_graph, save_graph, BlockModelParams, Graph, WeightedBlockGraph,
};
pub use verify::{criterion, verify_suite, CriterionReport, VerifyLevel};

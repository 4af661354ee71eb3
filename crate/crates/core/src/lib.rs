//! Sequential sampling for selecting the top-m important nodes of a random
//! network.
//!
//! Nodes are ranked by the stationary probabilities of a random-walk Markov
//! chain whose transition matrix is built from pairwise interaction
//! parameters. The parameters are unknown; they are learned from Bernoulli
//! interaction samples under a Beta-Bernoulli posterior. Three allocation
//! policies decide which pair to sample next:
//!
//! * `EA`  — equal allocation, round-robin over pairs;
//! * `AOA` — variance-based myopic rule without sensitivity weights;
//! * `DAM` — dynamic allocation maximizing a tangent-inner-ball value
//!   function approximation built from posterior means, variances, and the
//!   sensitivities of the stationary probabilities.
//!
//! The [`experiment`] module runs seeded Monte Carlo replications of the
//! sample-allocate-select loop and estimates the probability of correct
//! selection (PCS) as a function of the sampling budget.

pub mod chain;
pub mod error;
pub mod experiment;
pub mod io;
pub mod pair;
pub mod policy;
pub mod posterior;
pub mod sensitivity;

pub use chain::{
    build_transition, stationary, stationary_derivatives, stationary_power, transition_derivative,
    InteractionVector, StationarySolution, TransitionDerivative, TransitionMatrix,
};
pub use error::{Error, Result};
pub use experiment::{
    estimate_pcs, make_truth_example1, make_truth_linear_gap, make_truth_uniform, run_replication,
    run_replication_traced, ExperimentConfig, InteractionTruth, PcsCell, PcsCurve,
    ReplicationOutcome, StepRecord, Workers,
};
pub use pair::Pair;
pub use policy::{
    aoa_next, dam_next, dam_vfa, ea_next, select_top_m, AllocationDecision, PolicyConfig,
    PolicyKind,
};
pub use posterior::{draw_observation, kl_beta_normal, NormalApprox, PosteriorState};
pub use sensitivity::{ball_radius_sq, comparison_moments, summarize, ComparisonMoments, PosteriorSummary};

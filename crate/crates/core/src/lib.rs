//! Exact (ε, δ) differential-privacy accounting for Horvitz–Thompson total
//! estimators under enumerable without-replacement sampling designs.
//!
//! The released value is Z = t̂(x, S) + b·W, where t̂ is the
//! Horvitz–Thompson estimator of a population total, S is a random sample
//! drawn by a fixed design, and W is Laplace(0, 1) noise (b = 0 releases
//! the estimate as is).  Randomness in S alone already gives the release a
//! nontrivial privacy profile; this crate computes that profile exactly
//! rather than by bound-chasing:
//!
//! - [`design`]: enumerable sampling designs and their inclusion
//!   probabilities up to third order.
//! - [`estimator`]: datasets with domain bounds, adjacency, and the atomic
//!   law of the estimator under a design.
//! - [`laplace_profile`]: exact δ(ε) for atomic laws and their Laplace
//!   mixtures, the density-ratio supremum, ε at a δ target, and profile
//!   curves maximized over adjacent pairs.
//! - [`calibrate`]: the smallest noise scale meeting a δ target.
//! - [`srs_binary`]: closed forms for simple random sampling on binary
//!   data, used as an independent cross-check of the generic path.
//! - [`gaussian_moments`]: conditional-on-selection moments of the
//!   estimator, the inputs a Gaussian-noise analysis would need.
//! - [`audit`]: Monte Carlo re-estimation of any δ value.
//! - [`cli`]: the `htdp` binary over JSON files.
//!
//! Everything is deterministic: fixed inputs (and, for audits, a fixed
//! seed) reproduce results bit for bit at any thread count.

pub mod audit;
pub mod calibrate;
pub mod cli;
pub mod design;
pub mod error;
pub mod estimator;
pub mod gaussian_moments;
pub mod laplace_profile;
pub mod srs_binary;

pub use audit::{mc_delta, McEstimate};
pub use calibrate::{calibrate_b, Calibration};
pub use design::{
    make_explicit_design, make_srs_design, Design, DesignSpec, InclusionProbs, PairMatrix,
    TripleProbs, WeightedSample,
};
pub use error::{Error, Result};
pub use estimator::{
    atom_distribution, ht_value, pairs_from_json, support_bounds, AdjacentPair, AdjacentPairSpec,
    AtomicDistribution, Dataset,
};
pub use gaussian_moments::{conditional_moments, ConditionalMoments, MomentEngine};
pub use laplace_profile::{
    delta, delta_discrete, delta_laplace, density_ratio_sup, epsilon_at_delta,
    extremal_pair_heuristic, extremal_pairs_all_units, log_density_ratio_sup, profile,
    Direction, LaplaceMixture, PrivacyProfile, ProfilePoint, Witness,
};
pub use srs_binary::{
    delta_srs_b0, epsilon_srs_b0, epsilon_srs_b0_delta0, hypergeom_atoms, SrsBinaryConfig,
};

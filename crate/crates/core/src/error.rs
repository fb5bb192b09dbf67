//! Crate-wide error type.
//!
//! Every variant carries the data needed to act on it programmatically, and
//! [`Error::kind`] returns a stable snake_case code that the CLI embeds in
//! its machine-readable error object.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("sample probability {p} at support index {index} is negative")]
    NegativeProbability { index: usize, p: f64 },

    #[error("support probabilities sum to {sum}, which is more than 1e-9 away from 1")]
    ProbabilitiesDoNotSumToOne { sum: f64 },

    #[error("duplicate sample {units:?} in design support")]
    DuplicateSample { units: Vec<usize> },

    #[error("unit {unit} appears more than once in a single sample")]
    DuplicateUnitInSample { unit: usize },

    #[error("unit {unit} is out of range for population size {n_pop}")]
    UnitOutOfRange { unit: usize, n_pop: usize },

    #[error("enumerating this design needs {required} samples, above the cap {cap}")]
    EnumerationTooLarge { required: u128, cap: u64 },

    #[error("sample size {n} is invalid for population size {n_pop}")]
    InvalidSampleSize { n: usize, n_pop: usize },

    #[error("population size must be at least 1")]
    EmptyPopulation,

    #[error("design support is empty after dropping zero-probability samples")]
    EmptySupport,

    #[error("dataset length {len} does not match population size {n_pop}")]
    DimensionMismatch { len: usize, n_pop: usize },

    #[error("bounds [{lo}, {hi}] are not ordered or not finite")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("x[{index}] = {value} lies outside the value bounds [{lo}, {hi}]")]
    ValueOutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dataset total {total} lies outside the total bounds [{lo}, {hi}]")]
    TotalOutOfRange { total: f64, lo: f64, hi: f64 },

    #[error("datasets are not adjacent at unit {i}: {detail}")]
    NotAdjacent { i: usize, detail: String },

    #[error("unit {unit} is in the sample but has zero inclusion probability")]
    ZeroInclusionProbabilityInSample { unit: usize },

    #[error("noise scale must be non-negative and finite, got {b}")]
    NegativeScale { b: f64 },

    #[error("noise scale is zero; use the noiseless (atomic) path")]
    ZeroScale,

    #[error("mixtures carry different noise scales {b_left} and {b_right}")]
    MismatchedScales { b_left: f64, b_right: f64 },

    #[error("epsilon must be non-negative and finite, got {eps}")]
    InvalidEpsilon { eps: f64 },

    #[error("delta target {delta} is outside its valid range")]
    InvalidDelta { delta: f64 },

    #[error("no adjacent pairs supplied")]
    EmptyPairList,

    #[error("the total bounds exclude every extremal candidate pair")]
    NoFeasiblePair,

    #[error("inclusion probability of unit {unit} is {pi}; conditional moments require 0 < pi < 1")]
    DegenerateInclusion { unit: usize, pi: f64 },

    #[error("trials must be at least {min}, got {trials}")]
    TooFewTrials { trials: u64, min: u64 },

    #[error("no noise scale at or below the cap {cap:e} meets the delta target")]
    Infeasible { cap: f64 },

    #[error("bad epsilon grid: {detail}")]
    BadGrid { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code for this error, used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeProbability { .. } => "negative_probability",
            Error::ProbabilitiesDoNotSumToOne { .. } => "probabilities_do_not_sum_to_one",
            Error::DuplicateSample { .. } => "duplicate_sample",
            Error::DuplicateUnitInSample { .. } => "duplicate_unit_in_sample",
            Error::UnitOutOfRange { .. } => "unit_out_of_range",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::InvalidSampleSize { .. } => "invalid_sample_size",
            Error::EmptyPopulation => "empty_population",
            Error::EmptySupport => "empty_support",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidBounds { .. } => "invalid_bounds",
            Error::ValueOutOfBounds { .. } => "value_out_of_bounds",
            Error::TotalOutOfRange { .. } => "total_out_of_range",
            Error::NotAdjacent { .. } => "not_adjacent",
            Error::ZeroInclusionProbabilityInSample { .. } => {
                "zero_inclusion_probability_in_sample"
            }
            Error::NegativeScale { .. } => "negative_scale",
            Error::ZeroScale => "zero_scale",
            Error::MismatchedScales { .. } => "mismatched_scales",
            Error::InvalidEpsilon { .. } => "invalid_epsilon",
            Error::InvalidDelta { .. } => "invalid_delta",
            Error::EmptyPairList => "empty_pair_list",
            Error::NoFeasiblePair => "no_feasible_pair",
            Error::DegenerateInclusion { .. } => "degenerate_inclusion",
            Error::TooFewTrials { .. } => "too_few_trials",
            Error::Infeasible { .. } => "infeasible",
            Error::BadGrid { .. } => "bad_grid",
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => "file_not_found",
            Error::Io(_) => "io",
            Error::Json(_) => "schema_violation",
        }
    }
}

//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node count must be at least 2, got {0}")]
    NodeCount(usize),

    #[error("invalid node pair ({i},{j}): require 1 <= i < j <= {n}")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("expected {expected} interaction parameters for n={n}, got {got}")]
    ParameterCount { n: usize, expected: usize, got: usize },

    #[error("interaction parameter for pair ({i},{j}) must lie in [0,1], got {value}")]
    ParameterRange { i: usize, j: usize, value: f64 },

    #[error("matrix is not a valid transition matrix: {0}")]
    InvalidTransitionMatrix(String),

    #[error("singular linear system while solving the stationary equations of {matrix}")]
    SingularSystem { matrix: String },

    #[error(
        "stationary residual {residual:.3e} exceeds tolerance {tolerance:.1e} for {matrix}"
    )]
    ResidualTooLarge {
        residual: f64,
        tolerance: f64,
        matrix: String,
    },

    #[error("power iteration did not converge within {max_iterations} iterations")]
    PowerIterationDiverged { max_iterations: usize },

    #[error("Beta parameters must satisfy alpha, beta >= 1, got ({alpha}, {beta})")]
    BetaParameters { alpha: f64, beta: f64 },

    #[error("KL quadrature did not converge for Beta({alpha}, {beta})")]
    KlQuadrature { alpha: f64, beta: f64 },

    #[error("subset size m must satisfy 1 <= m < n, got m={m} for n={n}")]
    InvalidSubsetSize { m: usize, n: usize },

    #[error("invalid ranked-index pair (k={k}, l={l}) for n={n}: require 1 <= k < l <= n")]
    InvalidRankPair { k: usize, l: usize, n: usize },

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error(
        "degenerate posterior summary: every admissible comparison has zero sensitivity variance"
    )]
    DegenerateState,

    #[error("could not generate a truth with separated stationary probabilities after {attempts} attempts")]
    TruthGeneration { attempts: usize },

    #[error("experiment configuration invalid: {0}")]
    Config(String),

    #[error("parse error at line {line}, key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad
    /// configuration or input files). The CLI maps these to exit code 3.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularSystem { .. }
            | Error::ResidualTooLarge { .. }
            | Error::PowerIterationDiverged { .. }
            | Error::KlQuadrature { .. }
            | Error::DegenerateState
            | Error::TruthGeneration { .. } => true,
            Error::Replication { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

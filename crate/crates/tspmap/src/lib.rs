//! Heat-map guided TSP solving.
//!
//! The crate is organized around a pipeline for arbitrarily large Euclidean
//! instances: sample fixed-size sub-graphs, rescale each into the unit square,
//! ask a [`heatmap::HeatMapProvider`] for per-edge probabilities, merge the sub
//! heat maps into one global map, and hand it to a Monte Carlo tree search that
//! explores compact k-opt actions over complete tours.

pub mod grid;
pub mod heatmap;
pub mod instance;
pub mod io;
pub mod mcts;
pub mod sampling;

pub use heatmap::{HeatMap, HeatMapProvider, SurrogateProvider, UniformProvider};
pub use instance::{seeded_rng, Instance, Tour};
pub use mcts::{Budget, Params, SolveOutcome};

/// Errors produced anywhere in the crate; file-format problems each get a
/// distinct variant so the CLI can report them precisely.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("instance must have at least {min} vertices, got {got}")]
    TooFewVertices { min: usize, got: usize },
    #[error("tour is not a permutation of 0..{n}")]
    InvalidTour { n: usize },
    #[error("brute force enumeration is limited to n <= 12, got n = {0}")]
    BruteForceTooLarge(usize),
    #[error("vertex index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("sub-graph size m = {m} exceeds instance size n = {n}")]
    SampleTooLarge { m: usize, n: usize },
    #[error("sampled vertices are coincident; unit-square conversion is undefined")]
    DegenerateSample,
    #[error("probability {0} outside [0,1]")]
    ProbabilityOutOfRange(f64),
    #[error("duplicate heat-map entry ({i},{j}) with conflicting values {a} and {b}")]
    ConflictingDuplicate { i: usize, j: usize, a: f64, b: f64 },
    #[error("malformed {kind} file: {msg}")]
    Malformed { kind: &'static str, msg: String },
    #[error("file declares {expected} coordinates but contains {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("non-finite value in input: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn malformed(kind: &'static str, msg: impl Into<String>) -> Error {
    Error::Malformed {
        kind,
        msg: msg.into(),
    }
}

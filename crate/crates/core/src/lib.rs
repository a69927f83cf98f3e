//! Query-counting laboratory for generalized sorting on comparison graphs.
//!
//! Sorting here means recovering a hidden total order over the vertices of a
//! known undirected graph when only vertex pairs joined by an edge may be
//! compared. The hidden order is promised to appear as a Hamiltonian path in
//! the graph, so sorting is always possible; the interesting quantity is how
//! few edge queries an algorithm needs.
//!
//! The crate ships two sorters plus the machinery to measure them:
//!
//! * [`leveled_sort::stochastic_sort`]: a leveled elimination sorter tuned
//!   for random graphs where every non-path pair is an edge independently
//!   with probability `p`.
//! * [`sparse_sort::sparse_generalized_sort`]: a worst-case sorter for
//!   arbitrary graphs that predicts edge orientations from average ranks over
//!   the linear extensions of everything learned so far.
//! * [`instance`]: seeded instance generation and the memoizing,
//!   query-counting comparison oracle both sorters run against.
//! * [`entropy`]: replay auditing of query traces against the
//!   one-bit-per-query information bound.
//! * [`harness`]: a reproducible experiment grid runner with CSV/JSON
//!   output, exposed through the `sortlab` command-line binary.

pub mod edge_partition;
pub mod entropy;
pub mod harness;
pub mod instance;
pub mod leveled_sort;
pub mod pexpr;
pub mod poset;
pub mod rng;
pub mod sparse_sort;

use instance::Vertex;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("forbidden comparison: ({u}, {v}) is not an edge")]
    ForbiddenComparison { u: Vertex, v: Vertex },
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),
    #[error("exact enumeration capped at {cap} vertices, got {n}")]
    CapacityExceeded { n: usize, cap: usize },
    #[error("directed pair ({u}, {v}) contradicts recorded knowledge")]
    Inconsistency { u: Vertex, v: Vertex },
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

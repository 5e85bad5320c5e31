use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("edge {edge} references unknown vertex `{vertex}`")]
    UnknownVertex { edge: usize, vertex: String },

    #[error("duplicate vertex name `{0}`")]
    DuplicateVertex(String),

    #[error("edge {edge}: length must be positive, got {length}")]
    NonPositiveLength { edge: usize, length: f64 },

    #[error("edge {edge}: an infinite edge must have exactly one endpoint")]
    InfiniteEdgeWithTwoEndpoints { edge: usize },

    #[error("edge {edge}: a finite edge needs a terminal vertex")]
    FiniteEdgeWithoutTerminal { edge: usize },

    #[error("graph is disconnected: vertex `{0}` is unreachable")]
    Disconnected(String),

    #[error("graph has no infinite edge")]
    NoInfiniteEdge,

    #[error("strict topology: vertex `{vertex}` has degree {degree} (need at least 3)")]
    LowDegree { vertex: String, degree: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("kernel not admissible: {0}")]
    Inadmissible(String),

    #[error("kernel support {support} is not resolved by grid spacing {h} (need support >= 2h)")]
    KernelUnresolved { support: f64, h: f64 },

    #[error("kernel matrix would hold {entries} entries (limit {limit})")]
    TooDense { entries: usize, limit: usize },

    #[error("explicit step dt={dt} exceeds the stability bound {bound}")]
    ExplicitUnstable { dt: f64, bound: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("run has no gradient records")]
    MissingGradient,

    #[error("edges {0} and {1} share a vertex")]
    AdjacentEdges(usize, usize),

    #[error("not enough samples: need {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("scenario {path}: {message}")]
    Scenario { path: PathBuf, message: String },

    #[error("comparison: {0}")]
    Compare(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

//! Local heat flow and nonlocal diffusion on metric graphs with infinite
//! edges: graph model, finite-volume and quadrature discretizations, time
//! steppers, large-time asymptotics and a scenario-driven experiment runner.

pub mod asymptotics;
pub mod check;
pub mod error;
pub mod experiments;
pub mod function;
pub mod graph;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod local;
pub mod nonlocal;
pub mod scenario;

pub use error::{Error, Result};
pub use function::GraphFunction;
pub use graph::{EdgeId, GraphPoint, GraphSpec, MetricGraph, Part, VertexId};
pub use grid::{Grid, GridSpec};
pub use kernels::{builtin_kernel, Kernel, KernelParams};

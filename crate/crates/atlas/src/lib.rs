//! Approximation of functions sampled on unknown low-dimensional manifolds
//! embedded in `R^D`.
//!
//! The pipeline has three layers:
//!
//! 1. **Charts** ([`chart`]): local coordinate systems built purely from
//!    squared Euclidean distances to a small "star" of data points (a center
//!    plus `d` anchors). No eigen-decomposition, no graph Laplacian; each
//!    chart maps its neighborhood into the cube `[-1,1]^d`.
//! 2. **Cube approximants** ([`bspline`], [`chebyshev`], backed by
//!    [`quadrature`]): scattered-data quasi-interpolants on `[-1,1]^d`,
//!    either shifted tensor B-splines or filtered Chebyshev projections.
//!    Both paths replace grid/integral functionals by quadrature weights
//!    solved from small minimum-norm moment systems on the scattered sites.
//! 3. **Evaluation**: direct evaluation, exact compilation to layered
//!    ReQU networks ([`network`]), pre-image solving and out-of-sample
//!    extension to a tubular neighborhood ([`extension`]).
//!
//! [`pipeline`] glues the layers together (atlas construction, per-chart
//! fitting, prediction, convergence studies) and backs the `atlas` binary.
//! [`manifold`] provides synthetic sampled manifolds for experiments.

pub mod bspline;
pub mod chart;
pub mod chebyshev;
pub mod cloud;
pub mod error;
pub mod extension;
pub mod manifold;
pub mod network;
pub mod pipeline;
pub mod quadrature;

pub(crate) mod linalg;

pub use cloud::PointCloud;
pub use error::AtlasError;

//! Riemannian geometry of spaces of immersed tori under a curvature-weighted
//! Sobolev metric: induced geometry on periodic grids, the metric and its
//! first variations, discrete geodesics and shape distances, empirical
//! Sobolev-inequality constants, and an `ℓ²` sequence-space testbed.

mod adjoint;
pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod grid;
pub mod inequalities;
pub mod io;
pub mod matching;
pub mod metric;
pub mod optim;
pub mod path;
mod precond;
pub mod sampler;
pub mod selftest;
pub mod seq_model;
pub mod surfaces;
pub mod variations;

pub use error::{Error, Result};
pub use geometry::InducedGeometry;
pub use grid::{Direction, GridImmersion, ParamGrid, TensorField, TensorType};
pub use metric::MetricConfig;
pub use path::DiscretePath;
pub use surfaces::SurfaceSpec;

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]
//! Globally consistent normal orientation for unoriented point clouds.
//!
//! The orientation is found by minimizing a smooth functional of the
//! generalized winding-number field sampled at the Voronoi vertices of the
//! cloud. The pieces are:
//!
//! - [`geometry`]: points, spherical normal parameterization, unit-box
//!   normalization, noise injection and analytic fixtures.
//! - [`voronoi`]: 3D Delaunay tetrahedralization on exact predicates, the
//!   dual Voronoi structure clipped to a scaled bounding box, and per-sample
//!   area weights.
//! - [`winding`]: point-cloud winding numbers and a triangle-mesh oracle.
//! - [`objective`]: the three-term objective and its analytic gradient.
//! - [`optimizer`]: L-BFGS with a strong-Wolfe line search and the
//!   orientation driver.
//! - [`metrics`]: truth percentage, angle RMSE, chamfer distance and
//!   winding histograms.
//! - [`pipeline`]: the end-to-end in-memory pipeline.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature; `std` adds data-parallel evaluation and wall-clock timing.

extern crate alloc;

mod error;
pub(crate) mod math;

pub mod geometry;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod pipeline;
pub mod voronoi;
pub mod winding;

pub use error::{Error, Result};
pub use geometry::{GroundTruthCloud, Point3, PointCloud, SphericalNormal};
pub use objective::{ObjectiveParams, ObjectiveState, ObjectiveValue};
pub use optimizer::{OptimizerConfig, OrientationTrace, TerminationReason};
pub use voronoi::{AreaWeights, TetComplex, VoronoiStructure};
pub use winding::WindingField;

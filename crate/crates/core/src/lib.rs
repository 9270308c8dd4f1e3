//! Watermarking of signed distance fields.
//!
//! A binary message is embedded into a signed distance field `F` by a small
//! deformation `D` that pushes the surface outward or inward inside each cell
//! of a spherical partition of directions. The watermarked field is
//! `G(x) = F(D⁻¹(x))`, evaluated with a batched Newton inversion and baked to a
//! standalone tricubic B-spline grid. Meshes extracted from `G`, even after
//! common distortions, carry the message: a verifier holding `F` and the
//! layout tags each vertex by the sign of `F` and decodes per partition or
//! runs a one-sided z-test.
//!
//! Module map:
//!
//! - [`field`]: scalar-field trait, analytic primitives, grid backend
//! - [`partition`]: spherical coordinates, partition layout and window
//! - [`embed`]: deformation, Newton inversion, watermarked field, baking
//! - [`surface`]: surface sampling, marching cubes, dual contouring
//! - [`verify`]: tagging, decoding, detection and alignment
//! - [`attack`]: mesh distortion suite
//! - [`metrics`]: Chamfer, point-to-surface and normal difference
//! - [`io`]: OBJ, PLY, FMGD grid files and layout secrets
//! - [`bench`]: reproducible evaluation scenarios

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod bench;
pub mod embed;
pub mod error;
pub mod field;
pub mod io;
pub mod mesh;
pub mod message;
pub mod metrics;
pub mod partition;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};

/// 3-vector in world coordinates.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix (Jacobians, Hessians).
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Version string embedded in every report.
pub const VERSION: &str = concat!("funcmark ", env!("CARGO_PKG_VERSION"));

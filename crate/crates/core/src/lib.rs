//! Matched forward and back projectors for 3D X-ray CT.
//!
//! The crate provides a linear operator `A` (and its exact transpose `Aᵀ`)
//! mapping a voxelized attenuation volume to line integrals, for
//! parallel-beam, axial cone-beam (flat or curved detector) and modular
//! scanners. Two discretizations are available: an exact ray/voxel
//! intersection-length model ([`siddon`]) and a separable-footprint model
//! ([`sf`]) that accounts for finite voxel and pixel extent.
//!
//! On top of the operator sit reference reconstructions ([`recon`]), an
//! analytic ellipsoid phantom used as a ground-truth oracle ([`phantom`]), a
//! matched projector pair for cylindrically symmetric objects ([`abel`]) and
//! the command-line front end ([`cli`]).
//!
//! Lengths are millimetres throughout, volumes hold attenuation in mm⁻¹ and
//! projections are dimensionless. Arrays are contiguous `f32`, volumes laid
//! out `[z][y][x]` and projections `[view][row][col]`.

pub mod abel;
pub mod alloc_tracker;
pub mod cli;
pub mod data;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod operator;
pub mod phantom;
pub mod real;
pub mod recon;
pub mod sf;
pub mod siddon;
pub mod vec3;

pub use data::{apply_mask, read_array, write_array, AngleMask, Array, ProjectionSet, Volume};
pub use error::{Error, Result};
pub use geometry::{
    parse_config, DetectorShape, DetectorSpec, Geometry, GeometryKind, ModularView, Ray, Scan, VolumeSpec,
};
pub use operator::{Batch, Model, ProjectorPair};
pub use phantom::{Ellipsoid, EllipsoidPhantom};
pub use vec3::Vec3;

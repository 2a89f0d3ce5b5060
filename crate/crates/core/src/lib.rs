//! Joint estimation of a high-resolution depth map, RGB albedo, per-frame
//! lighting and per-frame camera poses from one low-resolution depth map plus
//! `n` RGB frames captured by a moving RGB-D camera with an attached light
//! source.
//!
//! The crate is organised around the pipeline stages:
//!
//! * [`grid`] — image containers, masks and camera intrinsics
//! * [`pyramid`] — the multi-resolution pyramid shared by all stages
//! * [`se3`] — twist coordinates and the SE(3) exponential map
//! * [`geometry`] — perspective normals, reprojection, warping and Jacobians
//! * [`sampling`] — the downsampling operator `D`, its adjoint, bilinear
//!   interpolation and resizing
//! * [`photometry`] — spherical-harmonic shading, photometric residuals and
//!   the Cauchy robustifier with its IRLS weights
//! * [`solver`] — the coarse-to-fine block-coordinate IRLS driver
//! * [`synth`] — a procedural synthetic-scene renderer for end-to-end
//!   verification
//!
//! The crate is `no_std` compatible (`alloc` required); file formats and the
//! CLI live in the companion `mvps` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod grid;
pub mod photometry;
pub mod pyramid;
pub mod sampling;
pub mod se3;
pub mod solver;
pub mod synth;

pub use error::Error;
pub use grid::{CameraIntrinsics, ImageGrid};
pub use se3::TwistPose;

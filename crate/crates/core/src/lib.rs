//! Robust monocular pose estimation for known rigid objects.
//!
//! The pipeline takes 2D-3D landmark correspondences, initializes a pose with
//! P3P inside RANSAC ([`pnp`]), and refines it with annealed Huber
//! Levenberg-Marquardt ([`refine`]). Supporting modules reconstruct the
//! landmark model ([`triangulation`]), encode landmarks as heatmaps
//! ([`heatmap`]), score estimates ([`metrics`]), and run synthetic
//! benchmarks ([`bench`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod heatmap;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pnp;
pub mod refine;
pub mod triangulation;

pub use error::{Error, Result};
pub use geometry::{Camera, Correspondence, LandmarkSet, Pose, Quaternion};

//! Density-adaptive point matching and Gaussian dynamic convolution for cell counting.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`] – points, exact k-nearest-neighbour distances and the
//!   per-prediction adaptive search radius.
//! - [`assignment`] – a rectangular Hungarian (Kuhn–Munkres) solver.
//! - [`khm`] – K-adjacent Hungarian matching: adaptive radii, Gaussian
//!   weights, assignment and post-filtering, plus an exhaustive oracle.
//! - [`kernel`] – anisotropic Gaussian kernel synthesis, parameter squashing
//!   and analytic parameter gradients.
//! - [`mdgc`] – reference forward pass of the multi-scale deformable Gaussian
//!   convolution block and its residual channel attention.
//! - [`density`] – density map rendering, peak extraction and map file formats.
//! - [`eval`] – counting (MAE / RMSE) and localization metrics.
//! - [`synth`] – seeded synthetic scenes and prediction perturbation.
//! - [`io`] – integer coordinate files and evaluation manifests.
//! - [`cli`] – the `cellcount` command-line tool.
//!
//! Everything is a pure function over immutable inputs; values can be shared
//! across threads freely.

pub mod assignment;
pub mod cli;
pub mod density;
mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod khm;
pub mod mdgc;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{Label, Point, PointSet, RadiusProfile};
pub use khm::{khm_match, MatchConfig, MatchResult};

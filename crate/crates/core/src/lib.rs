//! Numerical laboratory for stochastic stability of partially hyperbolic
//! torus maps.
//!
//! The crate is organised bottom-up:
//!
//! - [`torus`]: the phase space T², linear Anosov maps, the
//!   derived-from-Anosov (DA) family and its numerical certificate;
//! - [`noise`]: additive uniform noise, per-worker RNG streams and random
//!   orbits of the skew product;
//! - [`cones`]: cone fields, tracked center-unstable/center-stable
//!   directions, domination and curvature diagnostics;
//! - [`hyperbolic`]: Pliss selection, hyperbolic times and their
//!   contraction/distortion payoffs;
//! - [`measures`]: histograms, the Ulam transfer operator, distances,
//!   basin clustering and the zero-noise experiments;
//! - [`fixtures`]: synthetic maps used to validate the estimators.
//!
//! Ensemble work is data parallel through [`par`]; every reduction is
//! performed in stream order so results do not depend on the worker count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cones;
pub mod error;
pub mod fixtures;
pub mod hyperbolic;
pub mod measures;
pub mod noise;
pub mod par;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
pub use noise::{NoiseModel, RandomOrbit, RngStream};
pub use torus::{make_da_map, DAParams, Dynamics, Mat2, TorusMap, TorusPoint, Vec2};

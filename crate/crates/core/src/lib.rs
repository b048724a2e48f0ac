//! Density-based (Fermat) distances.
//!
//! The length of a curve is measured with the conformal metric
//! `g_x(u, v) = <u, v> / p(x)^(2β)`, so short paths run through regions of
//! high probability density. This crate provides
//!
//! - density models with exact scores ([`density`]),
//! - path lengths, a relaxation solver for geodesics and ground-truth
//!   distances ([`geometry`]),
//! - density-weighted kNN graphs with log-space Dijkstra ([`graph`]),
//! - seeded benchmark distributions ([`datasets`]) and the evaluation studies
//!   built on them ([`experiments`]).
//!
//! All lengths are carried in the log domain.

pub mod datasets;
pub mod density;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod numerics;
pub mod points;

pub use error::{Error, Result};
pub use numerics::{LogScalar, Rng};
pub use points::Points;

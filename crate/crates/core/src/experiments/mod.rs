//! Experiment runners behind the command-line tool: configuration, the LPR
//! studies, the scaled-geodesic figure, the KDE bandwidth sweep and their
//! output formats.

pub mod cache;
pub mod config;
pub mod figure;
pub mod kde;
pub mod study;
pub mod table;

pub use cache::{Cache, CACHE_ENV};
pub use config::{BetaPolicy, ExperimentConfig, KdeSweep, Method, Runner};
pub use figure::{run_scaled_geodesic_figure, FigureTrack, ScaledFigure};
pub use kde::{run_kde_tradeoff, KdeTradeoff};
pub use study::{run_convergence, run_dimension_scaling};
pub use table::{Axis, ResultRow, ResultTable, RunMetadata};

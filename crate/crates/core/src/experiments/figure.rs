//! Standard-normal geodesics between orthogonal points at radius `√D`,
//! projected onto their plane and shrunk by `√D`, for `β = 1` and `β = 1/D`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{BetaPolicy, ExperimentConfig, Runner};
use crate::density::GaussianMixture;
use crate::error::Result;
use crate::geometry::{ground_truth_distance, GroundTruthQuality};
use crate::numerics::dist;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureTrack {
    pub dim: usize,
    pub beta_policy: BetaPolicy,
    pub beta: f64,
    pub log_distance: f64,
    /// `(x₁, x₂) / √D` for every path point.
    pub points: Vec<[f64; 2]>,
}

impl FigureTrack {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    /// Largest pointwise distance to `other`, as a fraction of this track's
    /// length. Both tracks must have the same number of points.
    pub fn deviation_from(&self, other: &FigureTrack) -> f64 {
        assert_eq!(self.points.len(), other.points.len(), "tracks of different resolution");
        let max = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        max / self.length()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaledFigure {
    pub tracks: Vec<FigureTrack>,
}

impl ScaledFigure {
    pub fn track(&self, dim: usize, policy: BetaPolicy) -> Option<&FigureTrack> {
        self.tracks.iter().find(|t| t.dim == dim && t.beta_policy == policy)
    }

    /// Deviation of every track of `policy` from the one of the smallest
    /// dimension, in dimension order.
    pub fn deviations(&self, policy: BetaPolicy) -> Vec<(usize, f64)> {
        let mut tracks: Vec<&FigureTrack> = self.tracks.iter().filter(|t| t.beta_policy == policy).collect();
        tracks.sort_by_key(|t| t.dim);
        let Some(first) = tracks.first() else {
            return Vec::new();
        };
        tracks.iter().map(|t| (t.dim, t.deviation_from(first))).collect()
    }

    /// One row per path point.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dim\tbeta_policy\tbeta\ti\tx\ty\n");
        for t in &self.tracks {
            for (i, p) in t.points.iter().enumerate() {
                writeln!(out, "{}\t{}\t{:.9e}\t{i}\t{:.9e}\t{:.9e}", t.dim, policy_name(t.beta_policy), t.beta, p[0], p[1])
                    .expect("writing to a string");
            }
        }
        out
    }

    /// Deviation of each track from the smallest dimension's, per policy.
    pub fn deviations_tsv(&self, policies: &[BetaPolicy]) -> String {
        let mut out = String::from("beta_policy\tdim\tlog_distance\trelative_deviation\n");
        for &p in policies {
            for (dim, dev) in self.deviations(p) {
                let ld = self.track(dim, p).map_or(f64::NAN, |t| t.log_distance);
                writeln!(out, "{}\t{dim}\t{ld:.9e}\t{dev:.9e}", policy_name(p)).expect("writing to a string");
            }
        }
        out
    }
}

fn policy_name(p: BetaPolicy) -> String {
    match p {
        BetaPolicy::Fixed(b) => format!("fixed:{b}"),
        BetaPolicy::Scaled => "scaled".into(),
    }
}

/// Geodesics for every dimension in `figure_dimensions` and every β policy.
pub fn run_scaled_geodesic_figure(config: &ExperimentConfig) -> Result<ScaledFigure> {
    config.validate(Runner::ScaledFig)?;
    let mut figure = ScaledFigure::default();
    for &dim in &config.figure_dimensions {
        let model = GaussianMixture::standard_normal(dim);
        let r = (dim as f64).sqrt();
        let mut x1 = vec![0.0; dim];
        let mut x2 = vec![0.0; dim];
        x1[0] = r;
        x2[1] = r;
        for &policy in &config.beta {
            let params = policy.params(dim)?;
            let quality = GroundTruthQuality {
                n_points: config.gt_n_points,
                segments_per_edge: config.gt_segments_per_edge,
                tol_factor: config.tol_factor,
                seed: config.seed,
            };
            let gt = ground_truth_distance(&x1, &x2, &model, params, &quality, None)?;
            let points = gt
                .geodesic
                .points()
                .rows()
                .map(|p| [p[0] / r, p[1] / r])
                .collect();
            figure.tracks.push(FigureTrack {
                dim,
                beta_policy: policy,
                beta: params.beta(),
                log_distance: gt.log_distance.ln(),
                points,
            });
        }
    }
    Ok(figure)
}

//! Bandwidth sweep of a 1D Gaussian KDE: integrated squared error of the log
//! density and of the score against the standard normal, weighted by the
//! true density.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Runner};
use super::study::grid_seed;
use crate::datasets::DatasetKind;
use crate::density::{DensityModel, GaussianMixture, KdeModel, ScoreFunction};
use crate::error::Result;
use crate::numerics::{simpson, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeTradeoff {
    pub bandwidths: Vec<f64>,
    pub log_density_mise: Vec<f64>,
    pub score_mise: Vec<f64>,
    /// Error of the score estimate that is identically zero.
    pub zero_score_mise: f64,
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len())
        .min_by(|&a, &b| v[a].total_cmp(&v[b]))
        .expect("non-empty sweep")
}

/// Minimum strictly inside the sweep, with the curve falling to it and rising
/// after it.
fn u_shaped(v: &[f64]) -> bool {
    let i = argmin(v);
    i > 0 && i + 1 < v.len() && v[..=i].windows(2).all(|w| w[1] <= w[0]) && v[i..].windows(2).all(|w| w[1] >= w[0])
}

impl KdeTradeoff {
    pub fn argmin_log_density(&self) -> f64 {
        self.bandwidths[argmin(&self.log_density_mise)]
    }

    pub fn argmin_score(&self) -> f64 {
        self.bandwidths[argmin(&self.score_mise)]
    }

    pub fn log_density_u_shaped(&self) -> bool {
        u_shaped(&self.log_density_mise)
    }

    pub fn score_u_shaped(&self) -> bool {
        u_shaped(&self.score_mise)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bandwidth\tmise_log_density\tmise_score\n");
        for i in 0..self.bandwidths.len() {
            writeln!(
                out,
                "{:.9e}\t{:.9e}\t{:.9e}",
                self.bandwidths[i], self.log_density_mise[i], self.score_mise[i]
            )
            .expect("writing to a string");
        }
        out
    }

    /// Argmins, U-shape flags and the oversmoothing limit.
    pub fn summary_tsv(&self) -> String {
        format!(
            "quantity\tvalue\nargmin_log_density\t{:.9e}\nargmin_score\t{:.9e}\nlog_density_u_shaped\t{}\nscore_u_shaped\t{}\nzero_score_mise\t{:.9e}\n",
            self.argmin_log_density(),
            self.argmin_score(),
            self.log_density_u_shaped(),
            self.score_u_shaped(),
            self.zero_score_mise
        )
    }
}

/// Composite Simpson over equally spaced samples (an odd count).
fn tabulated_simpson(v: &[f64], step: f64) -> f64 {
    let last = v.len() - 1;
    let inner: f64 = (1..last).map(|i| if i % 2 == 1 { 4.0 * v[i] } else { 2.0 * v[i] }).sum();
    step / 3.0 * (v[0] + inner + v[last])
}

pub fn run_kde_tradeoff(config: &ExperimentConfig) -> Result<KdeTradeoff> {
    config.validate(Runner::Kde)?;
    let sweep = &config.kde;
    let truth = GaussianMixture::standard_normal(1);
    let kind = DatasetKind::StandardNormal { dim: 1 };
    let samples = truth.sample(sweep.samples, &mut Rng::new(grid_seed(config.seed, &kind, sweep.samples)));
    let (lo, hi, m) = (sweep.lower, sweep.upper, sweep.quadrature_intervals);
    let weight = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let bandwidths = sweep.grid();
    let curves: Vec<(f64, f64)> = bandwidths
        .par_iter()
        .map(|&h| -> Result<(f64, f64)> {
            let kde = KdeModel::new(samples.clone(), h)?;
            // tabulate once, then integrate both errors
            let xs: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
            let mut log_err = Vec::with_capacity(xs.len());
            let mut score_err = Vec::with_capacity(xs.len());
            let mut s = [0.0];
            for &x in &xs {
                let lp = kde.log_density(&[x])?;
                kde.score_into(&[x], &mut s)?;
                let w = weight(x);
                log_err.push(w * (lp + 0.5 * x * x + 0.5 * (2.0 * std::f64::consts::PI).ln()).powi(2));
                score_err.push(w * (s[0] + x).powi(2));
            }
            let step = (hi - lo) / m as f64;
            Ok((tabulated_simpson(&log_err, step), tabulated_simpson(&score_err, step)))
        })
        .collect::<Result<_>>()?;
    Ok(KdeTradeoff {
        bandwidths,
        log_density_mise: curves.iter().map(|c| c.0).collect(),
        score_mise: curves.iter().map(|c| c.1).collect(),
        zero_score_mise: simpson(|x| weight(x) * x * x, lo, hi, m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_simpson_matches_the_closure_form() {
        let xs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        assert!((tabulated_simpson(&v, 0.1) - simpson(f64::sin, 0.0, 4.0, 40)).abs() < 1e-14);
    }

    #[test]
    fn u_shape_detection() {
        assert!(u_shaped(&[3.0, 2.0, 1.0, 2.0]));
        assert!(!u_shaped(&[1.0, 2.0, 3.0]));
        assert!(!u_shaped(&[3.0, 2.0, 1.0]));
        assert!(!u_shaped(&[3.0, 1.0, 2.0, 1.5, 4.0]));
    }

    #[test]
    fn oversmoothing_approaches_the_zero_score() {
        let mut c = ExperimentConfig::default_for(Runner::Kde);
        c.kde.min_bandwidth = 0.1;
        c.kde.max_bandwidth = 100.0;
        c.kde.bandwidths = 7;
        let t = run_kde_tradeoff(&c).unwrap();
        let last = *t.score_mise.last().unwrap();
        assert!((last - t.zero_score_mise).abs() < 0.01 * t.zero_score_mise, "{last} vs {}", t.zero_score_mise);
        // ∫ x² φ(x) dx over [-5, 5]
        assert!((t.zero_score_mise - 0.99994).abs() < 1e-4);
    }
}

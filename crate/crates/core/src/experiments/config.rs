//! Experiment configuration. A TOML document is overlaid key by key on the
//! defaults of the runner it is meant for, so a config file only needs the
//! settings it changes.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datasets::DatasetKind;
use crate::error::{Error, Result};
use crate::geometry::MetricParams;
use crate::graph::NnKind;

/// A way of producing a path between two data points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Graph with `‖Δ‖^(βd + 1)` edges.
    Power,
    /// Graph with edges integrated under the reference density.
    DensityGt,
    /// Graph with edges integrated under a mixture fitted to the sample.
    DensityFitted,
    /// Graph with nearest-neighbor density estimates merged at the endpoints.
    NnVariant(NnKind),
    /// As `NnVariant`, merging reference densities instead.
    EndpointGt(NnKind),
    /// Relaxation driven by the reference score, started from the
    /// `density_gt` graph path.
    RelaxExactScore,
    /// Relaxation driven by a KDE score, started from the `power` graph path.
    RelaxKdeScore,
}

impl Method {
    pub fn is_graph(self) -> bool {
        !matches!(self, Method::RelaxExactScore | Method::RelaxKdeScore)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Power => f.write_str("power"),
            Method::DensityGt => f.write_str("density_gt"),
            Method::DensityFitted => f.write_str("density_fitted"),
            Method::NnVariant(k) => write!(f, "nn_variant:{k}"),
            Method::EndpointGt(k) => write!(f, "endpoint_gt:{k}"),
            Method::RelaxExactScore => f.write_str("relax_exact_score"),
            Method::RelaxKdeScore => f.write_str("relax_kde_score"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(kind) = s.strip_prefix("nn_variant:") {
            return Ok(Method::NnVariant(kind.parse()?));
        }
        if let Some(kind) = s.strip_prefix("endpoint_gt:") {
            return Ok(Method::EndpointGt(kind.parse()?));
        }
        match s {
            "power" => Ok(Method::Power),
            "density_gt" => Ok(Method::DensityGt),
            "density_fitted" => Ok(Method::DensityFitted),
            "relax_exact_score" => Ok(Method::RelaxExactScore),
            "relax_kde_score" => Ok(Method::RelaxKdeScore),
            _ => Err(Error::parse("method", format!("unknown method `{s}`"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How β is chosen for a dataset of dimension `D`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaPolicy {
    Fixed(f64),
    /// `β = 1/D`.
    Scaled,
}

impl BetaPolicy {
    pub fn value(self, dim: usize) -> f64 {
        match self {
            BetaPolicy::Fixed(b) => b,
            BetaPolicy::Scaled => 1.0 / dim as f64,
        }
    }

    pub fn params(self, dim: usize) -> Result<MetricParams> {
        MetricParams::new(self.value(dim))
    }

    pub fn validate(self) -> Result<()> {
        match self {
            BetaPolicy::Fixed(b) if !(b > 0.0 && b.is_finite()) => {
                Err(Error::invalid("beta", format!("must be positive and finite, got {b}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BetaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaPolicy::Fixed(b) => write!(f, "{b}"),
            BetaPolicy::Scaled => f.write_str("1/D"),
        }
    }
}

impl FromStr for BetaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "scaled" | "1/D" | "1/d" => Ok(BetaPolicy::Scaled),
            t => t
                .parse()
                .map(BetaPolicy::Fixed)
                .map_err(|_| Error::invalid("beta", format!("expected a number or `scaled`, got `{t}`"))),
        }
    }
}

impl Serialize for BetaPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BetaPolicy::Fixed(b) => s.serialize_f64(*b),
            BetaPolicy::Scaled => s.serialize_str("scaled"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawBeta {
    Number(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for BetaPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawBeta::deserialize(d)? {
            RawBeta::Number(b) => Ok(BetaPolicy::Fixed(b)),
            RawBeta::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDataset {
    Name(String),
    Full(DatasetKind),
}

fn datasets<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<DatasetKind>, D::Error> {
    let raw: Vec<RawDataset> = one_or_many(d)?;
    raw.into_iter()
        .map(|r| match r {
            RawDataset::Name(s) => s.parse().map_err(serde::de::Error::custom),
            RawDataset::Full(k) => Ok(k),
        })
        .collect()
}

/// Bandwidth sweep of the KDE study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdeSweep {
    pub samples: usize,
    pub bandwidths: usize,
    pub min_bandwidth: f64,
    pub max_bandwidth: f64,
    pub lower: f64,
    pub upper: f64,
    /// Simpson intervals over `[lower, upper]`.
    pub quadrature_intervals: usize,
}

impl Default for KdeSweep {
    fn default() -> Self {
        KdeSweep {
            samples: 1000,
            bandwidths: 30,
            min_bandwidth: 0.02,
            max_bandwidth: 3.0,
            lower: -5.0,
            upper: 5.0,
            quadrature_intervals: 2000,
        }
    }
}

impl KdeSweep {
    /// Log-spaced bandwidth grid.
    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = (self.min_bandwidth.ln(), self.max_bandwidth.ln());
        let m = self.bandwidths - 1;
        (0..self.bandwidths)
            .map(|i| (a + (b - a) * i as f64 / m as f64).exp())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::invalid("kde.samples", "must be at least 2"));
        }
        if self.bandwidths < 3 {
            return Err(Error::invalid("kde.bandwidths", "must be at least 3"));
        }
        if !(self.min_bandwidth > 0.0 && self.min_bandwidth < self.max_bandwidth && self.max_bandwidth.is_finite()) {
            return Err(Error::invalid(
                "kde.min_bandwidth",
                "need 0 < min_bandwidth < max_bandwidth",
            ));
        }
        if !(self.lower < self.upper && self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::invalid("kde.lower", "need a finite interval with lower < upper"));
        }
        if self.quadrature_intervals < 2 || self.quadrature_intervals % 2 != 0 {
            return Err(Error::invalid("kde.quadrature_intervals", "must be even and at least 2"));
        }
        Ok(())
    }
}

/// The experiment a configuration drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Runner {
    Convergence,
    Dims,
    ScaledFig,
    Kde,
}

impl Runner {
    pub const ALL: [Runner; 4] = [Runner::Convergence, Runner::Dims, Runner::ScaledFig, Runner::Kde];

    pub fn name(self) -> &'static str {
        match self {
            Runner::Convergence => "convergence",
            Runner::Dims => "dims",
            Runner::ScaledFig => "scaled-fig",
            Runner::Kde => "kde",
        }
    }
}

impl fmt::Display for Runner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Runner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Runner::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::parse("runner", format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Datasets of the convergence study.
    #[serde(deserialize_with = "datasets")]
    pub datasets: Vec<DatasetKind>,
    pub methods: Vec<Method>,
    /// Sample-size grid of the convergence study, strictly increasing.
    pub sample_sizes: Vec<usize>,
    /// Dimension grid of the dimension study.
    pub dimensions: Vec<usize>,
    /// Sample size used at every point of the dimension grid.
    pub dim_sample_size: usize,
    /// Endpoint pairs per grid point.
    pub pairs: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub beta: Vec<BetaPolicy>,
    /// Neighbors per node; `None` picks `max(10, ⌈2e ln n⌉)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Quadrature sub-segments per edge when weighting graphs.
    pub segments_per_edge: usize,
    /// Quadrature sub-segments per edge when measuring a method's path.
    pub eval_segments_per_edge: usize,
    /// Segments of relaxed method paths.
    pub n_points: usize,
    pub gt_n_points: usize,
    pub gt_segments_per_edge: usize,
    pub tol_factor: f64,
    pub seed: u64,
    /// Seed of the reference fits for geometric datasets.
    pub fit_seed: u64,
    pub fitted_components: usize,
    pub reference_fit_samples: usize,
    /// Components of the mixture behind `density_fitted`.
    pub method_components: usize,
    /// Exponent `d` of the power and nearest-neighbor weights; `None` uses
    /// the ambient dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic_dim: Option<usize>,
    pub kde: KdeSweep,
    pub figure_dimensions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn default_for(runner: Runner) -> Self {
        let base = ExperimentConfig {
            datasets: DatasetKind::planar().to_vec(),
            methods: vec![Method::Power, Method::DensityGt],
            sample_sizes: vec![500, 2000, 8000, 16000],
            dimensions: vec![2, 3, 5, 10, 15, 25],
            dim_sample_size: 20000,
            pairs: 100,
            beta: vec![BetaPolicy::Fixed(1.0)],
            k: None,
            segments_per_edge: 8,
            eval_segments_per_edge: 64,
            n_points: 256,
            gt_n_points: 1024,
            gt_segments_per_edge: 8,
            tol_factor: 1e-8,
            seed: 0,
            fit_seed: 0,
            fitted_components: 50,
            reference_fit_samples: crate::datasets::REFERENCE_FIT_SAMPLES,
            method_components: 10,
            intrinsic_dim: None,
            kde: KdeSweep::default(),
            figure_dimensions: vec![2, 4, 16],
            output: None,
        };
        match runner {
            Runner::Convergence | Runner::Kde => base,
            Runner::Dims => ExperimentConfig {
                methods: vec![Method::Power, Method::DensityGt, Method::RelaxExactScore],
                beta: vec![BetaPolicy::Fixed(1.0), BetaPolicy::Scaled],
                ..base
            },
            Runner::ScaledFig => ExperimentConfig {
                beta: vec![BetaPolicy::Fixed(1.0), BetaPolicy::Scaled],
                ..base
            },
        }
    }

    /// Overlays a TOML document and then `key = value` overrides on the
    /// runner's defaults, and validates the result.
    pub fn load(runner: Runner, text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table = toml::Table::try_from(ExperimentConfig::default_for(runner))
            .map_err(|e| Error::parse("config", e))?;
        if let Some(text) = text {
            let user: toml::Table = text.parse().map_err(|e| Error::parse("config", e))?;
            overlay(&mut table, user);
        }
        for o in overrides {
            let user: toml::Table = o
                .parse()
                .map_err(|e| Error::parse("config override", format!("`{o}`: {e}")))?;
            overlay(&mut table, user);
        }
        let config: ExperimentConfig = table.try_into().map_err(|e| Error::parse("config", e))?;
        config.validate(runner)?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self, runner: Runner) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::invalid("pairs", "must be at least 1"));
        }
        if self.beta.is_empty() {
            return Err(Error::invalid("beta", "at least one policy required"));
        }
        for b in &self.beta {
            b.validate()?;
        }
        if self.k == Some(0) {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        for (field, v) in [
            ("segments_per_edge", self.segments_per_edge),
            ("eval_segments_per_edge", self.eval_segments_per_edge),
            ("gt_segments_per_edge", self.gt_segments_per_edge),
            ("fitted_components", self.fitted_components),
            ("method_components", self.method_components),
        ] {
            if v == 0 {
                return Err(Error::invalid(field, "must be at least 1"));
            }
        }
        for (field, v) in [("n_points", self.n_points), ("gt_n_points", self.gt_n_points)] {
            if v < 2 {
                return Err(Error::invalid(field, "must be at least 2"));
            }
        }
        if !(self.tol_factor > 0.0 && self.tol_factor.is_finite()) {
            return Err(Error::invalid("tol_factor", "must be positive"));
        }
        if self.intrinsic_dim == Some(0) {
            return Err(Error::invalid("intrinsic_dim", "must be at least 1"));
        }
        if self.reference_fit_samples <= self.fitted_components {
            return Err(Error::invalid(
                "reference_fit_samples",
                "must exceed fitted_components",
            ));
        }
        match runner {
            Runner::Convergence => {
                if self.datasets.is_empty() {
                    return Err(Error::invalid("datasets", "at least one dataset required"));
                }
                for d in &self.datasets {
                    d.validate()?;
                }
                self.validate_methods()?;
                strictly_increasing("sample_sizes", &self.sample_sizes, 3)?;
                if self.methods.contains(&Method::RelaxKdeScore) && self.datasets.iter().any(|d| d.dim() != 2) {
                    return Err(Error::invalid("methods", "relax_kde_score is limited to 2D datasets"));
                }
            }
            Runner::Dims => {
                self.validate_methods()?;
                strictly_increasing("dimensions", &self.dimensions, 1)?;
                if self.dim_sample_size < 3 {
                    return Err(Error::invalid("dim_sample_size", "must be at least 3"));
                }
                if self.methods.contains(&Method::RelaxKdeScore) {
                    return Err(Error::invalid("methods", "relax_kde_score is limited to 2D datasets"));
                }
            }
            Runner::ScaledFig => strictly_increasing("figure_dimensions", &self.figure_dimensions, 2)?,
            Runner::Kde => self.kde.validate()?,
        }
        Ok(())
    }

    fn validate_methods(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "at least one method required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::invalid("methods", format!("`{m}` listed twice")));
            }
        }
        Ok(())
    }
}

fn strictly_increasing(field: &str, v: &[usize], min: usize) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(field, "must not be empty"));
    }
    if v[0] < min {
        return Err(Error::invalid(field, format!("values must be at least {min}")));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(field, "must be strictly increasing"));
    }
    Ok(())
}

/// Top-level keys replace; nested tables are merged one level down.
fn overlay(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => {
                for (kk, vv) in u {
                    b.insert(kk, vv);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{DensityModel, NnDensityField};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{dist, log_add_exp, LogSumExp};
use crate::points::Points;

/// How a nearest-neighbor variant merges the two endpoint densities into one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NnKind {
    /// Arithmetic mean of the densities.
    InverseOfMean,
    /// Mean of the inverse densities.
    MeanOfInverse,
    Max,
    Min,
}

impl NnKind {
    pub const ALL: [NnKind; 4] = [
        NnKind::InverseOfMean,
        NnKind::MeanOfInverse,
        NnKind::Max,
        NnKind::Min,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NnKind::InverseOfMean => "inverse_of_mean",
            NnKind::MeanOfInverse => "mean_of_inverse",
            NnKind::Max => "max",
            NnKind::Min => "min",
        }
    }

    /// Log of the combined density.
    pub fn combine(self, log_a: f64, log_b: f64) -> f64 {
        let ln2 = std::f64::consts::LN_2;
        match self {
            NnKind::InverseOfMean => log_add_exp(log_a, log_b) - ln2,
            NnKind::MeanOfInverse => -(log_add_exp(-log_a, -log_b) - ln2),
            NnKind::Max => log_a.max(log_b),
            NnKind::Min => log_a.min(log_b),
        }
    }
}

impl fmt::Display for NnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NnKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::parse("nn variant", format!("unknown kind `{s}`")))
    }
}

/// Edge-weighting scheme for a kNN graph.
#[derive(Clone, Copy)]
pub enum EdgeWeighting<'a> {
    /// `‖Δ‖^(βd + 1)`.
    PowerWeighted { beta: f64, intrinsic_dim: usize },
    /// Midpoint quadrature of the metric length along the chord.
    DensityQuadrature {
        model: &'a dyn DensityModel,
        beta: f64,
        segments: usize,
    },
    /// `‖Δ‖ / p̃^β` with `p̃` merged from nearest-neighbor density estimates
    /// at the two endpoints.
    NnVariant {
        kind: NnKind,
        beta: f64,
        intrinsic_dim: usize,
    },
    /// As `NnVariant`, but merging exact endpoint densities from `model`.
    EndpointDensity {
        kind: NnKind,
        model: &'a dyn DensityModel,
        beta: f64,
    },
}

impl fmt::Debug for EdgeWeighting<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeWeighting::PowerWeighted { beta, intrinsic_dim } => f
                .debug_struct("PowerWeighted")
                .field("beta", beta)
                .field("intrinsic_dim", intrinsic_dim)
                .finish(),
            EdgeWeighting::DensityQuadrature { beta, segments, .. } => f
                .debug_struct("DensityQuadrature")
                .field("beta", beta)
                .field("segments", segments)
                .finish_non_exhaustive(),
            EdgeWeighting::NnVariant {
                kind,
                beta,
                intrinsic_dim,
            } => f
                .debug_struct("NnVariant")
                .field("kind", kind)
                .field("beta", beta)
                .field("intrinsic_dim", intrinsic_dim)
                .finish(),
            EdgeWeighting::EndpointDensity { kind, beta, .. } => f
                .debug_struct("EndpointDensity")
                .field("kind", kind)
                .field("beta", beta)
                .finish_non_exhaustive(),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta", "must be a finite non-negative number"));
    }
    Ok(())
}

pub(super) enum Prepared<'a> {
    Power(f64),
    Quadrature(&'a dyn DensityModel, f64, usize),
    Nn(NnDensityField, NnKind, f64),
    Endpoint(Vec<f64>, NnKind, f64),
}

impl<'a> EdgeWeighting<'a> {
    pub(super) fn prepare(&self, nodes: &Points) -> Result<Prepared<'a>> {
        match *self {
            EdgeWeighting::PowerWeighted { beta, intrinsic_dim } => {
                check_beta(beta)?;
                if intrinsic_dim == 0 {
                    return Err(Error::invalid("intrinsic_dim", "must be at least 1"));
                }
                Ok(Prepared::Power(beta * intrinsic_dim as f64 + 1.0))
            }
            EdgeWeighting::DensityQuadrature {
                model,
                beta,
                segments,
            } => {
                check_beta(beta)?;
                if segments == 0 {
                    return Err(Error::invalid("segments", "must be at least 1"));
                }
                check_dim(model.dim(), nodes.dim())?;
                Ok(Prepared::Quadrature(model, beta, segments))
            }
            EdgeWeighting::NnVariant {
                kind,
                beta,
                intrinsic_dim,
            } => {
                check_beta(beta)?;
                let field = NnDensityField::new(nodes.clone(), intrinsic_dim)?;
                Ok(Prepared::Nn(field, kind, beta))
            }
            EdgeWeighting::EndpointDensity { kind, model, beta } => {
                check_beta(beta)?;
                check_dim(model.dim(), nodes.dim())?;
                let logs = nodes
                    .rows()
                    .map(|x| {
                        let v = model.log_density(x)?;
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(Error::NonFinite {
                                what: "log-density",
                                point: x.to_vec(),
                            })
                        }
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Prepared::Endpoint(logs, kind, beta))
            }
        }
    }
}

impl Prepared<'_> {
    pub(super) fn weight(&self, nodes: &Points, l: usize, m: usize) -> Result<f64> {
        let (a, b) = (nodes.row(l), nodes.row(m));
        match self {
            Prepared::Power(exponent) => {
                let len = nonzero_length(a, b)?;
                Ok(exponent * len.ln())
            }
            Prepared::Quadrature(model, beta, s) => density_edge_log_weight(a, b, *model, *beta, *s),
            Prepared::Nn(field, kind, beta) => nn_variant_edge_log_weight(l, m, field, *kind, *beta),
            Prepared::Endpoint(logs, kind, beta) => {
                let len = nonzero_length(a, b)?;
                Ok(len.ln() - beta * kind.combine(logs[l], logs[m]))
            }
        }
    }
}

fn nonzero_length(a: &[f64], b: &[f64]) -> Result<f64> {
    let len = dist(a, b);
    if len == 0.0 {
        return Err(Error::ZeroLengthEdge {
            from: a.to_vec(),
            to: b.to_vec(),
        });
    }
    Ok(len)
}

/// `(βd + 1) · log ‖x₁ - x₂‖`.
pub fn power_edge_log_weight(x1: &[f64], x2: &[f64], beta: f64, intrinsic_dim: usize) -> Result<f64> {
    check_dim(x1.len(), x2.len())?;
    check_beta(beta)?;
    let len = nonzero_length(x1, x2)?;
    Ok((beta * intrinsic_dim as f64 + 1.0) * len.ln())
}

/// `log(‖Δ‖ / S) + LSE_i(-β log p(y_{i-1/2}))` over `S` equal sub-segments.
pub fn density_edge_log_weight<M: DensityModel + ?Sized>(
    x1: &[f64],
    x2: &[f64],
    model: &M,
    beta: f64,
    segments: usize,
) -> Result<f64> {
    check_dim(model.dim(), x1.len())?;
    check_dim(model.dim(), x2.len())?;
    check_beta(beta)?;
    if segments == 0 {
        return Err(Error::invalid("segments", "must be at least 1"));
    }
    let len = nonzero_length(x1, x2)?;
    let mut acc = LogSumExp::default();
    let mut mid = vec![0.0; x1.len()];
    for i in 0..segments {
        let t = (i as f64 + 0.5) / segments as f64;
        for j in 0..mid.len() {
            mid[j] = x1[j] + t * (x2[j] - x1[j]);
        }
        let lp = model.log_density(&mid)?;
        if !lp.is_finite() {
            return Err(Error::NonFinite {
                what: "log-density",
                point: mid,
            });
        }
        acc.push(-beta * lp);
    }
    Ok((len / segments as f64).ln() + acc.value())
}

/// `log ‖X_l - X_m‖ - β log p̃` with `p̃` merged from the nearest-neighbor
/// estimates at both endpoints.
pub fn nn_variant_edge_log_weight(
    l: usize,
    m: usize,
    field: &NnDensityField,
    kind: NnKind,
    beta: f64,
) -> Result<f64> {
    if l == m {
        return Err(Error::invalid("edge", "endpoints must differ"));
    }
    let a = field.nn_log_density(l)?;
    let b = field.nn_log_density(m)?;
    let data = field.data();
    let len = nonzero_length(data.row(l), data.row(m))?;
    Ok(len.ln() - beta * kind.combine(a, b))
}

use serde::{Deserialize, Serialize};

use super::relax::RelaxationReport;
use super::solver::{solve_geodesic, SolverConfig};
use super::{MetricParams, Path};
use crate::density::DensityModel;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{dist, LogScalar, LogSumExp};
use crate::points::Points;

/// Log of `Σ ‖Δy‖ / p(y_mid)^β` over `segments_per_edge` equal sub-segments
/// of every path edge.
pub fn path_length<M: DensityModel + ?Sized>(
    path: &Path,
    model: &M,
    params: MetricParams,
    segments_per_edge: usize,
) -> Result<LogScalar> {
    if segments_per_edge == 0 {
        return Err(Error::invalid("segments_per_edge", "must be at least 1"));
    }
    check_dim(model.dim(), path.dim())?;
    let beta = params.beta();
    let mut acc = LogSumExp::default();
    let mut mid = vec![0.0; path.dim()];
    for e in 0..path.segments() {
        let a = path.point(e);
        let b = path.point(e + 1);
        let len = dist(a, b);
        if len == 0.0 {
            continue;
        }
        if beta == 0.0 {
            acc.push(len.ln());
            continue;
        }
        let log_sub = (len / segments_per_edge as f64).ln();
        for k in 0..segments_per_edge {
            let t = (k as f64 + 0.5) / segments_per_edge as f64;
            for j in 0..mid.len() {
                mid[j] = a[j] + t * (b[j] - a[j]);
            }
            let lp = model.log_density(&mid)?;
            if !lp.is_finite() {
                return Err(Error::NonFinite {
                    what: "log-density",
                    point: mid.clone(),
                });
            }
            acc.push(log_sub - beta * lp);
        }
    }
    Ok(LogScalar(acc.value()))
}

/// Per-segment log metric speed `log ‖Δφ‖ - β log p(midpoint)`.
pub fn geodesic_metric_speed_profile<M: DensityModel + ?Sized>(
    path: &Path,
    model: &M,
    params: MetricParams,
) -> Result<Vec<f64>> {
    check_dim(model.dim(), path.dim())?;
    let mut mid = vec![0.0; path.dim()];
    (0..path.segments())
        .map(|e| {
            let a = path.point(e);
            let b = path.point(e + 1);
            for j in 0..mid.len() {
                mid[j] = 0.5 * (a[j] + b[j]);
            }
            let lp = if params.beta() == 0.0 {
                0.0
            } else {
                model.log_density(&mid)?
            };
            if !lp.is_finite() {
                return Err(Error::NonFinite {
                    what: "log-density",
                    point: mid.clone(),
                });
            }
            Ok(dist(a, b).ln() - params.beta() * lp)
        })
        .collect()
}

/// Resolution of a ground-truth distance computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthQuality {
    /// Segments of the relaxed geodesic.
    pub n_points: usize,
    /// Quadrature sub-segments per geodesic edge.
    pub segments_per_edge: usize,
    /// Relaxation tolerance relative to the endpoint distance.
    pub tol_factor: f64,
    pub seed: u64,
}

impl Default for GroundTruthQuality {
    fn default() -> Self {
        GroundTruthQuality {
            n_points: 1024,
            segments_per_edge: 8,
            tol_factor: 1e-8,
            seed: 0,
        }
    }
}

/// Reference distance between two points, with the geodesic realizing it.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub log_distance: LogScalar,
    pub geodesic: Path,
    pub report: RelaxationReport,
}

fn endpoints_match(path: &Path, x1: &[f64], x2: &[f64]) -> Result<()> {
    if dist(path.start(), x1) > 1e-9 || dist(path.end(), x2) > 1e-9 {
        return Err(Error::EndpointMismatch {
            path_start: path.start().to_vec(),
            path_end: path.end().to_vec(),
            expected_start: x1.to_vec(),
            expected_end: x2.to_vec(),
        });
    }
    Ok(())
}

/// Relaxes from `init` (or the straight line) to a converged geodesic and
/// measures it. Coincident endpoints give distance zero.
pub fn ground_truth_distance<M: DensityModel + ?Sized>(
    x1: &[f64],
    x2: &[f64],
    model: &M,
    params: MetricParams,
    quality: &GroundTruthQuality,
    init: Option<&Path>,
) -> Result<GroundTruth> {
    check_dim(model.dim(), x1.len())?;
    check_dim(model.dim(), x2.len())?;
    if quality.n_points < 2 {
        return Err(Error::invalid("n_points", "must be at least 2"));
    }
    if x1 == x2 {
        let rows = vec![x1.to_vec(); quality.n_points + 1];
        return Ok(GroundTruth {
            start: x1.to_vec(),
            end: x2.to_vec(),
            log_distance: LogScalar::ZERO,
            geodesic: Path::new(Points::from_rows(&rows)?)?,
            report: RelaxationReport {
                sweeps_used: 0,
                final_max_displacement: 0.0,
                converged: true,
                newton_iterations: 0,
            },
        });
    }
    let straight;
    let init = match init {
        Some(p) => {
            endpoints_match(p, x1, x2)?;
            p
        }
        None => {
            straight = Path::straight_line(x1, x2, quality.n_points)?;
            &straight
        }
    };
    let config = SolverConfig {
        tol_factor: quality.tol_factor,
        ..SolverConfig::new(quality.n_points, quality.seed)
    };
    let (geodesic, report) = solve_geodesic(init, model, params, &config)?;
    if !report.converged {
        return Err(Error::NotConverged { report });
    }
    let log_distance = path_length(&geodesic, model, params, quality.segments_per_edge)?;
    Ok(GroundTruth {
        start: x1.to_vec(),
        end: x2.to_vec(),
        log_distance,
        geodesic,
        report,
    })
}

impl GroundTruth {
    /// Shortest converged result over several initializations. The relaxed
    /// equations also admit non-minimizing geodesics, so the candidates guard
    /// against reporting a longer one.
    pub fn best_of<M: DensityModel + ?Sized>(
        x1: &[f64],
        x2: &[f64],
        model: &M,
        params: MetricParams,
        quality: &GroundTruthQuality,
        inits: &[Path],
    ) -> Result<GroundTruth> {
        let mut best: Option<GroundTruth> = None;
        let mut first_err = None;
        let candidates = std::iter::once(None).chain(inits.iter().map(Some));
        for init in candidates {
            match ground_truth_distance(x1, x2, model, params, quality, init) {
                Ok(gt) => {
                    if best
                        .as_ref()
                        .is_none_or(|b| gt.log_distance.ln() < b.log_distance.ln())
                    {
                        best = Some(gt);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match (best, first_err) {
            (Some(b), _) => Ok(b),
            (None, Some(e)) => Err(e),
            (None, None) => unreachable!("the straight line is always a candidate"),
        }
    }
}

/// Log path ratio: `log L(path) - log dist(x₁, x₂)`.
pub fn lpr<M: DensityModel + ?Sized>(
    path: &Path,
    model: &M,
    params: MetricParams,
    truth: &GroundTruth,
    segments_per_edge: usize,
) -> Result<f64> {
    endpoints_match(path, &truth.start, &truth.end)?;
    let len = path_length(path, model, params, segments_per_edge)?;
    Ok(len.ln() - truth.log_distance.ln())
}

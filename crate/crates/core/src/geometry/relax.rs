use serde::{Deserialize, Serialize};

use super::{MetricParams, Path};
use crate::density::ScoreFunction;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{dist, shuffle, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub max_sweeps: usize,
    /// Stop once no interior point moves farther than this in one sweep.
    pub tol: f64,
    pub seed: u64,
}

impl RelaxationConfig {
    /// `tol = 1e-8 · |x₂ - x₁|`, `max_sweeps = 20 n`.
    ///
    /// Closed loops fall back to the path's own length as the scale.
    pub fn for_path(path: &Path, seed: u64) -> Self {
        let mut scale = dist(path.start(), path.end());
        if scale == 0.0 {
            scale = path.euclidean_length();
        }
        RelaxationConfig {
            max_sweeps: 20 * path.segments(),
            tol: 1e-8 * scale.max(f64::MIN_POSITIVE),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub sweeps_used: usize,
    pub final_max_displacement: f64,
    pub converged: bool,
    /// Newton iterations spent before the certifying sweeps (0 for plain relaxation).
    #[serde(default)]
    pub newton_iterations: usize,
}

fn require_interior(path: &Path) -> Result<()> {
    if path.segments() < 2 {
        return Err(Error::invalid("path", "needs at least one interior point"));
    }
    Ok(())
}

/// Relaxed position of interior point `i` given its neighbors and score.
#[inline]
pub(super) fn relaxed_point(prev: &[f64], cur_score: &[f64], next: &[f64], beta: f64, out: &mut [f64]) {
    let mut vv = 0.0;
    let mut sv = 0.0;
    for j in 0..prev.len() {
        let v = 0.5 * (next[j] - prev[j]);
        vv += v * v;
        sv += cur_score[j] * v;
    }
    for j in 0..prev.len() {
        let v = 0.5 * (next[j] - prev[j]);
        let w = 0.5 * beta * (cur_score[j] * vv - sv * v);
        out[j] = 0.5 * (next[j] + prev[j]) + w;
    }
}

/// One randomized Gauss–Seidel sweep over the interior points, in place.
///
/// Returns the largest distance any point moved.
pub fn relax_step<S: ScoreFunction + ?Sized>(
    path: &mut Path,
    score: &S,
    params: MetricParams,
    rng: &mut Rng,
) -> Result<f64> {
    require_interior(path)?;
    check_dim(score.dim(), path.dim())?;
    let n = path.segments();
    let d = path.dim();
    let mut order: Vec<usize> = (1..n).collect();
    shuffle(&mut order, rng);
    let mut s = vec![0.0; d];
    let mut new = vec![0.0; d];
    let mut max_disp: f64 = 0.0;
    for i in order {
        score.score_into(path.point(i), &mut s)?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore {
                index: i,
                point: path.point(i).to_vec(),
            });
        }
        relaxed_point(path.point(i - 1), &s, path.point(i + 1), params.beta(), &mut new);
        if new.iter().any(|v| !v.is_finite()) {
            return Err(Error::RelaxationDiverging {
                sweep: 0,
                displacement: f64::INFINITY,
            });
        }
        max_disp = max_disp.max(dist(&new, path.point(i)));
        path.point_mut(i).copy_from_slice(&new);
    }
    Ok(max_disp)
}

/// Sweeps until the per-sweep displacement drops to `config.tol`.
pub fn relax<S: ScoreFunction + ?Sized>(
    path: &Path,
    score: &S,
    params: MetricParams,
    config: &RelaxationConfig,
) -> Result<(Path, RelaxationReport)> {
    config.validate()?;
    require_interior(path)?;
    let mut rng = Rng::new(config.seed);
    let mut path = path.clone();
    let mut history: Vec<f64> = Vec::new();
    for sweep in 1..=config.max_sweeps {
        let disp = match relax_step(&mut path, score, params, &mut rng) {
            Err(Error::RelaxationDiverging { .. }) => {
                return Err(Error::RelaxationDiverging {
                    sweep,
                    displacement: f64::INFINITY,
                })
            }
            other => other?,
        };
        history.push(disp);
        if disp <= config.tol {
            return Ok((
                path,
                RelaxationReport {
                    sweeps_used: sweep,
                    final_max_displacement: disp,
                    converged: true,
                    newton_iterations: 0,
                },
            ));
        }
        if sweep > 10 && disp > 10.0 * history[sweep - 11] {
            return Err(Error::RelaxationDiverging {
                sweep,
                displacement: disp,
            });
        }
    }
    let last = history.last().copied().unwrap_or(f64::INFINITY);
    Ok((
        path,
        RelaxationReport {
            sweeps_used: config.max_sweeps,
            final_max_displacement: last,
            converged: false,
            newton_iterations: 0,
        },
    ))
}

/// Norm of the discrete geodesic equation at every interior point, in units
/// of squared step (divide by `h²` for the continuous residual).
pub fn geodesic_residual<S: ScoreFunction + ?Sized>(
    path: &Path,
    score: &S,
    params: MetricParams,
) -> Result<Vec<f64>> {
    require_interior(path)?;
    check_dim(score.dim(), path.dim())?;
    let d = path.dim();
    let mut s = vec![0.0; d];
    let mut f = vec![0.0; d];
    (1..path.segments())
        .map(|i| {
            score.score_into(path.point(i), &mut s)?;
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteScore {
                    index: i,
                    point: path.point(i).to_vec(),
                });
            }
            residual_at(path, i, &s, params.beta(), &mut f);
            Ok(f.iter().map(|v| v * v).sum::<f64>().sqrt())
        })
        .collect()
}

#[inline]
pub(super) fn residual_at(path: &Path, i: usize, s: &[f64], beta: f64, out: &mut [f64]) {
    let (a, x, b) = (path.point(i - 1), path.point(i), path.point(i + 1));
    let mut vv = 0.0;
    let mut sv = 0.0;
    for j in 0..x.len() {
        let v = 0.5 * (b[j] - a[j]);
        vv += v * v;
        sv += s[j] * v;
    }
    for j in 0..x.len() {
        let v = 0.5 * (b[j] - a[j]);
        out[j] = (b[j] - 2.0 * x[j] + a[j]) + beta * (s[j] * vv - sv * v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{DensityModel, GaussianMixture};
    use crate::points::Points;

    fn normal2() -> GaussianMixture {
        GaussianMixture::standard_normal(2)
    }

    fn wiggly(start: [f64; 2], end: [f64; 2], n: usize) -> Path {
        let rows: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let bump = if i == 0 || i == n { 0.0 } else { 0.3 * (7.0 * t).sin() };
                [
                    start[0] + t * (end[0] - start[0]) + bump,
                    start[1] + t * (end[1] - start[1]) - 0.5 * bump,
                ]
            })
            .collect();
        Path::new(Points::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn beta_zero_is_laplace_smoothing() {
        let mut p = wiggly([0.0, 0.0], [2.0, 1.0], 6);
        let before = p.clone();
        let mut rng = Rng::new(3);
        relax_step(&mut p, &normal2(), MetricParams::new(0.0).unwrap(), &mut rng).unwrap();
        // replay the same order to check each update is the neighbor midpoint
        let mut order: Vec<usize> = (1..6).collect();
        shuffle(&mut order, &mut Rng::new(3));
        let mut q = before;
        for i in order {
            let m: Vec<f64> = (0..2).map(|j| 0.5 * (q.point(i - 1)[j] + q.point(i + 1)[j])).collect();
            q.point_mut(i).copy_from_slice(&m);
        }
        assert_eq!(p, q);

        let cfg = RelaxationConfig::for_path(&p, 1);
        let (out, rep) = relax(&p, &normal2(), MetricParams::new(0.0).unwrap(), &cfg).unwrap();
        assert!(rep.converged);
        let line = Path::straight_line(&[0.0, 0.0], &[2.0, 1.0], 6).unwrap();
        for i in 0..=6 {
            assert!(dist(out.point(i), line.point(i)) < 1e-6);
        }
    }

    #[test]
    fn axis_is_invariant() {
        let rows: Vec<[f64; 2]> = [-2.0, -1.5, 0.3, 0.9, 2.0].iter().map(|&x| [x, 0.0]).collect();
        let mut p = Path::new(Points::from_rows(&rows).unwrap()).unwrap();
        let mut rng = Rng::new(0);
        for _ in 0..20 {
            relax_step(&mut p, &normal2(), MetricParams::new(1.0).unwrap(), &mut rng).unwrap();
        }
        assert!(p.points().rows().all(|r| r[1] == 0.0));
    }

    #[test]
    fn three_point_step_by_hand() {
        let p0 = [2.0, 0.0];
        let p1 = [1.0, 1.5];
        let p2 = [0.0, 2.0];
        let mut p = Path::new(Points::from_rows(&[p0, p1, p2]).unwrap()).unwrap();
        let beta = 0.7;
        relax_step(&mut p, &normal2(), MetricParams::new(beta).unwrap(), &mut Rng::new(11)).unwrap();
        // s(x) = -x for the standard normal
        let s = [-1.0, -1.5];
        let v = [-1.0, 1.0];
        let vv = 2.0;
        let sv = s[0] * v[0] + s[1] * v[1];
        let expect = [
            1.0 + 0.5 * beta * (s[0] * vv - sv * v[0]),
            1.0 + 0.5 * beta * (s[1] * vv - sv * v[1]),
        ];
        assert!((p.point(1)[0] - expect[0]).abs() < 1e-15);
        assert!((p.point(1)[1] - expect[1]).abs() < 1e-15);
        assert_eq!(p.point(0), &p0);
        assert_eq!(p.point(2), &p2);
    }

    #[test]
    fn symmetric_geodesic_stays_on_axis() {
        let p = Path::straight_line(&[-2.0, 0.0], &[2.0, 0.0], 64).unwrap();
        let cfg = RelaxationConfig::for_path(&p, 5);
        let (out, rep) = relax(&p, &normal2(), MetricParams::new(1.0).unwrap(), &cfg).unwrap();
        assert!(rep.converged);
        assert!(rep.final_max_displacement <= cfg.tol);
        assert!(out.points().rows().all(|r| r[1].abs() < 1e-6));
    }

    #[test]
    fn straight_line_residual_is_zero_without_density() {
        let p = Path::straight_line(&[0.0, 0.0], &[3.0, -1.0], 8).unwrap();
        let r = geodesic_residual(&p, &normal2(), MetricParams::new(0.0).unwrap()).unwrap();
        assert!(r.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn non_finite_score_reports_point() {
        struct Bad;
        impl ScoreFunction for Bad {
            fn dim(&self) -> usize {
                2
            }
            fn score_into(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
                out.fill(f64::NAN);
                Ok(())
            }
        }
        let mut p = Path::straight_line(&[0.0, 0.0], &[1.0, 0.0], 2).unwrap();
        let err = relax_step(&mut p, &Bad, MetricParams::new(1.0).unwrap(), &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteScore { index: 1, .. }));
    }

    #[test]
    fn large_beta_diverges_with_diagnostic() {
        // steps much wider than the density's scale make the explicit update unstable
        let m = GaussianMixture::new(2, vec![1.0], vec![0.0, 0.0], vec![0.01, 0.0, 0.0, 0.01]).unwrap();
        let p = wiggly([-3.0, 0.5], [3.0, 0.5], 8);
        let cfg = RelaxationConfig {
            max_sweeps: 500,
            tol: 1e-12,
            seed: 0,
        };
        let err = relax(&p, &m, MetricParams::new(4.0).unwrap(), &cfg).unwrap_err();
        assert!(matches!(err, Error::RelaxationDiverging { .. }));
        let _ = m.log_density(&[0.0, 0.0]).unwrap();
    }

    #[test]
    fn rejects_paths_without_interior() {
        let mut p = Path::straight_line(&[0.0, 0.0], &[1.0, 0.0], 1).unwrap();
        assert!(relax_step(&mut p, &normal2(), MetricParams::new(1.0).unwrap(), &mut Rng::new(0)).is_err());
        let bad = RelaxationConfig {
            max_sweeps: 0,
            tol: 1.0,
            seed: 0,
        };
        let p = Path::straight_line(&[0.0, 0.0], &[1.0, 0.0], 4).unwrap();
        assert!(relax(&p, &normal2(), MetricParams::new(1.0).unwrap(), &bad).is_err());
    }
}

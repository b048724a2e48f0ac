use nalgebra::{DMatrix, DVector};

use super::path::resample_uniform;
use super::relax::{relax, residual_at, RelaxationConfig, RelaxationReport};
use super::{MetricParams, Path};
use crate::density::ScoreFunction;
use crate::error::{check_dim, Error, Result};
use crate::numerics::dist;

/// Settings for [`solve_geodesic`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Segments of the returned path.
    pub segments: usize,
    /// Resolution of the first continuation level.
    pub coarsest: usize,
    /// Newton iterations allowed per level.
    pub max_newton: usize,
    /// Displacement tolerance as a multiple of the endpoint distance.
    pub tol_factor: f64,
    /// Cap on certifying sweeps; `None` means `20 n`.
    pub max_sweeps: Option<usize>,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(segments: usize, seed: u64) -> Self {
        SolverConfig {
            segments,
            coarsest: 16,
            max_newton: 80,
            tol_factor: 1e-8,
            max_sweeps: None,
            seed,
        }
    }
}

/// Converged discrete geodesic with the same endpoints as `init`.
///
/// The path is resampled to a coarse resolution, driven to a root of the
/// discrete geodesic equations by damped Newton, refined by factors of two
/// and re-solved, then handed to [`relax`] so that the reported convergence
/// is the relaxation's own displacement criterion. If Newton stalls on two
/// consecutive levels, or on the finest, the rest is skipped and only a
/// single sweep is run, so the report comes back unconverged quickly.
pub fn solve_geodesic<S: ScoreFunction + ?Sized>(
    init: &Path,
    score: &S,
    params: MetricParams,
    config: &SolverConfig,
) -> Result<(Path, RelaxationReport)> {
    check_dim(score.dim(), init.dim())?;
    if config.segments < 2 {
        return Err(Error::invalid("segments", "must be at least 2"));
    }
    let mut levels = Vec::new();
    let mut m = config.segments;
    while m > config.coarsest.max(2) {
        levels.push(m);
        m = m.div_ceil(2);
    }
    levels.push(m.max(2));
    levels.reverse();

    let mut scale = dist(init.start(), init.end());
    if scale == 0.0 {
        scale = init.euclidean_length();
    }
    let tol = config.tol_factor * scale.max(f64::MIN_POSITIVE);

    let mut path = init.clone();
    let mut newton_total = 0;
    let mut final_fmax = f64::INFINITY;
    for (level, &m) in levels.iter().enumerate() {
        path = resample_uniform(&path, m)?;
        // the coarsest level is cheap, so it may crawl for its whole budget
        let stall_window = if level == 0 { None } else { Some(STALL_WINDOW) };
        let (iters, fmax) = newton(&mut path, score, params.beta(), 0.1 * tol, config.max_newton, stall_window)?;
        newton_total += iters;
        // a finer level often rescues a stalled one; two in a row rarely recover
        if fmax > tol && final_fmax > tol {
            final_fmax = fmax;
            path = resample_uniform(&path, config.segments)?;
            break;
        }
        final_fmax = fmax;
    }
    // A stalled level would leave the sweeps a long, often unstable descent;
    // one sweep still measures how far off the path is.
    let max_sweeps = if final_fmax <= tol {
        config.max_sweeps.unwrap_or(20 * config.segments)
    } else {
        1
    };
    let relax_cfg = RelaxationConfig {
        max_sweeps,
        tol,
        seed: config.seed,
    };
    let (out, mut report) = relax(&path, score, params, &relax_cfg)?;
    report.newton_iterations = newton_total;
    Ok((out, report))
}

/// Newton iterations over which the residual norm must at least halve on
/// the refined levels.
const STALL_WINDOW: usize = 10;
const LINE_SEARCH_STEPS: usize = 40;

/// Residual vector and its largest per-point norm; `None` if the score is not
/// finite somewhere on the path.
fn residuals<S: ScoreFunction + ?Sized>(
    path: &Path,
    score: &S,
    beta: f64,
    scores: &mut [f64],
    f: &mut [f64],
) -> Result<Option<(f64, f64)>> {
    let d = path.dim();
    let mut sum_sq = 0.0;
    let mut max: f64 = 0.0;
    for i in 1..path.segments() {
        let k = (i - 1) * d;
        let s = &mut scores[k..k + d];
        score.score_into(path.point(i), s)?;
        if s.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let fi = &mut f[k..k + d];
        residual_at(path, i, s, beta, fi);
        let sq: f64 = fi.iter().map(|v| v * v).sum();
        if !sq.is_finite() {
            return Ok(None);
        }
        sum_sq += sq;
        max = max.max(sq.sqrt());
    }
    Ok(Some((sum_sq.sqrt(), max)))
}

/// Damped Newton on the block-tridiagonal discrete geodesic system. Leaves the
/// best path found in `path` and returns the iterations used with the final
/// largest residual norm.
fn newton<S: ScoreFunction + ?Sized>(
    path: &mut Path,
    score: &S,
    beta: f64,
    ftol: f64,
    max_iter: usize,
    stall_window: Option<usize>,
) -> Result<(usize, f64)> {
    let n = path.segments();
    let d = path.dim();
    let m = n - 1;
    let mut scores = vec![0.0; m * d];
    let mut f = vec![0.0; m * d];
    let Some((mut fnorm, mut fmax)) = residuals(path, score, beta, &mut scores, &mut f)? else {
        return Ok((0, f64::INFINITY));
    };
    let mut jac = vec![0.0; d * d];
    let mut trial_scores = vec![0.0; m * d];
    let mut trial_f = vec![0.0; m * d];
    let mut history = vec![fnorm];
    for it in 0..max_iter {
        if fmax <= ftol {
            return Ok((it, fmax));
        }
        // a healthy solve shrinks the residual quickly; crawling damped steps
        // from a poor start are abandoned
        if let Some(w) = stall_window {
            if it >= w && fnorm > 0.5 * history[it - w] {
                return Ok((it, fmax));
            }
        }
        let Some(delta) = newton_direction(path, score, beta, &scores, &f, &mut jac)? else {
            return Ok((it, fmax));
        };
        let step_max = delta
            .chunks_exact(d)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let cap = 0.25 * path.euclidean_length().max(f64::MIN_POSITIVE);
        let mut alpha = if step_max > cap { cap / step_max } else { 1.0 };
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_STEPS {
            let mut trial = path.clone();
            for i in 1..n {
                let p = trial.point_mut(i);
                for j in 0..d {
                    p[j] += alpha * delta[(i - 1) * d + j];
                }
            }
            if let Some((tn, tm)) = residuals(&trial, score, beta, &mut trial_scores, &mut trial_f)? {
                if tn <= (1.0 - 1e-4 * alpha) * fnorm {
                    *path = trial;
                    std::mem::swap(&mut scores, &mut trial_scores);
                    std::mem::swap(&mut f, &mut trial_f);
                    fnorm = tn;
                    fmax = tm;
                    history.push(fnorm);
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok((it, fmax));
        }
    }
    Ok((max_iter, fmax))
}

/// Solves `J δ = -F` by block Thomas elimination.
fn newton_direction<S: ScoreFunction + ?Sized>(
    path: &Path,
    score: &S,
    beta: f64,
    scores: &[f64],
    f: &[f64],
    jac: &mut [f64],
) -> Result<Option<Vec<f64>>> {
    let n = path.segments();
    let d = path.dim();
    let m = n - 1;
    let eye = DMatrix::<f64>::identity(d, d);
    let mut lus = Vec::with_capacity(m);
    let mut rhs: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut uppers: Vec<DMatrix<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let i = k + 1;
        let s = DVector::from_column_slice(&scores[k * d..(k + 1) * d]);
        let a = path.point(i - 1);
        let b = path.point(i + 1);
        let v = DVector::from_iterator(d, (0..d).map(|j| 0.5 * (b[j] - a[j])));
        let vv = v.dot(&v);
        let sv = s.dot(&v);
        score.score_jacobian_into(path.point(i), jac)?;
        if jac.iter().any(|x| !x.is_finite()) {
            return Ok(None);
        }
        let js = DMatrix::from_row_slice(d, d, jac);
        let proj = &eye * vv - &v * v.transpose();
        let diag = &eye * -2.0 + (proj * js) * beta;
        let mm = (&s * v.transpose()) * 2.0 - &v * s.transpose() - &eye * sv;
        let upper = &eye + &mm * (0.5 * beta);
        let lower = &eye - &mm * (0.5 * beta);
        let r = -DVector::from_column_slice(&f[k * d..(k + 1) * d]);
        let (bp, rp) = if k == 0 {
            (diag, r)
        } else {
            let prev: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn> = &lus[k - 1];
            let Some(x) = prev.solve(&uppers[k - 1]) else {
                return Ok(None);
            };
            let Some(y) = prev.solve(&rhs[k - 1]) else {
                return Ok(None);
            };
            (diag - &lower * x, r - &lower * y)
        };
        let lu = bp.lu();
        if !lu.is_invertible() {
            return Ok(None);
        }
        lus.push(lu);
        rhs.push(rp);
        uppers.push(upper);
    }
    let mut delta = vec![0.0; m * d];
    let mut next: Option<DVector<f64>> = None;
    for k in (0..m).rev() {
        let r = match &next {
            Some(dn) => &rhs[k] - &uppers[k] * dn,
            None => rhs[k].clone(),
        };
        let Some(dk) = lus[k].solve(&r) else {
            return Ok(None);
        };
        if dk.iter().any(|x| !x.is_finite()) {
            return Ok(None);
        }
        delta[k * d..(k + 1) * d].copy_from_slice(dk.as_slice());
        next = Some(dk);
    }
    Ok(Some(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GaussianMixture;
    use crate::geometry::geodesic_residual;
    use crate::points::Points;

    #[test]
    fn newton_reaches_a_fixed_point_of_relaxation() {
        let model = GaussianMixture::standard_normal(2);
        let init = Path::straight_line(&[2.0, 0.0], &[0.0, 2.0], 8).unwrap();
        let params = MetricParams::new(1.0).unwrap();
        let (path, rep) = solve_geodesic(&init, &model, params, &SolverConfig::new(128, 1)).unwrap();
        assert!(rep.converged);
        assert!(rep.newton_iterations > 0);
        let r = geodesic_residual(&path, &model, params).unwrap();
        assert!(r.iter().all(|&v| v < 1e-8));
        // the geodesic bends toward the mode
        let mid = path.point(64);
        assert!(mid[0] + mid[1] < 2.0 - 1e-3);
    }

    #[test]
    fn handles_steps_wider_than_the_density_scale() {
        // explicit sweeps are unstable here; Newton is not
        let m = GaussianMixture::new(2, vec![1.0], vec![0.0, 0.0], vec![0.04, 0.0, 0.0, 0.04]).unwrap();
        let init = Path::new(Points::from_rows(&[[-3.0, 0.5], [0.0, 2.0], [3.0, 0.5]]).unwrap()).unwrap();
        let params = MetricParams::new(1.0).unwrap();
        let (path, rep) = solve_geodesic(&init, &m, params, &SolverConfig::new(64, 0)).unwrap();
        assert!(rep.converged, "{rep:?}");
        let l = path.segment_lengths();
        let spread = l.iter().copied().fold(0.0, f64::max) - l.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-6 * l[0]);
    }

    #[test]
    fn stalled_newton_reports_quickly() {
        // a chord across the empty middle of a ring-shaped density
        let k = 12;
        let mut means = Vec::new();
        for j in 0..k {
            let t = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            means.extend([t.cos(), t.sin()]);
        }
        let covs = [0.006, 0.0, 0.0, 0.006].repeat(k);
        let m = GaussianMixture::new(2, vec![1.0 / k as f64; k], means, covs).unwrap();
        let init = Path::straight_line(&[0.2, -0.95], &[-0.8, 0.85], 8).unwrap();
        let params = MetricParams::new(1.0).unwrap();
        let t = std::time::Instant::now();
        match solve_geodesic(&init, &m, params, &SolverConfig::new(256, 0)) {
            Ok((_, rep)) => assert!(rep.converged || rep.sweeps_used <= 1, "{rep:?}"),
            Err(Error::RelaxationDiverging { .. }) => {}
            Err(e) => panic!("{e}"),
        }
        assert!(t.elapsed().as_secs_f64() < 10.0);
    }
}

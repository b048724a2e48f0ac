//! Expectation-maximization for full-covariance Gaussian mixtures.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{cholesky, GaussianMixture};
use crate::error::{Error, Result};
use crate::numerics::{dist_sq, LogSumExp, Rng};
use crate::points::Points;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the per-sample log-likelihood improves by less than this.
    pub tol: f64,
    pub seed: u64,
    /// Added to every covariance diagonal.
    pub reg: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 500,
            tol: 1e-6,
            seed: 0,
            reg: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmFit {
    pub model: GaussianMixture,
    /// Per-sample training log-likelihood of every accepted iterate.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

const LLOYD_ITERS: usize = 25;

/// Fits a `k`-component mixture by EM.
///
/// Seeding is k-means++ followed by a few Lloyd iterations. An iterate that
/// would lower the likelihood (possible only through the covariance
/// regularization) ends the run and the previous parameters are kept, so the
/// recorded likelihood sequence never decreases.
pub fn gmm_fit_em(data: &Points, k: usize, config: &EmConfig) -> Result<EmFit> {
    let n = data.len();
    if k == 0 {
        return Err(Error::invalid("components", "must be at least 1"));
    }
    if n <= k {
        return Err(Error::invalid(
            "data",
            format!("need more samples ({n}) than components ({k})"),
        ));
    }
    if !data.is_finite() {
        return Err(Error::invalid("data", "must be finite"));
    }
    if !(config.reg >= 0.0) || !(config.tol >= 0.0) || config.max_iters == 0 {
        return Err(Error::invalid("em config", "reg, tol must be >= 0 and max_iters >= 1"));
    }
    let d = data.dim();
    let mut rng = Rng::new(config.seed);

    let centers = kmeans_pp(data, k, &mut rng);
    let centers = lloyd(data, centers, LLOYD_ITERS);
    let mut resp = vec![0.0; n * k];
    for (i, x) in data.rows().enumerate() {
        resp[i * k + nearest(x, &centers, d)] = 1.0;
    }
    let mut model = m_step(data, &resp, k, config.reg)?;

    let mut history = Vec::new();
    let mut ll = e_step(data, &model, &mut resp);
    history.push(ll);
    let mut converged = false;
    for _ in 1..config.max_iters {
        let candidate = m_step(data, &resp, k, config.reg)?;
        let mut cand_resp = vec![0.0; n * k];
        let cand_ll = e_step(data, &candidate, &mut cand_resp);
        if cand_ll < ll {
            converged = true;
            break;
        }
        let gain = cand_ll - ll;
        model = candidate;
        resp = cand_resp;
        ll = cand_ll;
        history.push(ll);
        if gain < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        model,
        log_likelihood: history,
        converged,
    })
}

/// Fills responsibilities; returns the mean log-likelihood.
fn e_step(data: &Points, model: &GaussianMixture, resp: &mut [f64]) -> f64 {
    let k = model.n_components();
    let lls: Vec<f64> = resp
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, r)| {
            model
                .component_log_terms(data.row(i), r)
                .expect("dimension checked by caller");
            let mut acc = LogSumExp::default();
            r.iter().for_each(|v| acc.push(*v));
            let lp = acc.value();
            r.iter_mut().for_each(|v| *v = (*v - lp).exp());
            lp
        })
        .collect();
    // sequential reduction keeps the result independent of the thread count
    lls.iter().sum::<f64>() / data.len() as f64
}

fn m_step(data: &Points, resp: &[f64], k: usize, reg: f64) -> Result<GaussianMixture> {
    let d = data.dim();
    let mut nk = vec![10.0 * f64::EPSILON; k];
    let mut means = vec![0.0; k * d];
    for (i, x) in data.rows().enumerate() {
        let r = &resp[i * k..(i + 1) * k];
        for c in 0..k {
            if r[c] == 0.0 {
                continue;
            }
            nk[c] += r[c];
            for j in 0..d {
                means[c * d + j] += r[c] * x[j];
            }
        }
    }
    for c in 0..k {
        for j in 0..d {
            means[c * d + j] /= nk[c];
        }
    }
    let mut covs = vec![0.0; k * d * d];
    let mut diff = vec![0.0; d];
    for (i, x) in data.rows().enumerate() {
        let r = &resp[i * k..(i + 1) * k];
        for c in 0..k {
            if r[c] == 0.0 {
                continue;
            }
            for j in 0..d {
                diff[j] = x[j] - means[c * d + j];
            }
            let cov = &mut covs[c * d * d..(c + 1) * d * d];
            for a in 0..d {
                for b in 0..=a {
                    cov[a * d + b] += r[c] * diff[a] * diff[b];
                }
            }
        }
    }
    for c in 0..k {
        let cov = &mut covs[c * d * d..(c + 1) * d * d];
        for a in 0..d {
            for b in 0..=a {
                let v = cov[a * d + b] / nk[c];
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
            cov[a * d + a] += reg;
        }
        if cholesky(cov, d).is_none() {
            return Err(Error::DegenerateComponent { component: c });
        }
    }
    let total: f64 = nk.iter().sum();
    let mut weights: Vec<f64> = nk.iter().map(|v| v / total).collect();
    // absorb rounding so the weights sum to one
    let s: f64 = weights.iter().sum();
    let last = weights.len() - 1;
    weights[last] += 1.0 - s;
    GaussianMixture::new(d, weights, means, covs)
}

fn nearest(x: &[f64], centers: &[f64], d: usize) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, m) in centers.chunks_exact(d).enumerate() {
        let q = dist_sq(x, m);
        if q < best.0 {
            best = (q, c);
        }
    }
    best.1
}

fn kmeans_pp(data: &Points, k: usize, rng: &mut Rng) -> Vec<f64> {
    let n = data.len();
    let d = data.dim();
    let mut centers = Vec::with_capacity(k * d);
    centers.extend_from_slice(data.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = data.rows().map(|x| dist_sq(x, &centers[..d])).collect();
    while centers.len() < k * d {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, v) in d2.iter().enumerate() {
                acc += v;
                if u < acc {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, x) in data.rows().enumerate() {
            d2[i] = d2[i].min(dist_sq(x, &c));
        }
        centers.extend(c);
    }
    centers
}

fn lloyd(data: &Points, mut centers: Vec<f64>, iters: usize) -> Vec<f64> {
    let d = data.dim();
    let k = centers.len() / d;
    let mut assign = vec![usize::MAX; data.len()];
    for _ in 0..iters {
        let mut changed = false;
        for (i, x) in data.rows().enumerate() {
            let c = nearest(x, &centers, d);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, x) in data.rows().enumerate() {
            counts[assign[i]] += 1;
            for j in 0..d {
                sums[assign[i] * d + j] += x[j];
            }
        }
        for c in 0..k {
            // empty clusters keep their previous center
            if counts[c] > 0 {
                for j in 0..d {
                    centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
    }
    centers
}

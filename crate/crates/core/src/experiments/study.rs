//! Graph and relaxation methods measured by log path ratio against ground
//! truth, over a sample-size grid or a dimension grid.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;

use super::cache::{Cache, GroundTruthKey};
use super::config::{BetaPolicy, ExperimentConfig, Method};
use super::table::{Axis, ResultRow, ResultTable};
use crate::datasets::DatasetKind;
use crate::density::{gmm_fit_em, EmConfig, GaussianMixture, KdeModel, ScoreFunction};
use crate::error::{Error, Result};
use crate::geometry::{path_length, solve_geodesic, GroundTruth, GroundTruthQuality, MetricParams, Path, SolverConfig};
use crate::graph::{build_knn, default_k, densify, dijkstra, EdgeWeighting, GraphPath, KnnGraph};
use crate::numerics::{derive_seed, Rng};
use crate::points::Points;

/// Stable 64-bit FNV-1a, used to give every dataset its own seed stream.
fn name_hash(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of one grid point. It depends on the dataset and sample size only, so
/// the same draw appears in every runner that visits that point.
pub fn grid_seed(master: u64, dataset: &DatasetKind, n: usize) -> u64 {
    derive_seed(derive_seed(master, name_hash(&dataset.name())), n as u64)
}

/// Distinct index pairs drawn uniformly.
pub fn draw_pairs(n: usize, count: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect()
}

enum Outcome {
    Lpr(f64),
    Disconnected,
    Failed,
}

fn polyline(graph: &KnnGraph, gp: &GraphPath) -> Result<Path> {
    let rows: Vec<&[f64]> = gp.nodes.iter().map(|&l| graph.nodes().row(l)).collect();
    Path::new(Points::from_rows(&rows)?)
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    kind: &'a DatasetKind,
    model: &'a GaussianMixture,
    cache: &'a Cache,
    axis: Axis,
    grid: usize,
}

struct Prepared {
    data: Points,
    base: KnnGraph,
    pairs: Vec<(usize, usize)>,
    seed: u64,
    fitted: Option<GaussianMixture>,
    kde: Option<KdeModel>,
}

impl Context<'_> {
    fn intrinsic_dim(&self) -> usize {
        self.config.intrinsic_dim.unwrap_or(self.kind.dim())
    }

    fn prepare(&self, n: usize) -> Result<Prepared> {
        let seed = grid_seed(self.config.seed, self.kind, n);
        let root = Rng::new(seed);
        let data = self.model.sample(n, &mut root.child(1));
        let k = self.config.k.unwrap_or_else(|| default_k(n)).min(n - 1);
        let base = build_knn(data.clone(), k)?;
        let pairs = draw_pairs(n, self.config.pairs, &mut root.child(2));
        let fitted = if self.config.methods.contains(&Method::DensityFitted) {
            let em = EmConfig {
                seed: derive_seed(seed, 3),
                ..EmConfig::default()
            };
            Some(gmm_fit_em(&data, self.config.method_components.min(n - 1), &em)?.model)
        } else {
            None
        };
        let kde = if self.config.methods.contains(&Method::RelaxKdeScore) {
            Some(KdeModel::scott(data.clone())?)
        } else {
            None
        };
        Ok(Prepared {
            data,
            base,
            pairs,
            seed,
            fitted,
            kde,
        })
    }

    fn weighting<'m>(&'m self, method: Method, prep: &'m Prepared, beta: f64) -> EdgeWeighting<'m> {
        let d = self.intrinsic_dim();
        let segments = self.config.segments_per_edge;
        match method {
            Method::Power | Method::RelaxKdeScore => EdgeWeighting::PowerWeighted { beta, intrinsic_dim: d },
            Method::DensityGt | Method::RelaxExactScore => EdgeWeighting::DensityQuadrature {
                model: self.model,
                beta,
                segments,
            },
            Method::DensityFitted => EdgeWeighting::DensityQuadrature {
                model: prep.fitted.as_ref().expect("fitted model prepared"),
                beta,
                segments,
            },
            Method::NnVariant(kind) => EdgeWeighting::NnVariant {
                kind,
                beta,
                intrinsic_dim: d,
            },
            Method::EndpointGt(kind) => EdgeWeighting::EndpointDensity {
                kind,
                model: self.model,
                beta,
            },
        }
    }

    fn quality(&self, pair: usize, seed: u64) -> GroundTruthQuality {
        GroundTruthQuality {
            n_points: self.config.gt_n_points,
            segments_per_edge: self.config.gt_segments_per_edge,
            tol_factor: self.config.tol_factor,
            seed: derive_seed(seed, 0x6700 + pair as u64),
        }
    }

    /// Shorter of the relaxed chord and the relaxed `density_gt` graph path.
    fn ground_truth(&self, x1: &[f64], x2: &[f64], params: MetricParams, init: Option<&Path>, quality: GroundTruthQuality) -> Result<f64> {
        let key = GroundTruthKey {
            dataset: self.kind,
            fitted_components: self.config.fitted_components,
            fit_seed: self.config.fit_seed,
            fit_samples: self.config.reference_fit_samples,
            start: x1,
            end: x2,
            beta: params.beta(),
            quality,
        };
        self.cache.ground_truth(&key, || {
            let inits: Vec<Path> = init.into_iter().cloned().collect();
            let gt = GroundTruth::best_of(x1, x2, self.model, params, &quality, &inits)?;
            Ok(gt.log_distance.ln())
        })
    }

    fn relax_method<S: ScoreFunction + ?Sized>(
        &self,
        init: &GraphPath,
        graph: &KnnGraph,
        score: &S,
        params: MetricParams,
        seed: u64,
    ) -> Result<Option<Path>> {
        let start = densify(init, graph, self.config.n_points)?;
        let config = SolverConfig {
            tol_factor: self.config.tol_factor,
            ..SolverConfig::new(self.config.n_points, seed)
        };
        match solve_geodesic(&start, score, params, &config) {
            Ok((path, report)) if report.converged => Ok(Some(path)),
            Ok(_) | Err(Error::RelaxationDiverging { .. }) | Err(Error::NonFiniteScore { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn measure(&self, path: &Path, params: MetricParams, truth: f64) -> Result<f64> {
        Ok(path_length(path, self.model, params, self.config.eval_segments_per_edge)?.ln() - truth)
    }

    /// Rows for every configured method and β policy at one grid point.
    fn run(&self, n: usize) -> Result<Vec<ResultRow>> {
        let prep = self.prepare(n)?;
        let dim = self.kind.dim();
        let mut rows = Vec::new();
        for &policy in &self.config.beta {
            let started = Instant::now();
            let params = policy.params(dim)?;
            let beta = params.beta();
            let mut graph_methods: Vec<Method> = vec![Method::DensityGt];
            for &m in &self.config.methods {
                let needed = match m {
                    Method::RelaxExactScore => Method::DensityGt,
                    Method::RelaxKdeScore => Method::Power,
                    other => other,
                };
                if !graph_methods.contains(&needed) {
                    graph_methods.push(needed);
                }
            }
            let graphs: HashMap<Method, KnnGraph> = graph_methods
                .iter()
                .map(|&m| Ok((m, prep.base.reweighted(&self.weighting(m, &prep, beta))?)))
                .collect::<Result<_>>()?;
            let setup = started.elapsed().as_secs_f64();

            // ground truth first: every method of a pair shares it
            let gt_graph = &graphs[&Method::DensityGt];
            let started = Instant::now();
            let truths: Vec<Option<f64>> = prep
                .pairs
                .par_iter()
                .enumerate()
                .map(|(i, &(a, b))| -> Result<Option<f64>> {
                    let (x1, x2) = (prep.data.row(a), prep.data.row(b));
                    let init = match dijkstra(gt_graph, a, b) {
                        Ok(gp) => Some(densify(&gp, gt_graph, self.config.gt_n_points)?),
                        Err(Error::Disconnected { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    match self.ground_truth(x1, x2, params, init.as_ref(), self.quality(i, prep.seed)) {
                        Ok(v) => Ok(Some(v)),
                        Err(Error::NotConverged { .. } | Error::RelaxationDiverging { .. } | Error::NonFiniteScore { .. }) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let gt_time = started.elapsed().as_secs_f64();

            for &method in &self.config.methods {
                let started = Instant::now();
                let outcomes: Vec<Outcome> = prep
                    .pairs
                    .par_iter()
                    .zip(&truths)
                    .enumerate()
                    .map(|(i, (&(a, b), truth))| self.pair(method, &prep, &graphs, params, i, a, b, *truth))
                    .collect::<Result<_>>()?;
                rows.push(self.summarize(method, policy, beta, &outcomes, setup + gt_time + started.elapsed().as_secs_f64())?);
            }
        }
        Ok(rows)
    }

    #[allow(clippy::too_many_arguments)]
    fn pair(
        &self,
        method: Method,
        prep: &Prepared,
        graphs: &HashMap<Method, KnnGraph>,
        params: MetricParams,
        i: usize,
        a: usize,
        b: usize,
        truth: Option<f64>,
    ) -> Result<Outcome> {
        let graph_key = match method {
            Method::RelaxExactScore => Method::DensityGt,
            Method::RelaxKdeScore => Method::Power,
            m => m,
        };
        let graph = &graphs[&graph_key];
        let gp = match dijkstra(graph, a, b) {
            Ok(gp) => gp,
            Err(Error::Disconnected { .. }) => return Ok(Outcome::Disconnected),
            Err(e) => return Err(e),
        };
        let Some(truth) = truth else {
            return Ok(Outcome::Failed);
        };
        let seed = derive_seed(prep.seed, 0x5200 + i as u64);
        let path = match method {
            Method::RelaxExactScore => self.relax_method(&gp, graph, self.model, params, seed)?,
            Method::RelaxKdeScore => {
                let kde = prep.kde.as_ref().expect("kde prepared");
                self.relax_method(&gp, graph, kde, params, seed)?
            }
            _ => Some(polyline(graph, &gp)?),
        };
        Ok(match path {
            Some(p) => Outcome::Lpr(self.measure(&p, params, truth)?),
            None => Outcome::Failed,
        })
    }

    fn summarize(&self, method: Method, policy: BetaPolicy, beta: f64, outcomes: &[Outcome], wall: f64) -> Result<ResultRow> {
        let total = outcomes.len();
        let skipped = outcomes.iter().filter(|o| matches!(o, Outcome::Disconnected)).count();
        if skipped * 10 > total {
            return Err(Error::GraphTooSparse { skipped, total });
        }
        let failed = outcomes.iter().filter(|o| matches!(o, Outcome::Failed)).count();
        let lprs: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| match o {
                Outcome::Lpr(v) => Some(*v),
                _ => None,
            })
            .collect();
        if lprs.is_empty() {
            return Err(Error::invalid(
                "pairs",
                format!("no pair produced a path for {method} on {} at {}", self.kind, self.grid),
            ));
        }
        let m = lprs.len() as f64;
        let mean = lprs.iter().sum::<f64>() / m;
        let var = if lprs.len() > 1 {
            lprs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Ok(ResultRow {
            dataset: self.kind.name(),
            method,
            beta_policy: policy,
            beta,
            axis: self.axis,
            grid: self.grid,
            pairs: total,
            skipped,
            failed,
            mean_lpr: mean,
            std_err: (var / m).sqrt(),
            min_lpr: lprs.iter().copied().fold(f64::INFINITY, f64::min),
            wall_seconds: wall,
        })
    }
}

fn sort_rows(rows: &mut [ResultRow], config: &ExperimentConfig) {
    let method_rank = |m: Method| config.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    let beta_rank = |b: BetaPolicy| config.beta.iter().position(|&x| x == b).unwrap_or(usize::MAX);
    // datasets keep their config order: the sort below is stable
    rows.sort_by_key(|r| (method_rank(r.method), beta_rank(r.beta_policy), r.grid));
}

/// LPR of each method over the sample-size grid, for every dataset.
pub fn run_convergence(config: &ExperimentConfig, cache: &Cache) -> Result<ResultTable> {
    config.validate(super::config::Runner::Convergence)?;
    let mut table = ResultTable::default();
    for kind in &config.datasets {
        let model = cache.reference_model(kind, config.fitted_components, config.fit_seed, config.reference_fit_samples)?;
        let mut rows = Vec::new();
        for &n in &config.sample_sizes {
            let ctx = Context {
                config,
                kind,
                model: &model,
                cache,
                axis: Axis::SampleSize,
                grid: n,
            };
            rows.extend(ctx.run(n)?);
        }
        sort_rows(&mut rows, config);
        table.rows.extend(rows);
    }
    Ok(table)
}

/// LPR of each method on the standard normal over the dimension grid, at a
/// fixed sample size.
pub fn run_dimension_scaling(config: &ExperimentConfig, cache: &Cache) -> Result<ResultTable> {
    config.validate(super::config::Runner::Dims)?;
    let mut rows = Vec::new();
    for &dim in &config.dimensions {
        let kind = DatasetKind::StandardNormal { dim };
        let model = GaussianMixture::standard_normal(dim);
        let ctx = Context {
            config,
            kind: &kind,
            model: &model,
            cache,
            axis: Axis::Dimension,
            grid: dim,
        };
        rows.extend(ctx.run(config.dim_sample_size)?);
    }
    sort_rows(&mut rows, config);
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Runner;
    use crate::graph::NnKind;

    fn small(runner: Runner) -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec![DatasetKind::StandardNormal { dim: 2 }, DatasetKind::Gmm3],
            sample_sizes: vec![200, 400],
            dimensions: vec![2, 3],
            dim_sample_size: 400,
            pairs: 6,
            gt_n_points: 128,
            n_points: 64,
            ..ExperimentConfig::default_for(runner)
        }
    }

    #[test]
    fn pairs_are_distinct_and_in_range() {
        let mut rng = Rng::new(4);
        for (a, b) in draw_pairs(5, 500, &mut rng) {
            assert!(a < 5 && b < 5 && a != b);
        }
        assert_eq!(draw_pairs(2, 50, &mut rng).iter().filter(|p| p.0 == p.1).count(), 0);
    }

    #[test]
    fn convergence_rows_are_complete_and_reproducible() {
        let mut c = small(Runner::Convergence);
        c.methods = vec![
            Method::Power,
            Method::DensityGt,
            Method::DensityFitted,
            Method::NnVariant(NnKind::Max),
            Method::EndpointGt(NnKind::Min),
            Method::RelaxExactScore,
            Method::RelaxKdeScore,
        ];
        c.method_components = 3;
        let a = run_convergence(&c, &Cache::disabled()).unwrap();
        assert_eq!(a.rows.len(), 2 * 7 * 2);
        for r in &a.rows {
            assert!(r.mean_lpr.is_finite(), "{r:?}");
            assert!(r.min_lpr >= -1e-6, "{r:?}");
            assert_eq!(r.pairs, 6);
        }
        let b = run_convergence(&c, &Cache::disabled()).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        // relaxation from the density graph path beats the path itself
        for n in [200, 400] {
            let relax = a.find("gmm3", Method::RelaxExactScore, BetaPolicy::Fixed(1.0), n).unwrap();
            let graph = a.find("gmm3", Method::DensityGt, BetaPolicy::Fixed(1.0), n).unwrap();
            assert!(relax.mean_lpr < graph.mean_lpr);
        }
    }

    #[test]
    fn cached_ground_truth_gives_identical_tables() {
        let c = ExperimentConfig {
            datasets: vec![DatasetKind::Gmm3],
            sample_sizes: vec![300],
            ..small(Runner::Convergence)
        };
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path());
        let cold = run_convergence(&c, &cache).unwrap().to_tsv();
        let warm = run_convergence(&c, &cache).unwrap().to_tsv();
        assert_eq!(cold, warm);
        assert_eq!(cold, run_convergence(&c, &Cache::disabled()).unwrap().to_tsv());
    }

    #[test]
    fn two_dimensional_rows_match_the_convergence_runner() {
        let mut dims = small(Runner::Dims);
        dims.beta = vec![BetaPolicy::Fixed(1.0)];
        dims.methods = vec![Method::DensityGt];
        let d = run_dimension_scaling(&dims, &Cache::disabled()).unwrap();
        let conv = ExperimentConfig {
            datasets: vec![DatasetKind::StandardNormal { dim: 2 }],
            sample_sizes: vec![400],
            methods: vec![Method::DensityGt],
            ..small(Runner::Convergence)
        };
        let c = run_convergence(&conv, &Cache::disabled()).unwrap();
        let a = d.find("standard_normal_2d", Method::DensityGt, BetaPolicy::Fixed(1.0), 2).unwrap();
        let b = c.find("standard_normal_2d", Method::DensityGt, BetaPolicy::Fixed(1.0), 400).unwrap();
        assert_eq!(a.mean_lpr, b.mean_lpr);
        assert_eq!(a.std_err, b.std_err);
    }

    #[test]
    fn sparse_graphs_are_reported() {
        let c = ExperimentConfig {
            datasets: vec![DatasetKind::Gmm3],
            sample_sizes: vec![200],
            k: Some(1),
            pairs: 20,
            ..small(Runner::Convergence)
        };
        assert!(matches!(run_convergence(&c, &Cache::disabled()), Err(Error::GraphTooSparse { .. })));
    }
}

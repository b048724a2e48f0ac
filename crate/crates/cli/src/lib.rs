//! Command-line front end. `run` parses arguments, executes one subcommand and
//! returns the process exit status.

use std::fs;
use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fermat::datasets::{sample, DatasetKind, DatasetSpec};
use fermat::density::{gmm_fit_em, EmConfig, GaussianMixture};
use fermat::experiments::{
    run_convergence, run_dimension_scaling, run_kde_tradeoff, run_scaled_geodesic_figure, BetaPolicy, Cache,
    ExperimentConfig, Runner, RunMetadata,
};
use fermat::geometry::{
    ground_truth_distance, path_length, relax, solve_geodesic, GroundTruthQuality, MetricParams, Path,
    RelaxationConfig, SolverConfig,
};
use fermat::graph::{build_knn, default_k, densify, dijkstra, EdgeWeighting, KnnGraph, NnKind};
use fermat::io;
use fermat::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "fermat", version, about = "Density-based distances: geodesics, graphs and evaluation studies")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; tables go to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw samples from a benchmark dataset.
    Sample {
        /// standard_normal_<D>d, gmm3, circle, spiral or two_spirals.
        #[arg(long)]
        dataset: DatasetKind,
        #[arg(long)]
        n: usize,
    },
    /// Fit a Gaussian mixture to a point table by EM.
    FitGmm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        components: usize,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Build a weighted kNN graph over a point table.
    BuildGraph {
        #[arg(long)]
        input: PathBuf,
        /// Neighbors per node (default max(10, ⌈2e ln n⌉)).
        #[arg(long)]
        k: Option<usize>,
        /// power, density, nn_variant:<kind> or endpoint:<kind>.
        #[arg(long, default_value = "power")]
        weighting: String,
        #[command(flatten)]
        metric: MetricArgs,
        /// Quadrature sub-segments per edge for `density`.
        #[arg(long, default_value_t = 8)]
        segments: usize,
        /// Exponent d of power and nearest-neighbor weights (default: ambient dimension).
        #[arg(long)]
        intrinsic_dim: Option<usize>,
    },
    /// Shortest path between two graph nodes.
    ShortestPath {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        /// Resample the node polyline to this many equal segments.
        #[arg(long)]
        segments: Option<usize>,
    },
    /// Relax a path toward a geodesic.
    Relax {
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        max_sweeps: Option<usize>,
        /// Displacement tolerance (default 1e-8 times the endpoint distance).
        #[arg(long)]
        tol: Option<f64>,
        /// Use the multilevel Newton solver before the sweeps.
        #[arg(long)]
        newton: bool,
    },
    /// Ground-truth distance between two points, with its geodesic.
    Distance {
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value_t = 1024)]
        n_points: usize,
        #[arg(long, default_value_t = 8)]
        segments_per_edge: usize,
    },
    /// Log path ratio of a path against the ground-truth distance.
    Lpr {
        #[arg(long)]
        path: PathBuf,
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, default_value_t = 1024)]
        n_points: usize,
        #[arg(long, default_value_t = 64)]
        segments_per_edge: usize,
    },
    /// Run an experiment.
    Exp {
        #[command(subcommand)]
        runner: ExpCommand,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::FitGmm { .. } => "fit-gmm",
            Command::BuildGraph { .. } => "build-graph",
            Command::ShortestPath { .. } => "shortest-path",
            Command::Relax { .. } => "relax",
            Command::Distance { .. } => "distance",
            Command::Lpr { .. } => "lpr",
            Command::Exp { .. } => "exp",
        }
    }
}

#[derive(Args, Debug)]
struct MetricArgs {
    /// GMM JSON file or dataset name whose reference density to use.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta: f64,
}

#[derive(Args, Debug)]
struct InitArgs {
    /// Initial path table.
    #[arg(long, conflicts_with_all = ["from", "to"])]
    path: Option<PathBuf>,
    /// Start of a straight initial path.
    #[arg(long, allow_hyphen_values = true, requires = "to")]
    from: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "from")]
    to: Option<String>,
    /// Segments of the relaxed path.
    #[arg(long, default_value_t = 256)]
    segments: usize,
}

#[derive(Args, Debug)]
struct ExpArgs {
    /// TOML file overriding the runner's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key = value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum ExpCommand {
    /// Mean LPR over a sample-size grid.
    Convergence(ExpArgs),
    /// Mean LPR over a dimension grid.
    Dims(ExpArgs),
    /// Rescaled standard-normal geodesics across dimensions.
    ScaledFig(ExpArgs),
    /// KDE bandwidth sweep.
    Kde(ExpArgs),
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.common.threads {
        Some(0) => Err(Error::InvalidParameter {
            field: "threads".into(),
            reason: "must be at least 1".into(),
        }),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidParameter {
                field: "threads".into(),
                reason: e.to_string(),
            }),
        },
        None => execute(&cli),
    };
    let outcome = outcome.and_then(|()| match (&cli.common.out, &cli.command) {
        // experiments write their own sidecar; lpr writes no table
        (Some(out), c) if !matches!(c, Command::Exp { .. } | Command::Lpr { .. }) => {
            write_file(&sibling(out, ".meta.json"), &command_metadata(c, &argv, cli.common.seed))
        }
        _ => Ok(()),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_file(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes `text` to `out`, or to stdout without one.
fn emit(out: Option<&FsPath>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn scalar(name: &str, value: impl std::fmt::Display) {
    println!("{name}\t{value}");
}

/// `out` with `suffix` appended to its file name.
fn sibling(out: &FsPath, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

/// Sidecar for single-shot commands: the invocation, seed and version.
fn command_metadata(command: &Command, argv: &[std::ffi::OsString], seed: u64) -> String {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let doc = serde_json::json!({
        "command": command.name(),
        "args": args,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "threads": rayon::current_num_threads(),
    });
    serde_json::to_string_pretty(&doc).expect("metadata serializes") + "\n"
}

fn metric_params(beta: f64) -> Result<MetricParams> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter {
            field: "beta".into(),
            reason: format!("must be positive, got {beta}"),
        });
    }
    MetricParams::new(beta)
}

/// A GMM document on disk, or the reference density of a named dataset.
fn load_model(spec: Option<&str>, seed: u64) -> Result<GaussianMixture> {
    let spec = spec.ok_or_else(|| Error::InvalidParameter {
        field: "model".into(),
        reason: "required: a mixture JSON file or a dataset name".into(),
    })?;
    let path = FsPath::new(spec);
    if path.is_file() {
        return io::read_gmm_json(&read(path)?);
    }
    let kind: DatasetKind = spec.parse()?;
    Cache::from_env().reference_model(&kind, 50, seed, fermat::datasets::REFERENCE_FIT_SAMPLES)
}

fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.common.seed;
    let out = cli.common.out.as_deref();
    match &cli.command {
        Command::Sample { dataset, n } => {
            let pts = sample(&DatasetSpec::new(*dataset, *n, seed))?;
            emit(out, &io::write_points(&pts))
        }
        Command::FitGmm {
            input,
            components,
            max_iters,
            tol,
        } => {
            let data = io::read_points(&read(input)?)?;
            let config = EmConfig {
                max_iters: *max_iters,
                tol: *tol,
                seed,
                ..EmConfig::default()
            };
            let fit = gmm_fit_em(&data, *components, &config)?;
            eprintln!(
                "iterations {} converged {} log-likelihood {:.6}",
                fit.log_likelihood.len(),
                fit.converged,
                fit.log_likelihood.last().copied().unwrap_or(f64::NAN)
            );
            emit(out, &io::write_gmm_json(&fit.model))
        }
        Command::BuildGraph {
            input,
            k,
            weighting,
            metric,
            segments,
            intrinsic_dim,
        } => {
            let data = io::read_points(&read(input)?)?;
            let n = data.len();
            let d = intrinsic_dim.unwrap_or(data.dim());
            let k = k.unwrap_or_else(|| default_k(n).min(n.saturating_sub(1)));
            let beta = metric.beta;
            metric_params(beta)?;
            let base = build_knn(data, k)?;
            let model;
            let scheme = if weighting == "power" {
                EdgeWeighting::PowerWeighted { beta, intrinsic_dim: d }
            } else if weighting == "density" {
                model = load_model(metric.model.as_deref(), seed)?;
                EdgeWeighting::DensityQuadrature {
                    model: &model,
                    beta,
                    segments: *segments,
                }
            } else if let Some(kind) = weighting.strip_prefix("nn_variant:") {
                EdgeWeighting::NnVariant {
                    kind: kind.parse::<NnKind>()?,
                    beta,
                    intrinsic_dim: d,
                }
            } else if let Some(kind) = weighting.strip_prefix("endpoint:") {
                model = load_model(metric.model.as_deref(), seed)?;
                EdgeWeighting::EndpointDensity {
                    kind: kind.parse::<NnKind>()?,
                    model: &model,
                    beta,
                }
            } else {
                return Err(Error::InvalidParameter {
                    field: "weighting".into(),
                    reason: format!("unknown scheme `{weighting}`"),
                });
            };
            let graph = base.reweighted(&scheme)?;
            eprintln!("nodes {} edges {}", graph.len(), graph.edge_count());
            emit(out, &io::write_graph_json(&graph))
        }
        Command::ShortestPath {
            graph,
            from,
            to,
            segments,
        } => {
            let g: KnnGraph = io::read_graph_json(&read(graph)?)?;
            let gp = dijkstra(&g, *from, *to)?;
            scalar("log_distance", format!("{:.12e}", gp.log_distance.ln()));
            scalar("hops", gp.nodes.len() - 1);
            let path = match segments {
                Some(s) => densify(&gp, &g, *s)?,
                None => {
                    let rows: Vec<&[f64]> = gp.nodes.iter().map(|&l| g.nodes().row(l)).collect();
                    if rows.len() < 2 {
                        return Ok(());
                    }
                    Path::new(fermat::Points::from_rows(&rows)?)?
                }
            };
            emit(out, &io::write_path(&path))
        }
        Command::Relax {
            init,
            metric,
            max_sweeps,
            tol,
            newton,
        } => {
            let params = metric_params(metric.beta)?;
            let model = load_model(metric.model.as_deref(), seed)?;
            let start = match (&init.path, &init.from, &init.to) {
                (Some(p), _, _) => fermat::geometry::resample_uniform(&io::read_path(&read(p)?)?, init.segments)?,
                (None, Some(a), Some(b)) => Path::straight_line(&io::parse_point(a)?, &io::parse_point(b)?, init.segments)?,
                _ => {
                    return Err(Error::InvalidParameter {
                        field: "path".into(),
                        reason: "give --path or both --from and --to".into(),
                    })
                }
            };
            let defaults = RelaxationConfig::for_path(&start, seed);
            let (path, report) = if *newton {
                let config = SolverConfig {
                    max_sweeps: *max_sweeps,
                    tol_factor: tol.map_or(1e-8, |t| t / defaults.tol * 1e-8),
                    ..SolverConfig::new(init.segments, seed)
                };
                solve_geodesic(&start, &model, params, &config)?
            } else {
                let config = RelaxationConfig {
                    max_sweeps: max_sweeps.unwrap_or(defaults.max_sweeps),
                    tol: tol.unwrap_or(defaults.tol),
                    seed,
                };
                relax(&start, &model, params, &config)?
            };
            if !report.converged {
                eprintln!("warning: not converged after {} sweeps", report.sweeps_used);
            }
            scalar("converged", report.converged);
            scalar("sweeps", report.sweeps_used);
            scalar("max_displacement", format!("{:.6e}", report.final_max_displacement));
            scalar("log_length", format!("{:.12e}", path_length(&path, &model, params, 8)?.ln()));
            emit(out, &io::write_path(&path))
        }
        Command::Distance {
            from,
            to,
            metric,
            n_points,
            segments_per_edge,
        } => {
            let params = metric_params(metric.beta)?;
            let model = load_model(metric.model.as_deref(), seed)?;
            let quality = GroundTruthQuality {
                n_points: *n_points,
                segments_per_edge: *segments_per_edge,
                seed,
                ..GroundTruthQuality::default()
            };
            let gt = ground_truth_distance(&io::parse_point(from)?, &io::parse_point(to)?, &model, params, &quality, None)?;
            scalar("log_distance", format!("{:.12e}", gt.log_distance.ln()));
            emit(out, &io::write_path(&gt.geodesic))
        }
        Command::Lpr {
            path,
            metric,
            n_points,
            segments_per_edge,
        } => {
            let params = metric_params(metric.beta)?;
            let model = load_model(metric.model.as_deref(), seed)?;
            let p = io::read_path(&read(path)?)?;
            let quality = GroundTruthQuality {
                n_points: *n_points,
                seed,
                ..GroundTruthQuality::default()
            };
            // the path itself is a candidate start for the ground truth
            let init = fermat::geometry::resample_uniform(&p, *n_points)?;
            let gt = fermat::geometry::GroundTruth::best_of(p.start(), p.end(), &model, params, &quality, &[init])?;
            let v = fermat::geometry::lpr(&p, &model, params, &gt, *segments_per_edge)?;
            scalar("lpr", format!("{v:.12e}"));
            scalar("log_distance", format!("{:.12e}", gt.log_distance.ln()));
            Ok(())
        }
        Command::Exp { runner } => run_experiment(runner, &cli.common),
    }
}

fn run_experiment(cmd: &ExpCommand, common: &Common) -> Result<()> {
    let (runner, args) = match cmd {
        ExpCommand::Convergence(a) => (Runner::Convergence, a),
        ExpCommand::Dims(a) => (Runner::Dims, a),
        ExpCommand::ScaledFig(a) => (Runner::ScaledFig, a),
        ExpCommand::Kde(a) => (Runner::Kde, a),
    };
    let text = args.config.as_deref().map(read).transpose()?;
    let mut overrides = args.overrides.clone();
    overrides.push(format!("seed = {}", common.seed));
    let mut config = ExperimentConfig::load(runner, text.as_deref(), &overrides)?;
    if let Some(o) = &common.out {
        config.output = Some(o.clone());
    }
    if args.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let out = config.output.clone();
    let out = out.as_deref();
    let cache = Cache::from_env();
    let started = Instant::now();
    let mut row_times = Vec::new();
    match runner {
        Runner::Convergence | Runner::Dims => {
            let table = if runner == Runner::Convergence {
                run_convergence(&config, &cache)?
            } else {
                run_dimension_scaling(&config, &cache)?
            };
            row_times = table.rows.iter().map(|r| r.wall_seconds).collect();
            emit(out, &table.to_tsv())?;
        }
        Runner::ScaledFig => {
            let fig = run_scaled_geodesic_figure(&config)?;
            let policies: Vec<BetaPolicy> = config.beta.clone();
            let deviations = fig.deviations_tsv(&policies);
            match out {
                Some(p) => {
                    write_file(p, &fig.to_tsv())?;
                    write_file(&sibling(p, ".deviations.tsv"), &deviations)?;
                }
                None => emit(None, &format!("{}\n{}", fig.to_tsv(), deviations))?,
            }
        }
        Runner::Kde => {
            let sweep = run_kde_tradeoff(&config)?;
            match out {
                Some(p) => {
                    write_file(p, &sweep.to_tsv())?;
                    write_file(&sibling(p, ".summary.tsv"), &sweep.summary_tsv())?;
                }
                None => emit(None, &format!("{}\n{}", sweep.to_tsv(), sweep.summary_tsv()))?,
            }
        }
    }
    if let Some(p) = out {
        let meta = RunMetadata::new(runner.name(), &config, started.elapsed().as_secs_f64(), row_times);
        write_file(&sibling(p, ".meta.json"), &meta.to_json())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(FsPath::new("out/conv.tsv"), ".meta.json"), PathBuf::from("out/conv.tsv.meta.json"));
    }

    #[test]
    fn beta_must_be_positive() {
        let e = metric_params(0.0).unwrap_err().to_string();
        assert!(e.contains("beta"));
        assert!(metric_params(-1.0).is_err());
    }
}

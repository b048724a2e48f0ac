//! Result tables (tab-separated, one header row) and the run metadata sidecar.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{BetaPolicy, ExperimentConfig, Method};
use crate::error::{Error, Result};

/// What the `grid` column of a row counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    SampleSize,
    Dimension,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::SampleSize => "n",
            Axis::Dimension => "dim",
        }
    }
}

/// Summary of one (dataset, method, β policy, grid point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub beta_policy: BetaPolicy,
    pub beta: f64,
    pub axis: Axis,
    pub grid: usize,
    pub pairs: usize,
    /// Pairs whose endpoints were not connected in the graph.
    pub skipped: usize,
    /// Pairs lost to a ground-truth or relaxation failure.
    pub failed: usize,
    pub mean_lpr: f64,
    pub std_err: f64,
    pub min_lpr: f64,
    /// Not written to the table, so tables stay reproducible byte for byte.
    #[serde(skip)]
    pub wall_seconds: f64,
}

const HEADER: [&str; 12] = [
    "dataset",
    "method",
    "beta_policy",
    "beta",
    "axis",
    "grid",
    "pairs",
    "skipped",
    "failed",
    "mean_lpr",
    "std_err",
    "min_lpr",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn float(v: f64) -> String {
    format!("{v:.9e}")
}

impl ResultTable {
    pub fn find(&self, dataset: &str, method: Method, beta_policy: BetaPolicy, grid: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.dataset == dataset && r.method == method && r.beta_policy == beta_policy && r.grid == grid
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = HEADER.join("\t");
        out.push('\n');
        for r in &self.rows {
            let policy = match r.beta_policy {
                BetaPolicy::Fixed(_) => "fixed",
                BetaPolicy::Scaled => "scaled",
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.dataset,
                r.method,
                policy,
                float(r.beta),
                r.axis.name(),
                r.grid,
                r.pairs,
                r.skipped,
                r.failed,
                float(r.mean_lpr),
                float(r.std_err),
                float(r.min_lpr),
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::parse("result table", format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.split('\t').eq(HEADER) => {}
            _ => return Err(Error::parse("result table", "missing or unexpected header")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != HEADER.len() {
                return Err(bad(lineno, format!("{} fields, expected {}", f.len(), HEADER.len())));
            }
            let num = |j: usize| -> Result<f64> { f[j].parse().map_err(|_| bad(lineno, format!("bad number `{}`", f[j]))) };
            let int = |j: usize| -> Result<usize> { f[j].parse().map_err(|_| bad(lineno, format!("bad count `{}`", f[j]))) };
            let beta = num(3)?;
            let beta_policy = match f[2] {
                "fixed" => BetaPolicy::Fixed(beta),
                "scaled" => BetaPolicy::Scaled,
                other => return Err(bad(lineno, format!("bad beta policy `{other}`"))),
            };
            let axis = match f[4] {
                "n" => Axis::SampleSize,
                "dim" => Axis::Dimension,
                other => return Err(bad(lineno, format!("bad axis `{other}`"))),
            };
            rows.push(ResultRow {
                dataset: f[0].to_string(),
                method: f[1].parse()?,
                beta_policy,
                beta,
                axis,
                grid: int(5)?,
                pairs: int(6)?,
                skipped: int(7)?,
                failed: int(8)?,
                mean_lpr: num(9)?,
                std_err: num(10)?,
                min_lpr: num(11)?,
                wall_seconds: 0.0,
            });
        }
        Ok(ResultTable { rows })
    }
}

/// Sidecar written next to every result file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub runner: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub wall_seconds: f64,
    /// Wall time of each row, in table order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_wall_seconds: Vec<f64>,
}

impl RunMetadata {
    pub fn new(runner: &str, config: &ExperimentConfig, wall_seconds: f64, row_wall_seconds: Vec<f64>) -> Self {
        RunMetadata {
            runner: runner.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            threads: rayon::current_num_threads(),
            config: config.clone(),
            wall_seconds,
            row_wall_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NnKind;

    fn row(method: Method, policy: BetaPolicy, grid: usize, mean: f64) -> ResultRow {
        ResultRow {
            dataset: "gmm3".into(),
            method,
            beta_policy: policy,
            beta: policy.value(2),
            axis: Axis::SampleSize,
            grid,
            pairs: 10,
            skipped: 1,
            failed: 0,
            mean_lpr: mean,
            std_err: 0.001,
            min_lpr: 1e-7,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn tsv_round_trip() {
        let t = ResultTable {
            rows: vec![
                row(Method::Power, BetaPolicy::Fixed(1.0), 500, 0.12345678901),
                row(Method::NnVariant(NnKind::Min), BetaPolicy::Scaled, 2000, 1.0 / 3.0),
            ],
        };
        let text = t.to_tsv();
        assert_eq!(text.lines().count(), 3);
        let back = ResultTable::from_tsv(&text).unwrap();
        assert_eq!(back.to_tsv(), text);
        assert_eq!(back.rows[1].method, Method::NnVariant(NnKind::Min));
        assert!(back.find("gmm3", Method::Power, BetaPolicy::Fixed(1.0), 500).is_some());
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(ResultTable::from_tsv("").is_err());
        assert!(ResultTable::from_tsv("a\tb\n").is_err());
        let mut text = ResultTable { rows: vec![row(Method::Power, BetaPolicy::Fixed(1.0), 5, 0.5)] }.to_tsv();
        text = text.replace("power", "teleport");
        assert!(ResultTable::from_tsv(&text).is_err());
    }
}

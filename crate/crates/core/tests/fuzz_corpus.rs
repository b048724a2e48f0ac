//! Replays the checked-in fuzz seeds through the parsers on stable, with the
//! same round-trip checks the fuzz targets make.

use std::fs;
use std::path::PathBuf;

use fermat::density::ScoreFunction;
use fermat::experiments::{ExperimentConfig, ResultTable, Runner};
use fermat::io;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter_map(|p| fs::read(&p).ok().map(|b| (p, String::from_utf8_lossy(&b).into_owned())))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn point_tables() {
    let mut accepted = 0;
    for (path, text) in seeds("point_table") {
        if let Ok(points) = io::read_points(&text) {
            accepted += 1;
            assert!(points.is_finite(), "{}", path.display());
            assert_eq!(io::read_points(&io::write_points(&points)).unwrap(), points);
        }
        let _ = io::read_path(&text);
    }
    assert!(accepted >= 3);
}

#[test]
fn point_literals() {
    let results: Vec<bool> = seeds("point_literal").iter().map(|(_, t)| io::parse_point(t).is_ok()).collect();
    assert!(results.contains(&true) && results.contains(&false));
}

#[test]
fn mixture_documents() {
    let mut accepted = 0;
    for (path, text) in seeds("gmm_document") {
        if let Ok(model) = io::read_gmm_json(&text) {
            accepted += 1;
            let again = io::read_gmm_json(&io::write_gmm_json(&model)).unwrap();
            assert_eq!(again.dim(), model.dim(), "{}", path.display());
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn graph_documents() {
    for (_, text) in seeds("graph_document") {
        let g = io::read_graph_json(&text).unwrap();
        assert!(fermat::graph::dijkstra(&g, 0, g.len() - 1).is_ok());
        assert_eq!(io::read_graph_json(&io::write_graph_json(&g)).unwrap().edge_count(), g.edge_count());
    }
}

#[test]
fn experiment_configs() {
    let mut accepted = 0;
    for (path, text) in seeds("experiment_config") {
        for runner in Runner::ALL {
            if let Ok(c) = ExperimentConfig::load(runner, Some(&text), &[]) {
                accepted += 1;
                assert_eq!(ExperimentConfig::load(runner, Some(&c.to_toml()), &[]).unwrap(), c, "{}", path.display());
            }
        }
    }
    assert!(accepted > 0);
}

#[test]
fn result_tables() {
    let mut accepted = 0;
    for (_, text) in seeds("result_table") {
        if let Ok(t) = ResultTable::from_tsv(&text) {
            accepted += 1;
            assert_eq!(t.to_tsv(), text);
        }
    }
    assert_eq!(accepted, 1);
}

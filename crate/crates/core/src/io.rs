//! Text formats: point tables, point literals and JSON documents.
//!
//! A point table has one point per line with coordinates separated by tabs,
//! commas or spaces. Blank lines and lines starting with `#` are ignored, and
//! the first remaining line may be a header of column names.

use std::fmt::Write as _;

use crate::density::GaussianMixture;
use crate::error::{Error, Result};
use crate::geometry::Path;
use crate::graph::{GraphDocument, KnnGraph};
use crate::points::Points;

fn parse_number(what: &'static str, token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(what, format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(what, format!("`{token}` is not finite")));
    }
    Ok(v)
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == '\t' || c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

/// Parses a point literal such as `1.5,-2` or `(1.5, -2)`.
pub fn parse_point(literal: &str) -> Result<Vec<f64>> {
    let mut s = literal.trim();
    for (open, close) in [('(', ')'), ('[', ']')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            s = inner.trim();
            break;
        }
    }
    if s.is_empty() {
        return Err(Error::parse("point", "empty literal"));
    }
    s.split(',')
        .map(|t| parse_number("point", t.trim()))
        .collect()
}

/// Parses a point table.
pub fn read_points(text: &str) -> Result<Points> {
    let mut dim = None;
    let mut data = Vec::new();
    let mut seen_data_line = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = split_fields(line).collect();
        if !seen_data_line {
            seen_data_line = true;
            if fields.iter().any(|t| t.parse::<f64>().is_err()) {
                // header row
                continue;
            }
        }
        match dim {
            None => dim = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(Error::parse(
                    "point table",
                    format!("line {}: {} columns, expected {d}", lineno + 1, fields.len()),
                ))
            }
            _ => {}
        }
        for t in fields {
            data.push(parse_number("point table", t).map_err(|e| match e {
                Error::Parse { message, .. } => {
                    Error::parse("point table", format!("line {}: {message}", lineno + 1))
                }
                other => other,
            })?);
        }
    }
    let dim = dim.ok_or_else(|| Error::parse("point table", "no data rows"))?;
    Points::new(dim, data)
}

/// Tab-separated table with an `x0 x1 ...` header.
pub fn write_points(points: &Points) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..points.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    for row in points.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push('\t');
            }
            write!(out, "{v}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn read_path(text: &str) -> Result<Path> {
    Path::new(read_points(text)?)
}

pub fn write_path(path: &Path) -> String {
    write_points(path.points())
}

pub fn read_gmm_json(text: &str) -> Result<GaussianMixture> {
    serde_json::from_str(text).map_err(|e| Error::parse("mixture document", e))
}

pub fn write_gmm_json(model: &GaussianMixture) -> String {
    serde_json::to_string_pretty(model).expect("mixture serializes")
}

pub fn read_graph_json(text: &str) -> Result<KnnGraph> {
    let doc: GraphDocument =
        serde_json::from_str(text).map_err(|e| Error::parse("graph document", e))?;
    KnnGraph::from_document(doc)
}

pub fn write_graph_json(graph: &KnnGraph) -> String {
    serde_json::to_string(&graph.to_document()).expect("graph serializes")
}

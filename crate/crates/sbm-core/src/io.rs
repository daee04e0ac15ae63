//! Plain-text file formats.
//!
//! - graph:     first line `N M`, then one `i j` edge per line
//!              (0-based, i < j, LF endings)
//! - labels:    one integer per line, 1-based classes
//! - model:     `q <int>`, `priors <q floats>`, then q `affinity <row>`
//!              lines with the scaled matrix
//! - marginals: N lines of q tab-separated reals
//! - embedding: header `d eigenvalues: λ1 ... λd`, then n coordinate rows
//! - reports:   `key=value` lines

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::engine::{EngineReport, Marginals};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::ScoreReport;
use crate::model::{BlockModel, LabelAssignment};
use crate::spectral::Embedding;

pub fn write_graph(graph: &Graph, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", graph.n_nodes(), graph.n_edges());
    for (i, j) in graph.undirected_edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty graph file".into()))?;
    let mut parts = header.split_whitespace();
    let n: usize = parse_field(parts.next(), "node count")?;
    let m: usize = parse_field(parts.next(), "edge count")?;
    let mut edges = Vec::with_capacity(m);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let i: u32 = parse_field(parts.next(), "edge endpoint")?;
        let j: u32 = parse_field(parts.next(), "edge endpoint")?;
        if i >= j {
            return Err(Error::Parse(format!(
                "edge line {}: expected i < j, got {i} {j}",
                lineno + 2
            )));
        }
        edges.push((i, j));
    }
    if edges.len() != m {
        return Err(Error::Parse(format!(
            "header promises {m} edges, file has {}",
            edges.len()
        )));
    }
    Graph::from_edges(n, &edges)
}

pub fn write_labels(labels: &LabelAssignment, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..labels.len() {
        let _ = writeln!(out, "{}", labels.label(i) + 1);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: &Path, q: usize) -> Result<LabelAssignment> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: i64 = line
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("label line {}: not an integer", lineno + 1)))?;
        if v < 1 || v as usize > q {
            return Err(Error::Parse(format!(
                "label line {}: {v} outside 1..={q}",
                lineno + 1
            )));
        }
        labels.push((v - 1) as u32);
    }
    LabelAssignment::new(labels, q)
}

pub fn write_model(model: &BlockModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "q {}", model.q());
    let _ = write!(out, "priors");
    for p in model.priors() {
        let _ = write!(out, " {p}");
    }
    let _ = writeln!(out);
    for r in 0..model.q() {
        let _ = write!(out, "affinity");
        for s in 0..model.q() {
            let _ = write!(out, " {}", model.c(r, s));
        }
        let _ = writeln!(out);
    }
    fs::write(path, out)?;
    Ok(())
}

/// The file stores the scaled affinity only; `n_scale` supplies the N
/// the scaling refers to (usually the graph the model is used with).
pub fn read_model(path: &Path, n_scale: usize) -> Result<BlockModel> {
    let text = fs::read_to_string(path)?;
    let mut q: Option<usize> = None;
    let mut priors: Option<Vec<f64>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).ok_or_else(|| {
            Error::Parse(format!("model line {}: missing value", lineno + 1))
        })?;
        match key {
            "q" => {
                q = Some(rest.trim().parse().map_err(|_| {
                    Error::Parse(format!("model line {}: bad q", lineno + 1))
                })?)
            }
            "priors" => priors = Some(parse_floats(rest, lineno)?),
            "affinity" => rows.push(parse_floats(rest, lineno)?),
            other => {
                return Err(Error::Parse(format!(
                    "model line {}: unknown key `{other}`",
                    lineno + 1
                )))
            }
        }
    }
    let q = q.ok_or_else(|| Error::Parse("model file missing `q`".into()))?;
    let priors = priors.ok_or_else(|| Error::Parse("model file missing `priors`".into()))?;
    if priors.len() != q {
        return Err(Error::Parse(format!(
            "model file: {} priors for q = {q}",
            priors.len()
        )));
    }
    if rows.len() != q || rows.iter().any(|r| r.len() != q) {
        return Err(Error::Parse(format!(
            "model file: affinity must be {q} rows of {q} entries"
        )));
    }
    let affinity: Vec<f64> = rows.into_iter().flatten().collect();
    BlockModel::new(priors, affinity, n_scale)
}

fn parse_floats(s: &str, lineno: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse(format!("model line {}: bad number `{tok}`", lineno + 1)))
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

pub fn write_marginals(marginals: &Marginals, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..marginals.n() {
        let row = marginals.row(i);
        for (s, v) in row.iter().enumerate() {
            if s > 0 {
                out.push('\t');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_marginals(path: &Path) -> Result<Marginals> {
    let text = fs::read_to_string(path)?;
    let mut q = 0usize;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("marginals line {}: bad number", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if q == 0 {
            q = row.len();
        } else if row.len() != q {
            return Err(Error::Parse(format!(
                "marginals line {}: expected {q} entries",
                lineno + 1
            )));
        }
        data.extend(row);
    }
    if q == 0 {
        return Err(Error::Parse("empty marginals file".into()));
    }
    Ok(Marginals::from_rows(data, q))
}

pub fn write_embedding(embedding: &Embedding, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = write!(out, "{} eigenvalues:", embedding.d);
    for lam in &embedding.eigenvalues {
        let _ = write!(out, " {lam}");
    }
    out.push('\n');
    for i in 0..embedding.n {
        for c in 0..embedding.d {
            if c > 0 {
                out.push('\t');
            }
            let _ = write!(out, "{}", embedding.coords[i * embedding.d + c]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn engine_report_text(report: &EngineReport) -> String {
    format!(
        "converged={}\niterations={}\nfinal_delta={}\nfree_energy={}\nwall_time={}\n",
        report.converged,
        report.iterations,
        report.final_delta,
        report.free_energy,
        report.wall_time
    )
}

pub fn score_report_text(report: &ScoreReport) -> String {
    let perm: Vec<String> = report
        .best_permutation
        .iter()
        .map(|p| (p + 1).to_string())
        .collect();
    format!(
        "overlap={}\nconfidence={}\nchance={}\nillusive_gap={}\nbest_permutation={}\n",
        report.overlap,
        report.confidence,
        report.chance,
        report.illusive_gap,
        perm.join(" ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn graph_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (0, 4)]).unwrap();
        write_graph(&g, &path).unwrap();
        let g2 = read_graph(&path).unwrap();
        assert_eq!(g2.n_nodes(), 5);
        assert!(g.undirected_edges().eq(g2.undirected_edges()));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("5 3\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn labels_round_trip_one_based() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let t = LabelAssignment::new(vec![0, 2, 1], 3).unwrap();
        write_labels(&t, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "1\n3\n2\n");
        let t2 = read_labels(&path, 3).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn model_round_trip_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = BlockModel::new(
            vec![0.25, 0.75],
            vec![16.123456789012345, 4.0, 4.0, 1.5],
            1000,
        )
        .unwrap();
        write_model(&m, &path).unwrap();
        let m2 = read_model(&path, 1000).unwrap();
        assert_eq!(m.priors(), m2.priors());
        assert_eq!(m.affinity(), m2.affinity());
    }

    #[test]
    fn rejects_unsorted_edge_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "3 1\n2 1\n").unwrap();
        assert!(read_graph(&path).is_err());
    }

    #[test]
    fn marginals_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("psi.txt");
        let m = Marginals::from_rows(vec![0.25, 0.75, 0.5, 0.5], 2);
        write_marginals(&m, &path).unwrap();
        let m2 = read_marginals(&path).unwrap();
        assert_eq!(m.data(), m2.data());
    }
}

//! Brute-force posterior oracle for small instances.
//!
//! Sums the complete-data likelihood over all q^N assignments. Only
//! useful as a reference for testing the approximate engines; guarded
//! so it cannot be invoked on instances where enumeration is hopeless.

use crate::engine::Marginals;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::BlockModel;

const MAX_ASSIGNMENTS: f64 = 1e7;

struct Tables {
    q: usize,
    log_prior: Vec<f64>,
    log_edge: Vec<f64>,
    log_non_edge: Vec<f64>,
}

fn tables(graph: &Graph, model: &BlockModel) -> Tables {
    let q = model.q();
    let n = graph.n_nodes() as f64;
    let floor = 1e-300f64;
    let log_prior = model
        .priors()
        .iter()
        .map(|&p| p.max(floor).ln())
        .collect();
    let mut log_edge = vec![0.0; q * q];
    let mut log_non_edge = vec![0.0; q * q];
    for r in 0..q {
        for s in 0..q {
            let p = (model.c(r, s) / n).clamp(0.0, 1.0);
            log_edge[r * q + s] = p.max(floor).ln();
            log_non_edge[r * q + s] = (1.0 - p).max(floor).ln();
        }
    }
    Tables {
        q,
        log_prior,
        log_edge,
        log_non_edge,
    }
}

fn log_weight(graph: &Graph, t: &[usize], tab: &Tables) -> f64 {
    let n = graph.n_nodes();
    let q = tab.q;
    let mut lw = 0.0;
    for i in 0..n {
        lw += tab.log_prior[t[i]];
        for j in (i + 1)..n {
            let idx = t[i] * q + t[j];
            lw += if graph.has_edge(i, j) {
                tab.log_edge[idx]
            } else {
                tab.log_non_edge[idx]
            };
        }
    }
    lw
}

fn check_size(n: usize, q: usize) -> Result<()> {
    let total = (q as f64).powi(n as i32);
    if total > MAX_ASSIGNMENTS {
        return Err(Error::TooLarge(format!(
            "q^N = {q}^{n} exceeds the {MAX_ASSIGNMENTS:.0} assignment budget for exhaustive summation"
        )));
    }
    Ok(())
}

/// Advance a base-q odometer; returns false once it wraps around.
fn advance(t: &mut [usize], q: usize) -> bool {
    for d in t.iter_mut() {
        *d += 1;
        if *d < q {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exact posterior marginals P(t_i = r | A, θ) by exhaustive summation.
pub fn exact_marginals(graph: &Graph, model: &BlockModel) -> Result<Marginals> {
    let n = graph.n_nodes();
    let q = model.q();
    check_size(n, q)?;
    if n == 0 {
        return Ok(Marginals::from_rows(Vec::new(), q));
    }
    let tab = tables(graph, model);

    // two passes: a max-shift first so the accumulation cannot overflow
    // or underflow even for adversarially scaled models
    let mut max_lw = f64::NEG_INFINITY;
    let mut t = vec![0usize; n];
    loop {
        max_lw = max_lw.max(log_weight(graph, &t, &tab));
        if !advance(&mut t, q) {
            break;
        }
    }
    if !max_lw.is_finite() {
        return Err(Error::Numerical(
            "all assignments have zero likelihood".into(),
        ));
    }

    let mut acc = vec![0.0f64; n * q];
    let mut total = 0.0f64;
    let mut t = vec![0usize; n];
    loop {
        let w = (log_weight(graph, &t, &tab) - max_lw).exp();
        total += w;
        for (i, &ti) in t.iter().enumerate() {
            acc[i * q + ti] += w;
        }
        if !advance(&mut t, q) {
            break;
        }
    }
    for v in &mut acc {
        *v /= total;
    }
    Ok(Marginals::from_rows(acc, q))
}

/// log Σ_t P(A, t | θ): the exact log-likelihood of the observed graph.
pub fn exact_log_likelihood(graph: &Graph, model: &BlockModel) -> Result<f64> {
    let n = graph.n_nodes();
    let q = model.q();
    check_size(n, q)?;
    if n == 0 {
        return Ok(0.0);
    }
    let tab = tables(graph, model);
    let mut max_lw = f64::NEG_INFINITY;
    let mut t = vec![0usize; n];
    loop {
        max_lw = max_lw.max(log_weight(graph, &t, &tab));
        if !advance(&mut t, q) {
            break;
        }
    }
    if !max_lw.is_finite() {
        return Err(Error::Numerical(
            "all assignments have zero likelihood".into(),
        ));
    }
    let mut total = 0.0f64;
    let mut t = vec![0usize; n];
    loop {
        total += (log_weight(graph, &t, &tab) - max_lw).exp();
        if !advance(&mut t, q) {
            break;
        }
    }
    Ok(max_lw + total.ln())
}

/// Complete-data log-likelihood log P(A, t | θ) for one assignment.
pub fn complete_data_log_likelihood(
    graph: &Graph,
    model: &BlockModel,
    labels: &crate::model::LabelAssignment,
) -> Result<f64> {
    if labels.len() != graph.n_nodes() {
        return Err(Error::InvalidInput("label/graph size mismatch".into()));
    }
    let tab = tables(graph, model);
    let t: Vec<usize> = (0..labels.len()).map(|i| labels.label(i)).collect();
    Ok(log_weight(graph, &t, &tab))
}

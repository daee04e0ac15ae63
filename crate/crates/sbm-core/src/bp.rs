//! Sparse belief propagation for block model inference.
//!
//! Messages live on directed edges; the non-edge interactions are folded
//! into a global external field that is adjusted incrementally whenever a
//! node's marginal changes, which keeps one sweep at O(M q²) despite the
//! underlying fully connected likelihood.
//!
//! Field arithmetic runs in log space: each directed edge caches
//! L^{k→i}_r = log Σ_s c_rs ψ^{k→i}_s, each node caches the sum of its
//! incoming L vectors, and a message update touches only the two caches
//! it invalidates. That makes a full pass over directed edges in an
//! arbitrary (here: freshly shuffled) order affordable; caches are
//! rebuilt from scratch periodically to stop floating-point drift.

use rand::seq::SliceRandom;
use std::time::Instant;

use crate::engine::{init_row, BeliefInit, EngineReport, EstepOptions, Marginals};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::BlockModel;
use crate::rng::{mix_seed, rng_from_seed, SeededRng};

/// Message entries are floored at this value before logs are taken, so a
/// legitimately vanishing Σ_s c_rs ψ_s (e.g. c_out = 0 against a hard
/// message) stays finite while preserving the argmax.
const MESSAGE_FLOOR: f64 = 1e-300;

/// Caches are recomputed from scratch every this many sweeps.
const REFRESH_EVERY: usize = 100;

/// One length-q probability vector per directed edge, indexed by the
/// graph's directed-edge slots so the reverse message is one lookup away.
#[derive(Debug, Clone)]
pub struct MessageSet {
    q: usize,
    data: Vec<f64>,
}

impl MessageSet {
    /// Wrap an externally built message table (flat 2M×q, normalized
    /// rows). Mainly useful for constructing synthetic states in tests
    /// and plug-in estimators.
    pub fn from_raw(data: Vec<f64>, q: usize) -> Self {
        assert!(q > 0 && data.len() % q == 0);
        MessageSet { q, data }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_messages(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn message(&self, e: usize) -> &[f64] {
        &self.data[e * self.q..(e + 1) * self.q]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest deviation of any message sum from one.
    pub fn max_sum_error(&self) -> f64 {
        (0..self.n_messages())
            .map(|e| (self.message(e).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Class relabeling, as in [`Marginals::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> MessageSet {
        assert_eq!(perm.len(), self.q);
        let m = self.n_messages();
        let mut data = vec![0.0; m * self.q];
        for e in 0..m {
            for r in 0..self.q {
                data[e * self.q + r] = self.data[e * self.q + perm[r]];
            }
        }
        MessageSet { q: self.q, data }
    }
}

/// Fresh messages for every directed edge of `graph`.
pub fn init_messages(
    graph: &Graph,
    model: &BlockModel,
    init: BeliefInit<'_>,
    seed: u64,
) -> Result<MessageSet> {
    let q = model.q();
    if let BeliefInit::FromLabels(t) = &init {
        if t.len() != graph.n_nodes() || t.q() != q {
            return Err(Error::InvalidInput(
                "label assignment does not match graph/model".into(),
            ));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; graph.n_directed() * q];
    for e in 0..graph.n_directed() {
        let src = graph.edge_source(e);
        init_row(&mut data[e * q..(e + 1) * q], &init, src, &mut rng);
    }
    Ok(MessageSet { q, data })
}

pub struct BpEngine<'a> {
    graph: &'a Graph,
    model: &'a BlockModel,
    q: usize,
    log_priors: Vec<f64>,
    /// ψ^{i→j}, flat 2M×q in directed-edge order.
    messages: Vec<f64>,
    /// L^{i→j}_r = log Σ_s c_rs ψ^{i→j}_s, same layout as messages.
    log_edge_field: Vec<f64>,
    /// H^i_r = Σ_{k∈∂i} L^{k→i}_r, flat N×q.
    node_field: Vec<f64>,
    /// Current marginals ψ^i, flat N×q.
    marginals: Vec<f64>,
    /// θ_r = (1/N) Σ_k Σ_s c_rs ψ^k_s.
    ext_field: Vec<f64>,
    order: Vec<u32>,
    rng: SeededRng,
    sweeps: usize,
}

impl<'a> BpEngine<'a> {
    /// Build an engine around an initial message set. The seed drives the
    /// per-sweep update order only.
    pub fn new(
        graph: &'a Graph,
        model: &'a BlockModel,
        messages: MessageSet,
        seed: u64,
    ) -> Result<Self> {
        let q = model.q();
        if messages.q() != q || messages.n_messages() != graph.n_directed() {
            return Err(Error::InvalidInput(
                "message set does not match graph/model".into(),
            ));
        }
        let n = graph.n_nodes();
        let log_priors = model
            .priors()
            .iter()
            .map(|&p| p.max(MESSAGE_FLOOR).ln())
            .collect();
        let mut engine = BpEngine {
            graph,
            model,
            q,
            log_priors,
            messages: messages.data,
            log_edge_field: vec![0.0; graph.n_directed() * q],
            node_field: vec![0.0; n * q],
            marginals: vec![0.0; n * q],
            ext_field: vec![0.0; q],
            order: (0..graph.n_nodes() as u32).collect(),
            rng: rng_from_seed(seed),
            sweeps: 0,
        };
        engine.rebuild_caches()?;
        Ok(engine)
    }

    fn log_sum_affinity(&self, msg: &[f64], out: &mut [f64]) {
        let q = self.q;
        let aff = self.model.affinity();
        for r in 0..q {
            let mut acc = 0.0;
            for s in 0..q {
                acc += aff[r * q + s] * msg[s].max(MESSAGE_FLOOR);
            }
            out[r] = acc.max(MESSAGE_FLOOR).ln();
        }
    }

    /// Recompute all caches from the messages. Marginals are rebuilt with
    /// a prior-weighted bootstrap for θ so the procedure needs nothing
    /// beyond the message set itself.
    fn rebuild_caches(&mut self) -> Result<()> {
        let q = self.q;
        let n = self.graph.n_nodes();
        let mut scratch = vec![0.0; q];
        for e in 0..self.graph.n_directed() {
            let msg = &self.messages[e * q..(e + 1) * q];
            self.log_sum_affinity(msg, &mut scratch);
            self.log_edge_field[e * q..(e + 1) * q].copy_from_slice(&scratch);
        }
        self.node_field.fill(0.0);
        for e in 0..self.graph.n_directed() {
            let j = self.graph.edge_target(e);
            for r in 0..q {
                self.node_field[j * q + r] += self.log_edge_field[e * q + r];
            }
        }
        // θ is computed once at the beginning, from the prior class
        // masses, and then maintained incrementally. The θ ↔ marginal
        // loop must NOT be iterated to self-consistency here: with
        // uninformative messages it is an unstable map whenever the
        // affinity contrast times the belief susceptibility exceeds one,
        // and iterating it condenses the class masses before the first
        // sweep.
        self.ext_field_from_dist(None);
        for i in 0..n {
            self.refresh_marginal(i)
                .map_err(|_| self.numerical_error_node(i))?;
        }
        self.ext_field_from_dist(Some(&self.marginals.clone()));
        Ok(())
    }

    /// Iterate the θ ↔ marginal self-consistency at fixed messages.
    /// Converged message states pin the marginals, so the map contracts
    /// there; if it instead starts diverging (soft states near the
    /// transition), keep the single-pass result.
    fn settle_marginals(&mut self) -> Result<()> {
        let q = self.q;
        let n = self.graph.n_nodes();
        let mut prev_diff = f64::INFINITY;
        let mut growth_streak = 0usize;
        let mut snapshot: Option<(Vec<f64>, Vec<f64>)> = None;
        for pass in 0..60 {
            for i in 0..n {
                self.refresh_marginal(i)
                    .map_err(|_| self.numerical_error_node(i))?;
            }
            let prev = self.ext_field.clone();
            self.ext_field_from_dist(Some(&self.marginals.clone()));
            if pass == 0 {
                snapshot = Some((self.marginals.clone(), self.ext_field.clone()));
            }
            let mut diff = 0.0f64;
            for r in 0..q {
                diff = diff.max((self.ext_field[r] - prev[r]).abs());
            }
            if diff < 1e-14 {
                return Ok(());
            }
            if diff > prev_diff {
                growth_streak += 1;
                if growth_streak >= 2 {
                    let (marg, theta) = snapshot.unwrap();
                    self.marginals = marg;
                    self.ext_field = theta;
                    return Ok(());
                }
            } else {
                growth_streak = 0;
            }
            prev_diff = diff;
        }
        Ok(())
    }

    /// θ_r from an explicit belief table, or from the priors when absent.
    fn ext_field_from_dist(&mut self, beliefs: Option<&[f64]>) {
        let q = self.q;
        let n = self.graph.n_nodes();
        let aff = self.model.affinity();
        let mut mass = vec![0.0; q];
        match beliefs {
            Some(b) => {
                for i in 0..n {
                    for s in 0..q {
                        mass[s] += b[i * q + s];
                    }
                }
            }
            None => {
                for s in 0..q {
                    mass[s] = n as f64 * self.model.priors()[s];
                }
            }
        }
        for r in 0..q {
            let mut acc = 0.0;
            for s in 0..q {
                acc += aff[r * q + s] * mass[s];
            }
            self.ext_field[r] = acc / n as f64;
        }
    }

    /// Recompute ψ^i from the node field; returns Err(()) on a non-finite
    /// normalizer. Does not touch θ.
    fn refresh_marginal(&mut self, i: usize) -> std::result::Result<(), ()> {
        let q = self.q;
        let mut best = f64::NEG_INFINITY;
        for r in 0..q {
            let h = self.log_priors[r] + self.node_field[i * q + r] - self.ext_field[r];
            if h > best {
                best = h;
            }
        }
        if !best.is_finite() {
            return Err(());
        }
        let mut sum = 0.0;
        for r in 0..q {
            let h = self.log_priors[r] + self.node_field[i * q + r] - self.ext_field[r];
            let w = (h - best).exp();
            self.marginals[i * q + r] = w;
            sum += w;
        }
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(());
        }
        for r in 0..q {
            self.marginals[i * q + r] /= sum;
        }
        Ok(())
    }

    fn numerical_error_node(&self, i: usize) -> Error {
        Error::Numerical(format!("non-finite field at node {i}"))
    }

    fn numerical_error_edge(&self, e: usize) -> Error {
        Error::Numerical(format!(
            "non-finite field on edge ({} -> {})",
            self.graph.edge_source(e),
            self.graph.edge_target(e)
        ))
    }

    /// One full pass over all directed edges grouped by source node, the
    /// node order freshly shuffled. Grouping keeps each node's outgoing
    /// messages mutually consistent (they all see the same incoming
    /// snapshot), which is what lets the planted mode win over partial
    /// class-merging fixed points; a fully edge-shuffled pass
    /// demonstrably quenches q = 4 instances into merged states.
    /// Returns the largest L∞ message change.
    pub fn sweep(&mut self, damping: f64) -> Result<f64> {
        let q = self.q;
        let n = self.graph.n_nodes() as f64;
        let aff = self.model.affinity();
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(&mut self.rng);
        let mut max_delta = 0.0f64;
        let mut new_msg = vec![0.0; q];
        let mut new_l = vec![0.0; q];
        let mut old_marg = vec![0.0; q];

        for &iu in &order {
            for e in self.graph.out_edges(iu as usize) {
            let i = self.graph.edge_source(e);
            let j = self.graph.edge_target(e);
            let erev = self.graph.reverse_edge(e);

            // h_r^{i→j} = H^i_r − L^{j→i}_r − θ_r, in log space
            let mut best = f64::NEG_INFINITY;
            for r in 0..q {
                let h = self.log_priors[r] + self.node_field[i * q + r]
                    - self.log_edge_field[erev * q + r]
                    - self.ext_field[r];
                new_msg[r] = h;
                if h > best {
                    best = h;
                }
            }
            if !best.is_finite() {
                self.order = order;
                return Err(self.numerical_error_edge(e));
            }
            let mut sum = 0.0;
            for r in 0..q {
                new_msg[r] = (new_msg[r] - best).exp();
                sum += new_msg[r];
            }
            if !(sum > 0.0) || !sum.is_finite() {
                self.order = order;
                return Err(self.numerical_error_edge(e));
            }
            let msg = &mut self.messages[e * q..(e + 1) * q];
            let mut damped_sum = 0.0;
            for r in 0..q {
                new_msg[r] = (1.0 - damping) * (new_msg[r] / sum) + damping * msg[r];
                damped_sum += new_msg[r];
            }
            for r in 0..q {
                new_msg[r] /= damped_sum;
                let d = (new_msg[r] - msg[r]).abs();
                if d > max_delta {
                    max_delta = d;
                }
                msg[r] = new_msg[r];
            }

            // refresh this edge's log field and the target's node field
            for r in 0..q {
                let mut acc = 0.0;
                for s in 0..q {
                    acc += aff[r * q + s] * new_msg[s].max(MESSAGE_FLOOR);
                }
                new_l[r] = acc.max(MESSAGE_FLOOR).ln();
            }
            for r in 0..q {
                self.node_field[j * q + r] += new_l[r] - self.log_edge_field[e * q + r];
                self.log_edge_field[e * q + r] = new_l[r];
            }

            // the target's marginal moved: keep θ in sync incrementally
            old_marg.copy_from_slice(&self.marginals[j * q..(j + 1) * q]);
            if self.refresh_marginal(j).is_err() {
                self.order = order;
                return Err(self.numerical_error_node(j));
            }
            for r in 0..q {
                let mut acc = 0.0;
                for s in 0..q {
                    acc += aff[r * q + s] * (self.marginals[j * q + s] - old_marg[s]);
                }
                self.ext_field[r] += acc / n;
            }
            }
        }
        self.order = order;
        self.sweeps += 1;
        if self.sweeps % REFRESH_EVERY == 0 {
            self.rebuild_from_current_marginals()?;
        }
        Ok(max_delta)
    }

    /// Drift guard: rebuild L, H and θ from the stored messages and
    /// marginals, then settle the marginals on the fresh fields.
    pub fn rebuild_from_current_marginals(&mut self) -> Result<()> {
        let q = self.q;
        let mut scratch = vec![0.0; q];
        for e in 0..self.graph.n_directed() {
            let msg = &self.messages[e * q..(e + 1) * q];
            self.log_sum_affinity(msg, &mut scratch);
            self.log_edge_field[e * q..(e + 1) * q].copy_from_slice(&scratch);
        }
        self.node_field.fill(0.0);
        for e in 0..self.graph.n_directed() {
            let j = self.graph.edge_target(e);
            for r in 0..q {
                self.node_field[j * q + r] += self.log_edge_field[e * q + r];
            }
        }
        self.ext_field_from_dist(Some(&self.marginals.clone()));
        self.settle_marginals()?;
        Ok(())
    }

    pub fn external_field(&self) -> &[f64] {
        &self.ext_field
    }

    /// From-scratch θ over the current marginals, for drift checks.
    pub fn external_field_recomputed(&self) -> Vec<f64> {
        let q = self.q;
        let n = self.graph.n_nodes();
        let aff = self.model.affinity();
        let mut mass = vec![0.0; q];
        for i in 0..n {
            for s in 0..q {
                mass[s] += self.marginals[i * q + s];
            }
        }
        let mut theta = vec![0.0; q];
        for r in 0..q {
            let mut acc = 0.0;
            for s in 0..q {
                acc += aff[r * q + s] * mass[s];
            }
            theta[r] = acc / n as f64;
        }
        theta
    }

    pub fn marginals(&self) -> Marginals {
        Marginals::from_rows(self.marginals.clone(), self.q)
    }

    pub fn messages(&self) -> MessageSet {
        MessageSet {
            q: self.q,
            data: self.messages.clone(),
        }
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    /// Bethe estimate of the per-node log-likelihood,
    /// F = (1/N) Σ_E log Z^{ij} − (1/N) Σ_i log Σ_s p_s e^{h^i_s} − ⟨k⟩/2.
    pub fn bethe_free_energy(&self) -> Result<f64> {
        let q = self.q;
        let n = self.graph.n_nodes();
        let aff = self.model.affinity();
        let mut edge_term = 0.0;
        for e in 0..self.graph.n_directed() {
            let i = self.graph.edge_source(e);
            let j = self.graph.edge_target(e);
            if i >= j {
                continue;
            }
            let erev = self.graph.reverse_edge(e);
            let mi = &self.messages[e * q..(e + 1) * q];
            let mj = &self.messages[erev * q..(erev + 1) * q];
            let mut z = 0.0;
            for r in 0..q {
                let mut acc = 0.0;
                for s in 0..q {
                    acc += aff[r * q + s] * mj[s];
                }
                z += mi[r] * acc;
            }
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::Numerical(format!(
                    "vanishing edge normalizer Z on edge ({i}, {j})"
                )));
            }
            edge_term += z.ln();
        }
        let mut node_term = 0.0;
        for i in 0..n {
            let mut best = f64::NEG_INFINITY;
            for r in 0..q {
                let h =
                    self.log_priors[r] + self.node_field[i * q + r] - self.ext_field[r];
                if h > best {
                    best = h;
                }
            }
            if !best.is_finite() {
                return Err(self.numerical_error_node(i));
            }
            let mut sum = 0.0;
            for r in 0..q {
                let h =
                    self.log_priors[r] + self.node_field[i * q + r] - self.ext_field[r];
                sum += (h - best).exp();
            }
            node_term += best + sum.ln();
        }
        let f = edge_term / n as f64 - node_term / n as f64 - self.graph.mean_degree() / 2.0;
        if !f.is_finite() {
            return Err(Error::Numerical("non-finite Bethe free energy".into()));
        }
        Ok(f)
    }
}

/// Run BP to convergence (or the iteration cap) and report marginals,
/// messages and run statistics. Non-convergence is flagged in the report,
/// not treated as an error.
pub fn run_estep(
    graph: &Graph,
    model: &BlockModel,
    opts: &EstepOptions,
    init: BeliefInit<'_>,
    seed: u64,
) -> Result<(Marginals, MessageSet, EngineReport)> {
    opts.validate()?;
    let start = Instant::now();
    let messages = init_messages(graph, model, init, mix_seed(seed, 1))?;
    let mut engine = BpEngine::new(graph, model, messages, mix_seed(seed, 2))?;
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < opts.max_iters {
        delta = engine.sweep(opts.damping)?;
        iterations += 1;
        if delta <= opts.tol {
            break;
        }
    }
    engine.rebuild_from_current_marginals()?;
    let free_energy = engine.bethe_free_energy()?;
    let report = EngineReport {
        converged: delta <= opts.tol,
        iterations,
        final_delta: delta,
        free_energy,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((engine.marginals(), engine.messages(), report))
}

/// Reference implementation of the dense-model update, which keeps a
/// message for every ordered pair and the exact (1−p_rs) non-edge
/// factors. O(N²q²) per sweep; only meant to cross-check the sparse
/// engine on small instances.
pub mod dense {
    use super::*;

    const MAX_DENSE_NODES: usize = 1000;

    pub fn dense_estep(
        graph: &Graph,
        model: &BlockModel,
        opts: &EstepOptions,
        seed: u64,
    ) -> Result<Marginals> {
        opts.validate()?;
        let n = graph.n_nodes();
        if n > MAX_DENSE_NODES {
            return Err(Error::TooLarge(format!(
                "dense reference path is limited to {MAX_DENSE_NODES} nodes, got {n}"
            )));
        }
        let q = model.q();
        let nf = n as f64;
        let floor = MESSAGE_FLOOR;
        // w_edge[r][s] = p/(1-p), w_non[r][s] = 1-p
        let mut w_edge = vec![0.0; q * q];
        let mut w_non = vec![0.0; q * q];
        for r in 0..q {
            for s in 0..q {
                let p = (model.c(r, s) / nf).clamp(0.0, 1.0);
                w_non[r * q + s] = (1.0 - p).max(floor);
                w_edge[r * q + s] = p / w_non[r * q + s];
            }
        }
        let mut rng = rng_from_seed(mix_seed(seed, 3));
        // messages[(i, j)] = ψ^{i→j}, row-major over ordered pairs
        let mut msg = vec![0.0; n * n * q];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    init_row(
                        &mut msg[(i * n + j) * q..(i * n + j) * q + q],
                        &BeliefInit::Random,
                        i,
                        &mut rng,
                    );
                }
            }
        }
        let log_priors: Vec<f64> = model.priors().iter().map(|&p| p.max(floor).ln()).collect();
        let mut h = vec![0.0; q];
        for _ in 0..opts.max_iters {
            let mut max_delta = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for r in 0..q {
                        let mut acc = 0.0;
                        for k in 0..n {
                            if k == i || k == j {
                                continue;
                            }
                            let mk = &msg[(k * n + i) * q..(k * n + i) * q + q];
                            let mut inner = 0.0;
                            let edge = graph.has_edge(i, k);
                            for s in 0..q {
                                let w = if edge {
                                    w_edge[r * q + s] * w_non[r * q + s]
                                } else {
                                    w_non[r * q + s]
                                };
                                inner += w * mk[s].max(floor);
                            }
                            acc += inner.max(floor).ln();
                        }
                        h[r] = acc + log_priors[r];
                    }
                    let best = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if !best.is_finite() {
                        return Err(Error::Numerical(format!(
                            "non-finite dense field on pair ({i}, {j})"
                        )));
                    }
                    let mut sum = 0.0;
                    let mrow = &mut msg[(i * n + j) * q..(i * n + j) * q + q];
                    let mut new = vec![0.0; q];
                    for r in 0..q {
                        new[r] = (h[r] - best).exp();
                        sum += new[r];
                    }
                    for r in 0..q {
                        let v = (1.0 - opts.damping) * new[r] / sum + opts.damping * mrow[r];
                        max_delta = max_delta.max((v - mrow[r]).abs());
                        mrow[r] = v;
                    }
                    let s: f64 = mrow.iter().sum();
                    for v in mrow.iter_mut() {
                        *v /= s;
                    }
                }
            }
            if max_delta <= opts.tol {
                break;
            }
        }
        // marginals from the full-neighborhood field
        let mut out = vec![0.0; n * q];
        for i in 0..n {
            for r in 0..q {
                let mut acc = 0.0;
                for k in 0..n {
                    if k == i {
                        continue;
                    }
                    let mk = &msg[(k * n + i) * q..(k * n + i) * q + q];
                    let mut inner = 0.0;
                    let edge = graph.has_edge(i, k);
                    for s in 0..q {
                        let w = if edge {
                            w_edge[r * q + s] * w_non[r * q + s]
                        } else {
                            w_non[r * q + s]
                        };
                        inner += w * mk[s].max(floor);
                    }
                    acc += inner.max(floor).ln();
                }
                h[r] = acc + log_priors[r];
            }
            let best = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for r in 0..q {
                out[i * q + r] = (h[r] - best).exp();
                sum += out[i * q + r];
            }
            for r in 0..q {
                out[i * q + r] /= sum;
            }
        }
        Ok(Marginals::from_rows(out, q))
    }
}

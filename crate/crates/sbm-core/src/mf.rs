//! Naive mean field E-step: node-factorized beliefs with the non-edge
//! interactions aggregated through the class-mass vector, so one sweep
//! costs O(N q² + M q²).

use rand::seq::SliceRandom;
use std::time::Instant;

use crate::engine::{init_row, BeliefInit, EngineReport, EstepOptions, Marginals};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::BlockModel;
use crate::rng::{mix_seed, rng_from_seed, SeededRng};

const BELIEF_FLOOR: f64 = 1e-300;
const REFRESH_EVERY: usize = 100;

/// What stands in for the class occupation in the non-edge field term:
/// the current belief mass m_s/N (self-consistent default) or the fixed
/// prior p_s (as printed). The two differ at O(1/N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassMode {
    #[default]
    BeliefMass,
    Prior,
}

pub struct MfEngine<'a> {
    graph: &'a Graph,
    model: &'a BlockModel,
    q: usize,
    /// ψ^i, flat N×q.
    beliefs: Vec<f64>,
    /// m_r = Σ_i ψ^i_r.
    mass: Vec<f64>,
    /// w[r][s] = log(p_rs / (1 − p_rs)) = log c_rs − log(N − c_rs).
    w: Vec<f64>,
    /// g[r][s] = log(1 − p_rs).
    g: Vec<f64>,
    log_priors: Vec<f64>,
    mass_mode: MassMode,
    order: Vec<u32>,
    rng: SeededRng,
    sweeps: usize,
}

/// Fresh beliefs for every node of `graph`.
pub fn init_beliefs(
    graph: &Graph,
    model: &BlockModel,
    init: BeliefInit<'_>,
    seed: u64,
) -> Result<Marginals> {
    let q = model.q();
    if let BeliefInit::FromLabels(t) = &init {
        if t.len() != graph.n_nodes() || t.q() != q {
            return Err(Error::InvalidInput(
                "label assignment does not match graph/model".into(),
            ));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; graph.n_nodes() * q];
    for i in 0..graph.n_nodes() {
        init_row(&mut data[i * q..(i + 1) * q], &init, i, &mut rng);
    }
    Ok(Marginals::from_rows(data, q))
}

impl<'a> MfEngine<'a> {
    pub fn new(
        graph: &'a Graph,
        model: &'a BlockModel,
        beliefs: Marginals,
        mass_mode: MassMode,
        seed: u64,
    ) -> Result<Self> {
        let q = model.q();
        if beliefs.q() != q || beliefs.n() != graph.n_nodes() {
            return Err(Error::InvalidInput(
                "belief set does not match graph/model".into(),
            ));
        }
        let n = graph.n_nodes() as f64;
        let mut w = vec![0.0; q * q];
        let mut g = vec![0.0; q * q];
        for r in 0..q {
            for s in 0..q {
                let c = model.c(r, s);
                w[r * q + s] = c.max(BELIEF_FLOOR).ln() - (n - c).max(BELIEF_FLOOR).ln();
                g[r * q + s] = if c >= n {
                    BELIEF_FLOOR.ln()
                } else {
                    (-c / n).ln_1p()
                };
            }
        }
        let log_priors = model
            .priors()
            .iter()
            .map(|&p| p.max(BELIEF_FLOOR).ln())
            .collect();
        let data = beliefs.data().to_vec();
        let mut mass = vec![0.0; q];
        for i in 0..graph.n_nodes() {
            for s in 0..q {
                mass[s] += data[i * q + s];
            }
        }
        Ok(MfEngine {
            graph,
            model,
            q,
            beliefs: data,
            mass,
            w,
            g,
            log_priors,
            mass_mode,
            order: (0..graph.n_nodes() as u32).collect(),
            rng: rng_from_seed(seed),
            sweeps: 0,
        })
    }

    /// Field for node i under the current beliefs, written into `h`.
    fn field(&self, i: usize, h: &mut [f64]) {
        let q = self.q;
        let n = self.graph.n_nodes() as f64;
        for r in 0..q {
            let mut edge = 0.0;
            for &j in self.graph.neighbors(i) {
                let bj = &self.beliefs[j as usize * q..(j as usize + 1) * q];
                let wrow = &self.w[r * q..(r + 1) * q];
                let mut acc = 0.0;
                for s in 0..q {
                    acc += wrow[s] * bj[s];
                }
                edge += acc;
            }
            // Σ_s (N − δ_rs) p̄_s log(1 − p_rs), with p̄ per mass mode
            let grow = &self.g[r * q..(r + 1) * q];
            let mut non_edge = 0.0;
            match self.mass_mode {
                MassMode::BeliefMass => {
                    for s in 0..q {
                        non_edge += grow[s] * self.mass[s];
                    }
                    non_edge -= grow[r] * self.mass[r] / n;
                }
                MassMode::Prior => {
                    let p = self.model.priors();
                    for s in 0..q {
                        non_edge += grow[s] * p[s] * n;
                    }
                    non_edge -= grow[r] * p[r];
                }
            }
            h[r] = edge + non_edge;
        }
    }

    /// One randomized sequential pass over all nodes; returns the largest
    /// L∞ belief change.
    pub fn sweep(&mut self, damping: f64) -> Result<f64> {
        let q = self.q;
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(&mut self.rng);
        let mut max_delta = 0.0f64;
        let mut h = vec![0.0; q];
        for &iu in &order {
            let i = iu as usize;
            self.field(i, &mut h);
            let mut best = f64::NEG_INFINITY;
            for r in 0..q {
                h[r] += self.log_priors[r];
                if h[r] > best {
                    best = h[r];
                }
            }
            if !best.is_finite() {
                self.order = order;
                return Err(Error::Numerical(format!("non-finite field at node {i}")));
            }
            let mut sum = 0.0;
            for r in 0..q {
                h[r] = (h[r] - best).exp();
                sum += h[r];
            }
            if !(sum > 0.0) || !sum.is_finite() {
                self.order = order;
                return Err(Error::Numerical(format!("non-finite field at node {i}")));
            }
            let row = &mut self.beliefs[i * q..(i + 1) * q];
            let mut damped_sum = 0.0;
            for r in 0..q {
                h[r] = (1.0 - damping) * (h[r] / sum) + damping * row[r];
                damped_sum += h[r];
            }
            for r in 0..q {
                let v = h[r] / damped_sum;
                let d = (v - row[r]).abs();
                if d > max_delta {
                    max_delta = d;
                }
                self.mass[r] += v - row[r];
                row[r] = v;
            }
        }
        self.order = order;
        self.sweeps += 1;
        if self.sweeps % REFRESH_EVERY == 0 {
            self.refresh_mass();
        }
        Ok(max_delta)
    }

    /// Recompute the class-mass cache from scratch.
    pub fn refresh_mass(&mut self) {
        let q = self.q;
        self.mass.fill(0.0);
        for i in 0..self.graph.n_nodes() {
            for s in 0..q {
                self.mass[s] += self.beliefs[i * q + s];
            }
        }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_recomputed(&self) -> Vec<f64> {
        let q = self.q;
        let mut mass = vec![0.0; q];
        for i in 0..self.graph.n_nodes() {
            for s in 0..q {
                mass[s] += self.beliefs[i * q + s];
            }
        }
        mass
    }

    pub fn beliefs(&self) -> Marginals {
        Marginals::from_rows(self.beliefs.clone(), self.q)
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    /// F_MF = Σ_{i<j,rs} (A_ij w_rs + g_rs) ψ^i_r ψ^j_s
    ///      + Σ_{i,r} ψ^i_r (log p_r − log ψ^i_r).
    ///
    /// Extensive (not divided by N); the hard-assignment value equals the
    /// complete-data log-likelihood exactly.
    pub fn free_energy(&self) -> f64 {
        let q = self.q;
        let n = self.graph.n_nodes();
        // edge part over each undirected edge once
        let mut edge_term = 0.0;
        for e in 0..self.graph.n_directed() {
            let i = self.graph.edge_source(e);
            let j = self.graph.edge_target(e);
            if i >= j {
                continue;
            }
            let bi = &self.beliefs[i * q..(i + 1) * q];
            let bj = &self.beliefs[j * q..(j + 1) * q];
            for r in 0..q {
                let wrow = &self.w[r * q..(r + 1) * q];
                let mut acc = 0.0;
                for s in 0..q {
                    acc += wrow[s] * bj[s];
                }
                edge_term += bi[r] * acc;
            }
        }
        // non-edge part via aggregates:
        // Σ_{i<j,rs} g_rs ψ^i_r ψ^j_s = ½ Σ_rs g_rs (m_r m_s − Σ_i ψ^i_r ψ^i_s)
        let mut self_products = vec![0.0; q * q];
        for i in 0..n {
            let bi = &self.beliefs[i * q..(i + 1) * q];
            for r in 0..q {
                for s in 0..q {
                    self_products[r * q + s] += bi[r] * bi[s];
                }
            }
        }
        let mass = self.mass_recomputed();
        let mut non_edge_term = 0.0;
        for r in 0..q {
            for s in 0..q {
                non_edge_term +=
                    self.g[r * q + s] * (mass[r] * mass[s] - self_products[r * q + s]);
            }
        }
        non_edge_term *= 0.5;
        // prior and entropy part, with 0·log 0 = 0
        let mut mix_term = 0.0;
        for i in 0..n {
            let bi = &self.beliefs[i * q..(i + 1) * q];
            for r in 0..q {
                if bi[r] > 0.0 {
                    mix_term += bi[r] * (self.log_priors[r] - bi[r].ln());
                }
            }
        }
        edge_term + non_edge_term + mix_term
    }
}

/// Run naive mean field to convergence (or the cap); mirrors
/// [`crate::bp::run_estep`].
pub fn run_estep(
    graph: &Graph,
    model: &BlockModel,
    opts: &EstepOptions,
    init: BeliefInit<'_>,
    mass_mode: MassMode,
    seed: u64,
) -> Result<(Marginals, EngineReport)> {
    opts.validate()?;
    let start = Instant::now();
    let beliefs = init_beliefs(graph, model, init, mix_seed(seed, 1))?;
    let mut engine = MfEngine::new(graph, model, beliefs, mass_mode, mix_seed(seed, 2))?;
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < opts.max_iters {
        delta = engine.sweep(opts.damping)?;
        iterations += 1;
        if delta <= opts.tol {
            break;
        }
    }
    engine.refresh_mass();
    let report = EngineReport {
        converged: delta <= opts.tol,
        iterations,
        final_delta: delta,
        free_energy: engine.free_energy(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((engine.beliefs(), report))
}

//! Matrix-free graph operators.

use crate::error::{Error, Result};
use crate::graph::Graph;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// y ← Op · x.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// B = A − k kᵀ/2M, applied without materialization. Annihilates the
/// all-ones vector exactly (including the −k_i²/2M diagonal term).
pub struct ModularityOperator<'a> {
    graph: &'a Graph,
    degrees: Vec<f64>,
    two_m: f64,
}

impl<'a> ModularityOperator<'a> {
    pub fn new(graph: &'a Graph) -> Result<Self> {
        if graph.n_edges() == 0 {
            return Err(Error::InvalidGraph(
                "modularity matrix undefined without edges".into(),
            ));
        }
        let degrees = (0..graph.n_nodes()).map(|i| graph.degree(i) as f64).collect();
        Ok(ModularityOperator {
            graph,
            degrees,
            two_m: 2.0 * graph.n_edges() as f64,
        })
    }
}

impl LinearOperator for ModularityOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n_nodes()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let k_dot_x: f64 = self
            .degrees
            .iter()
            .zip(x)
            .map(|(k, v)| k * v)
            .sum::<f64>()
            / self.two_m;
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in self.graph.neighbors(i) {
                acc += x[j as usize];
            }
            *out = acc - self.degrees[i] * k_dot_x;
        }
    }
}

/// Random-walk transition matrix P = D^{−1} A of a connected graph,
/// together with its symmetrization S = D^{−1/2} A D^{−1/2}.
pub struct WalkOperator<'a> {
    graph: &'a Graph,
    degrees: Vec<f64>,
    inv_sqrt_deg: Vec<f64>,
}

impl<'a> WalkOperator<'a> {
    /// The graph must have no isolated nodes; callers working on general
    /// graphs extract the largest connected component first.
    pub fn new(graph: &'a Graph) -> Result<Self> {
        if graph.n_nodes() == 0 {
            return Err(Error::InvalidGraph("empty graph".into()));
        }
        let degrees: Vec<f64> = (0..graph.n_nodes())
            .map(|i| graph.degree(i) as f64)
            .collect();
        if let Some(i) = degrees.iter().position(|&k| k == 0.0) {
            return Err(Error::InvalidGraph(format!(
                "node {i} is isolated: walk matrix undefined; extract the largest connected component first"
            )));
        }
        let inv_sqrt_deg = degrees.iter().map(|&k| 1.0 / k.sqrt()).collect();
        Ok(WalkOperator {
            graph,
            degrees,
            inv_sqrt_deg,
        })
    }

    /// y ← P x (right application of the row-stochastic matrix).
    pub fn apply_walk(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in self.graph.neighbors(i) {
                acc += x[j as usize];
            }
            *out = acc / self.degrees[i];
        }
    }

    /// y ← Pᵀ x, for stationarity checks of row vectors.
    pub fn apply_walk_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for i in 0..self.graph.n_nodes() {
            let v = x[i] / self.degrees[i];
            for &j in self.graph.neighbors(i) {
                y[j as usize] += v;
            }
        }
    }

    /// Stationary distribution π_0 = k / 2M.
    pub fn stationary(&self) -> Vec<f64> {
        let two_m = 2.0 * self.graph.n_edges() as f64;
        self.degrees.iter().map(|&k| k / two_m).collect()
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn inv_sqrt_degrees(&self) -> &[f64] {
        &self.inv_sqrt_deg
    }
}

/// S = D^{−1/2} A D^{−1/2}: symmetric, same spectrum as P; right
/// eigenvectors of P are recovered as D^{−1/2} v.
impl LinearOperator for WalkOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n_nodes()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in self.graph.neighbors(i) {
                acc += x[j as usize] * self.inv_sqrt_deg[j as usize];
            }
            *out = acc * self.inv_sqrt_deg[i];
        }
    }
}

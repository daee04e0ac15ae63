//! Block model parameters and structure presets.
//!
//! The affinity matrix is kept in scaled form c_rs = N·p_rs throughout;
//! dense probabilities are derived at the point of use as c_rs / n for
//! whatever n is being generated or scored. `n_scale` records the size
//! the scaling refers to.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockModel {
    q: usize,
    priors: Vec<f64>,
    affinity: Vec<f64>,
    n_scale: usize,
}

impl BlockModel {
    /// `affinity` is row-major q×q in scaled form. Priors must sum to one;
    /// the affinity must be symmetric, non-negative, and imply
    /// probabilities c_rs / n_scale ≤ 1.
    pub fn new(priors: Vec<f64>, affinity: Vec<f64>, n_scale: usize) -> Result<Self> {
        let q = priors.len();
        if q == 0 {
            return Err(Error::InvalidModel("q must be at least 1".into()));
        }
        if affinity.len() != q * q {
            return Err(Error::InvalidModel(format!(
                "affinity has {} entries, expected {}",
                affinity.len(),
                q * q
            )));
        }
        if n_scale == 0 {
            return Err(Error::InvalidModel("n_scale must be positive".into()));
        }
        if priors.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidModel("priors must lie in [0, 1]".into()));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidModel(format!("priors sum to {sum}, not 1")));
        }
        let mut priors = priors;
        for p in &mut priors {
            *p /= sum;
        }
        for r in 0..q {
            for s in 0..q {
                let c = affinity[r * q + s];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "affinity entry ({r}, {s}) = {c} is not a finite non-negative value"
                    )));
                }
                let diff = (c - affinity[s * q + r]).abs();
                if diff > 1e-9 * c.abs().max(1.0) {
                    return Err(Error::InvalidModel(format!(
                        "affinity not symmetric at ({r}, {s})"
                    )));
                }
                if c > n_scale as f64 * (1.0 + 1e-12) {
                    return Err(Error::InvalidModel(format!(
                        "affinity entry ({r}, {s}) = {c} implies probability > 1 at N = {n_scale}"
                    )));
                }
            }
        }
        // exact symmetry so downstream arithmetic never sees r/s asymmetry
        let mut affinity = affinity;
        for r in 0..q {
            for s in (r + 1)..q {
                let v = 0.5 * (affinity[r * q + s] + affinity[s * q + r]);
                affinity[r * q + s] = v;
                affinity[s * q + r] = v;
            }
        }
        Ok(BlockModel {
            q,
            priors,
            affinity,
            n_scale,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Scaled affinity entry c_rs.
    pub fn c(&self, r: usize, s: usize) -> f64 {
        self.affinity[r * self.q + s]
    }

    pub fn affinity(&self) -> &[f64] {
        &self.affinity
    }

    pub fn n_scale(&self) -> usize {
        self.n_scale
    }

    /// Dense edge probability for a graph of n nodes.
    pub fn edge_probability(&self, r: usize, s: usize, n: usize) -> f64 {
        self.c(r, s) / n as f64
    }

    /// Mean degree implied at size n: Σ_rs p_r p_s c_rs (up to O(1/n)).
    pub fn implied_mean_degree(&self) -> f64 {
        let mut c = 0.0;
        for r in 0..self.q {
            for s in 0..self.q {
                c += self.priors[r] * self.priors[s] * self.c(r, s);
            }
        }
        c
    }

    /// Relabel classes: class r of the result is class perm[r] of self.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.q {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let mut priors = vec![0.0; self.q];
        let mut affinity = vec![0.0; self.q * self.q];
        for r in 0..self.q {
            priors[r] = self.priors[perm[r]];
            for s in 0..self.q {
                affinity[r * self.q + s] = self.c(perm[r], perm[s]);
            }
        }
        BlockModel::new(priors, affinity, self.n_scale)
    }
}

/// Per-node class labels, 0-based internally. Human-readable output
/// (label files, error messages) uses 1-based classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    labels: Vec<u32>,
    q: usize,
}

impl LabelAssignment {
    pub fn new(labels: Vec<u32>, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidInput("q must be at least 1".into()));
        }
        if let Some((i, &t)) = labels.iter().enumerate().find(|(_, &t)| t as usize >= q) {
            return Err(Error::InvalidInput(format!(
                "label {} at node {i} out of range for q = {q}",
                t + 1
            )));
        }
        Ok(LabelAssignment { labels, q })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Class sizes n_r.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.q];
        for &t in &self.labels {
            counts[t as usize] += 1;
        }
        counts
    }

    /// Relabel: class t becomes perm[t].
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.q {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let labels = self
            .labels
            .iter()
            .map(|&t| perm[t as usize] as u32)
            .collect();
        LabelAssignment::new(labels, self.q)
    }
}

/// Benchmark affinity families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    /// Equal priors, c_rr = c_in on the diagonal, c_out = ε·c_in elsewhere.
    Modular,
    /// Two groups of sizes (2/3, 1/3) with affinity
    /// c_in·[[1, 1 − ε/2], [1 − ε/2, ε]] and c_in = 9c/(8 − ε), so the
    /// mean degree is c. The mixed entry is relative to c_in; read as an
    /// absolute value the printed triple cannot satisfy the mean-degree
    /// constraint.
    CorePeriphery,
}

#[derive(Debug, Clone, Copy)]
pub struct StructurePreset {
    pub kind: StructureKind,
    pub q: usize,
    pub mean_degree: f64,
    pub epsilon: f64,
}

impl StructurePreset {
    pub fn modular(q: usize, mean_degree: f64, epsilon: f64) -> Self {
        StructurePreset {
            kind: StructureKind::Modular,
            q,
            mean_degree,
            epsilon,
        }
    }

    pub fn core_periphery(mean_degree: f64, epsilon: f64) -> Self {
        StructurePreset {
            kind: StructureKind::CorePeriphery,
            q: 2,
            mean_degree,
            epsilon,
        }
    }

    pub fn expand(&self, n_scale: usize) -> Result<BlockModel> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidModel(format!(
                "epsilon = {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.mean_degree <= 0.0 {
            return Err(Error::InvalidModel("mean degree must be positive".into()));
        }
        match self.kind {
            StructureKind::Modular => {
                let q = self.q;
                if q == 0 {
                    return Err(Error::InvalidModel("q must be at least 1".into()));
                }
                // c = c_in (1 + (q-1) ε) / q for equal priors
                let c_in = self.q as f64 * self.mean_degree
                    / (1.0 + (q as f64 - 1.0) * self.epsilon);
                let c_out = self.epsilon * c_in;
                let mut affinity = vec![c_out; q * q];
                for r in 0..q {
                    affinity[r * q + r] = c_in;
                }
                BlockModel::new(vec![1.0 / q as f64; q], affinity, n_scale)
            }
            StructureKind::CorePeriphery => {
                let c_in = 9.0 * self.mean_degree / (8.0 - self.epsilon);
                let c_io = (1.0 - 0.5 * self.epsilon) * c_in;
                let c_out = self.epsilon * c_in;
                BlockModel::new(
                    vec![2.0 / 3.0, 1.0 / 3.0],
                    vec![c_in, c_io, c_io, c_out],
                    n_scale,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_groups_preset_matches_hand_solution() {
        // c_in (1 + 3ε)/4 = 16 with ε = 12/28 gives c_in = 28, c_out = 12
        let preset = StructurePreset::modular(4, 16.0, 12.0 / 28.0);
        let model = preset.expand(10_000).unwrap();
        assert!((model.c(0, 0) - 28.0).abs() < 1e-12);
        assert!((model.c(0, 1) - 12.0).abs() < 1e-12);
        assert!((model.implied_mean_degree() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn core_periphery_preserves_mean_degree() {
        let preset = StructurePreset::core_periphery(10.0, 0.3);
        let model = preset.expand(10_000).unwrap();
        assert!((model.implied_mean_degree() - 10.0).abs() < 1e-9);
        assert!((model.c(0, 1) - model.c(1, 0)).abs() == 0.0);
    }

    #[test]
    fn rejects_asymmetric_affinity() {
        let err = BlockModel::new(vec![0.5, 0.5], vec![4.0, 1.0, 2.0, 4.0], 100);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_probability_above_one() {
        let err = BlockModel::new(vec![1.0], vec![101.0], 100);
        assert!(err.is_err());
    }

    #[test]
    fn permuted_model_swaps_entries() {
        let model =
            BlockModel::new(vec![0.7, 0.3], vec![5.0, 1.0, 1.0, 2.0], 100).unwrap();
        let p = model.permuted(&[1, 0]).unwrap();
        assert_eq!(p.priors(), &[0.3, 0.7]);
        assert_eq!(p.c(0, 0), 2.0);
        assert_eq!(p.c(1, 1), 5.0);
    }
}

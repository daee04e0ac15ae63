//! Types shared by the E-step engines: per-node beliefs, run reports,
//! iteration options.

use crate::error::{Error, Result};
use crate::model::LabelAssignment;

/// N×q row-normalized beliefs ψ^i_r.
#[derive(Debug, Clone)]
pub struct Marginals {
    q: usize,
    data: Vec<f64>,
}

impl Marginals {
    pub fn from_rows(data: Vec<f64>, q: usize) -> Self {
        assert!(q > 0 && data.len() % q == 0);
        Marginals { q, data }
    }

    pub fn uniform(n: usize, q: usize) -> Self {
        Marginals {
            q,
            data: vec![1.0 / q as f64; n * q],
        }
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n())
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest per-node total-variation distance to another belief set.
    pub fn max_total_variation(&self, other: &Marginals) -> f64 {
        assert_eq!(self.q, other.q);
        assert_eq!(self.n(), other.n());
        (0..self.n())
            .map(|i| {
                0.5 * self
                    .row(i)
                    .iter()
                    .zip(other.row(i))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Reorder columns: class r of the result is class perm[r] of self.
    pub fn permuted(&self, perm: &[usize]) -> Marginals {
        assert_eq!(perm.len(), self.q);
        let n = self.n();
        let mut data = vec![0.0; n * self.q];
        for i in 0..n {
            for r in 0..self.q {
                data[i * self.q + r] = self.data[i * self.q + perm[r]];
            }
        }
        Marginals { q: self.q, data }
    }
}

/// Outcome of an E-step run. Non-convergence is reported, not an error.
#[derive(Debug, Clone)]
pub struct EngineReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
    pub free_energy: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EstepOptions {
    /// L∞ message/belief change below which the run stops.
    pub tol: f64,
    pub max_iters: usize,
    /// λ_d ∈ [0, 1): new state = (1 − λ_d)·update + λ_d·old.
    pub damping: f64,
}

impl Default for EstepOptions {
    fn default() -> Self {
        EstepOptions {
            tol: 1e-6,
            max_iters: 1000,
            damping: 0.0,
        }
    }
}

impl EstepOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidInput(format!(
                "damping {} outside [0, 1)",
                self.damping
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidInput("tolerance must be non-negative".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Belief initialization shared by both engines.
#[derive(Debug, Clone, Copy)]
pub enum BeliefInit<'a> {
    /// Symmetric Dirichlet(1) per message/belief.
    Random,
    /// Every entry 1/q.
    Uniform,
    /// Mass 1 − (q−1)·10⁻³ on the given label, 10⁻³ elsewhere.
    FromLabels(&'a LabelAssignment),
}

pub(crate) const FROM_LABELS_RESIDUAL: f64 = 1e-3;

/// Fill `out` (length q) with one draw according to the init mode.
pub(crate) fn init_row(
    out: &mut [f64],
    init: &BeliefInit<'_>,
    node: usize,
    rng: &mut crate::rng::SeededRng,
) {
    use rand::Rng;
    let q = out.len();
    match init {
        BeliefInit::Uniform => out.fill(1.0 / q as f64),
        BeliefInit::FromLabels(t) => {
            out.fill(FROM_LABELS_RESIDUAL);
            out[t.label(node)] = 1.0 - (q as f64 - 1.0) * FROM_LABELS_RESIDUAL;
        }
        BeliefInit::Random => {
            // -ln U is Exp(1) = Gamma(1); normalized Gamma(1) draws are
            // exactly Dirichlet(1)
            let mut sum = 0.0;
            for v in out.iter_mut() {
                let u: f64 = rng.random();
                *v = -u.max(f64::MIN_POSITIVE).ln();
                sum += *v;
            }
            for v in out.iter_mut() {
                *v /= sum;
            }
        }
    }
}

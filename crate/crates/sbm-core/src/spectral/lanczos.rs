//! Matrix-free symmetric Lanczos with full reorthogonalization.
//!
//! The basis is kept in memory and every new direction is
//! re-orthogonalized against all of it (two modified-Gram-Schmidt
//! passes), which rules out ghost eigenvalues at the price of O(m²n)
//! work and O(mn) memory. Breakdown (an exhausted invariant subspace)
//! restarts the recurrence with a fresh random direction, so requesting
//! several eigenpairs of a low-connectivity operator still works.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::operators::LinearOperator;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    LargestMagnitude,
    LargestAlgebraic,
}

#[derive(Debug, Clone, Copy)]
pub struct EigsOptions {
    /// Accept a Ritz pair once ‖Op·v − λv‖ ≤ tol (v unit-norm).
    pub tol: f64,
    /// Cap on Lanczos steps (≈ operator applications).
    pub max_iters: usize,
    /// Seed for the random start vector.
    pub seed: u64,
}

impl Default for EigsOptions {
    fn default() -> Self {
        EigsOptions {
            tol: 1e-8,
            max_iters: 400,
            seed: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn random_unit(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let nv = norm(&v).max(f64::MIN_POSITIVE);
    for x in &mut v {
        *x /= nv;
    }
    v
}

/// Remove the components of `w` along every basis vector, twice.
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for u in basis {
            let c = dot(w, u);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= c * ui;
            }
        }
    }
}

/// A fresh random direction orthogonal to the current basis, or None if
/// the space is exhausted.
fn restart_vector(n: usize, basis: &[Vec<f64>], rng: &mut SeededRng) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v = random_unit(n, rng);
        reorthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            for x in &mut v {
                *x /= nv;
            }
            return Some(v);
        }
    }
    None
}

struct RitzSelection {
    values: Vec<f64>,
    /// Columns of the tridiagonal eigenvector matrix for the selection.
    vectors: Vec<Vec<f64>>,
    /// |β_m · y[m−1]| residual estimates.
    estimates: Vec<f64>,
}

fn ritz_pairs(
    alphas: &[f64],
    betas: &[f64],
    beta_next: f64,
    d: usize,
    which: Which,
) -> RitzSelection {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    match which {
        Which::LargestMagnitude => order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .partial_cmp(&eig.eigenvalues[a].abs())
                .unwrap()
                .then(eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap())
        }),
        Which::LargestAlgebraic => order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap()
        }),
    }
    let take = d.min(m);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    let mut estimates = Vec::with_capacity(take);
    for &idx in order.iter().take(take) {
        values.push(eig.eigenvalues[idx]);
        let col: Vec<f64> = (0..m).map(|i| eig.eigenvectors[(i, idx)]).collect();
        estimates.push((beta_next * col[m - 1]).abs());
        vectors.push(col);
    }
    RitzSelection {
        values,
        vectors,
        estimates,
    }
}

/// Top-d eigenpairs of a symmetric operator. Eigenvectors are unit-norm
/// with the largest-magnitude entry positive; pairs are ordered by the
/// selection criterion.
pub fn top_eigenpairs(
    op: &dyn LinearOperator,
    d: usize,
    which: Which,
    opts: &EigsOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.dim();
    if d == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if d > n {
        return Err(Error::InvalidInput(format!(
            "requested {d} eigenpairs of a dimension-{n} operator"
        )));
    }
    let mut rng = rng_from_seed(opts.seed);
    let m_cap = n.min(opts.max_iters.max(d + 2));

    let mut basis: Vec<Vec<f64>> = vec![random_unit(n, &mut rng)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    loop {
        // one Lanczos step from the latest basis vector
        let k = basis.len() - 1;
        op.apply(&basis[k], &mut w);
        let alpha = dot(&w, &basis[k]);
        alphas.push(alpha);
        reorthogonalize(&mut w, &basis);
        let beta_next = norm(&w);

        let at_cap = basis.len() >= m_cap;
        let breakdown = beta_next <= 1e-12;
        let next: Option<Vec<f64>> = if at_cap {
            None
        } else if breakdown {
            // invariant subspace: restart with a fresh orthogonal
            // direction, or stop if the whole space is spanned
            restart_vector(n, &basis, &mut rng)
        } else {
            let mut v = w.clone();
            for x in &mut v {
                *x /= beta_next;
            }
            Some(v)
        };
        let terminal = next.is_none();

        if terminal || alphas.len() % check_interval(d) == 0 || breakdown {
            let sel = ritz_pairs(&alphas, &betas, beta_next, d, which);
            let estimates_pass =
                sel.values.len() == d && sel.estimates.iter().all(|&r| r <= opts.tol);
            if estimates_pass || terminal {
                if sel.values.len() == d {
                    if let Some(result) = assemble_and_verify(op, &basis, &sel, opts.tol)? {
                        return Ok(result);
                    }
                }
                if terminal {
                    return Err(Error::NoConvergence(format!(
                        "Lanczos residuals {:?} above tol {} after {} steps",
                        sel.estimates,
                        opts.tol,
                        alphas.len()
                    )));
                }
            }
        }

        if let Some(v) = next {
            betas.push(if breakdown { 0.0 } else { beta_next });
            basis.push(v);
        }
    }
}

fn check_interval(d: usize) -> usize {
    (4 * d).clamp(12, 60)
}

/// Build Ritz vectors in the original space and verify residuals
/// explicitly; returns None when verification fails.
#[allow(clippy::type_complexity)]
fn assemble_and_verify(
    op: &dyn LinearOperator,
    basis: &[Vec<f64>],
    sel: &RitzSelection,
    tol: f64,
) -> Result<Option<(Vec<f64>, Vec<Vec<f64>>)>> {
    let n = basis[0].len();
    let m = sel.vectors.first().map_or(0, |y| y.len());
    let mut vectors = Vec::with_capacity(sel.values.len());
    let mut scratch = vec![0.0; n];
    for (lam, y) in sel.values.iter().zip(&sel.vectors) {
        let mut x = vec![0.0; n];
        for (j, base) in basis.iter().take(m).enumerate() {
            let c = y[j];
            if c != 0.0 {
                for (xi, bi) in x.iter_mut().zip(base) {
                    *xi += c * bi;
                }
            }
        }
        let nx = norm(&x);
        if nx < 1e-12 {
            return Ok(None);
        }
        for v in &mut x {
            *v /= nx;
        }
        op.apply(&x, &mut scratch);
        let mut res = 0.0;
        for (si, xi) in scratch.iter().zip(&x) {
            res += (si - lam * xi).powi(2);
        }
        if res.sqrt() > tol {
            return Ok(None);
        }
        fix_sign(&mut x);
        vectors.push(x);
    }
    Ok(Some((sel.values.clone(), vectors)))
}

/// Deterministic orientation: the entry of largest magnitude is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

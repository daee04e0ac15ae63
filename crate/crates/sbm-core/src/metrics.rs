//! Scoring estimated assignments against the planted truth.

use rand::Rng;

use crate::engine::Marginals;
use crate::error::{Error, Result};
use crate::model::LabelAssignment;
use crate::rng::rng_from_seed;

/// Overlap, confidence and related quantities for one estimate.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    /// Q = (1/N) max_π Σ_i δ(t*_i, π(t_i)).
    pub overlap: f64,
    /// C = (1/N) Σ_i ψ^i at the estimated label; NaN without marginals.
    pub confidence: f64,
    /// Largest empirical class fraction of the true labels. An estimator
    /// must beat this to count as successful inference.
    pub chance: f64,
    /// π achieving the overlap: truth class b matches estimate class
    /// best_permutation[b].
    pub best_permutation: Vec<usize>,
    /// C − Q; positive values signal misleading confidence.
    pub illusive_gap: f64,
}

/// Assign each node its most likely class. Ties are broken uniformly at
/// random among the classes achieving the maximum; deterministic given
/// the seed.
pub fn marginalize(marginals: &Marginals, seed: u64) -> LabelAssignment {
    let mut rng = rng_from_seed(seed);
    let q = marginals.q();
    let mut labels = Vec::with_capacity(marginals.n());
    let mut ties = Vec::with_capacity(q);
    for i in 0..marginals.n() {
        let row = marginals.row(i);
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ties.clear();
        ties.extend(
            row.iter()
                .enumerate()
                .filter(|(_, &v)| v == best)
                .map(|(r, _)| r as u32),
        );
        let pick = if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.random_range(0..ties.len())]
        };
        labels.push(pick);
    }
    LabelAssignment::new(labels, q).expect("argmax labels are always in range")
}

/// q×q confusion counts: entry (a, b) counts nodes with estimate a and
/// truth b.
pub fn confusion_matrix(
    estimate: &LabelAssignment,
    truth: &LabelAssignment,
    q: usize,
) -> Result<Vec<u64>> {
    if estimate.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "estimate covers {} nodes, truth {}",
            estimate.len(),
            truth.len()
        )));
    }
    if estimate.q() > q || truth.q() > q {
        return Err(Error::InvalidInput("labels out of range for q".into()));
    }
    let mut conf = vec![0u64; q * q];
    for i in 0..truth.len() {
        conf[estimate.label(i) * q + truth.label(i)] += 1;
    }
    Ok(conf)
}

/// Overlap maximized over class permutations, together with the
/// maximizing permutation (tie broken lexicographically). Exhaustive for
/// q ≤ 8, optimal assignment on the confusion matrix beyond that.
pub fn overlap(
    estimate: &LabelAssignment,
    truth: &LabelAssignment,
    q: usize,
) -> Result<(f64, Vec<usize>)> {
    let conf = confusion_matrix(estimate, truth, q)?;
    let n = truth.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty assignments".into()));
    }
    let (hits, perm) = if q <= 8 {
        best_permutation_exhaustive(&conf, q)
    } else {
        best_permutation_assignment(&conf, q)
    };
    Ok((hits as f64 / n as f64, perm))
}

/// Walk all q! permutations in lexicographic order, keeping the first
/// maximizer.
fn best_permutation_exhaustive(conf: &[u64], q: usize) -> (u64, Vec<usize>) {
    let mut perm: Vec<usize> = (0..q).collect();
    let mut best_perm = perm.clone();
    let mut best = score_permutation(conf, q, &perm);
    while next_permutation(&mut perm) {
        let s = score_permutation(conf, q, &perm);
        if s > best {
            best = s;
            best_perm.copy_from_slice(&perm);
        }
    }
    (best, best_perm)
}

fn score_permutation(conf: &[u64], q: usize, perm: &[usize]) -> u64 {
    (0..q).map(|b| conf[perm[b] * q + b]).sum()
}

/// Standard in-place lexicographic successor; false when wrapped.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Hungarian algorithm (Kuhn–Munkres with potentials) maximizing the
/// diagonal sum of the permuted confusion matrix. O(q³).
fn best_permutation_assignment(conf: &[u64], q: usize) -> (u64, Vec<usize>) {
    // minimize cost = max_entry − conf so all costs are non-negative
    let max_entry = conf.iter().copied().max().unwrap_or(0) as i64;
    let cost = |a: usize, b: usize| max_entry - conf[a * q + b] as i64;

    // potentials over rows (truth classes b) and columns (estimate a)
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; q + 1];
    let mut v = vec![0i64; q + 1];
    let mut assignment = vec![q; q + 1]; // assignment[a] = b matched to column a
    for b in 0..q {
        let mut min_v = vec![inf; q + 1];
        let mut used = vec![false; q + 1];
        let mut way = vec![q; q + 1];
        let mut j0 = q; // virtual start column
        assignment[q] = b;
        loop {
            used[j0] = true;
            let b0 = assignment[j0];
            let mut delta = inf;
            let mut j1 = q;
            for j in 0..q {
                if used[j] {
                    continue;
                }
                let cur = cost(j, b0) - u[b0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=q {
                if used[j] {
                    u[assignment[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if assignment[j0] == q {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            assignment[j0] = assignment[j1];
            j0 = j1;
            if j0 == q {
                break;
            }
        }
    }
    let mut perm = vec![0usize; q];
    for a in 0..q {
        if assignment[a] < q {
            perm[assignment[a]] = a;
        }
    }
    let hits = score_permutation(conf, q, &perm);
    (hits, perm)
}

/// Mean belief mass on the estimated labels,
/// C = (1/N) Σ_i ψ^i_{t*_i}.
pub fn confidence(marginals: &Marginals, estimate: &LabelAssignment) -> Result<f64> {
    if marginals.n() != estimate.len() {
        return Err(Error::InvalidInput(
            "marginals and estimate cover different node counts".into(),
        ));
    }
    let n = marginals.n();
    if n == 0 {
        return Err(Error::InvalidInput("empty marginals".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += marginals.row(i)[estimate.label(i)];
    }
    Ok(acc / n as f64)
}

/// Empirical chance level: the largest class fraction of the truth.
pub fn chance_level(truth: &LabelAssignment) -> f64 {
    let counts = truth.class_counts();
    let n = truth.len().max(1);
    counts.into_iter().max().unwrap_or(0) as f64 / n as f64
}

/// Score an estimate, optionally with the marginals it came from.
pub fn score(
    estimate: &LabelAssignment,
    truth: &LabelAssignment,
    marginals: Option<&Marginals>,
    q: usize,
) -> Result<ScoreReport> {
    let (q_over, perm) = overlap(estimate, truth, q)?;
    let c = match marginals {
        Some(m) => confidence(m, estimate)?,
        None => f64::NAN,
    };
    Ok(ScoreReport {
        overlap: q_over,
        confidence: c,
        chance: chance_level(truth),
        best_permutation: perm,
        illusive_gap: c - q_over,
    })
}

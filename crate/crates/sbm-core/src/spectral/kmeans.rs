//! Lloyd k-means with distance-weighted (k-means++) seeding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{mix_seed, rng_from_seed, SeededRng};

const LLOYD_CAP: usize = 300;
const RELATIVE_INERTIA_TOL: f64 = 1e-7;

/// Cluster n points of dimension d (row-major) into k groups.
/// Runs `restarts` independent seedings and keeps the labeling with the
/// lowest inertia. Deterministic given the seed.
pub fn kmeans(
    points: &[f64],
    n: usize,
    d: usize,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<u32>, f64)> {
    if d == 0 || n * d != points.len() {
        return Err(Error::InvalidInput(format!(
            "point buffer of {} entries does not match n = {n}, d = {d}",
            points.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if count_distinct(points, n, d, k) < k {
        return Err(Error::Degenerate(format!(
            "fewer than {k} distinct points"
        )));
    }
    let restarts = restarts.max(1);
    let mut best: Option<(Vec<u32>, f64)> = None;
    for run in 0..restarts {
        let mut rng = rng_from_seed(mix_seed(seed, run as u64));
        let (labels, inertia) = lloyd(points, n, d, k, &mut rng);
        if best.as_ref().is_none_or(|(_, bi)| inertia < *bi) {
            best = Some((labels, inertia));
        }
    }
    Ok(best.unwrap())
}

/// Count distinct rows, stopping early once `needed` are seen.
fn count_distinct(points: &[f64], n: usize, d: usize, needed: usize) -> usize {
    let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
    for i in 0..n {
        let key: Vec<u64> = points[i * d..(i + 1) * d]
            .iter()
            .map(|v| v.to_bits())
            .collect();
        seen.insert(key);
        if seen.len() >= needed {
            return seen.len();
        }
    }
    seen.len()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd(points: &[f64], n: usize, d: usize, k: usize, rng: &mut SeededRng) -> (Vec<u32>, f64) {
    let row = |i: usize| &points[i * d..(i + 1) * d];

    // k-means++ seeding: subsequent centers drawn ∝ squared distance to
    // the nearest chosen center
    let mut centers = vec![0.0; k * d];
    let first = rng.random_range(0..n);
    centers[..d].copy_from_slice(row(first));
    let mut min_d2: Vec<f64> = (0..n).map(|i| dist2(row(i), &centers[..d])).collect();
    for c in 1..k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // all remaining mass at chosen centers; distinctness was
            // checked, so this only happens transiently
            (0..n).find(|&i| min_d2[i] > 0.0).unwrap_or(0)
        };
        centers[c * d..(c + 1) * d].copy_from_slice(row(pick));
        for i in 0..n {
            let nd = dist2(row(i), &centers[c * d..(c + 1) * d]);
            if nd < min_d2[i] {
                min_d2[i] = nd;
            }
        }
    }

    let mut labels = vec![0u32; n];
    let mut prev_inertia = f64::INFINITY;
    let mut inertia = f64::INFINITY;
    for _ in 0..LLOYD_CAP {
        // assignment step; ties go to the lowest center index
        inertia = 0.0;
        for i in 0..n {
            let mut best_c = 0u32;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = dist2(row(i), &centers[c * d..(c + 1) * d]);
                if dd < best_d {
                    best_d = dd;
                    best_c = c as u32;
                }
            }
            labels[i] = best_c;
            inertia += best_d;
        }
        // update step
        let mut counts = vec![0usize; k];
        centers.fill(0.0);
        for i in 0..n {
            let c = labels[i] as usize;
            counts[c] += 1;
            for (acc, v) in centers[c * d..(c + 1) * d].iter_mut().zip(row(i)) {
                *acc += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // adopt the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(row(a), &centers_of(&centers, labels[a], d));
                        let db = dist2(row(b), &centers_of(&centers, labels[b], d));
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .unwrap();
                centers[c * d..(c + 1) * d].copy_from_slice(row(far));
            } else {
                for v in &mut centers[c * d..(c + 1) * d] {
                    *v /= counts[c] as f64;
                }
            }
        }
        if (prev_inertia - inertia).abs() <= RELATIVE_INERTIA_TOL * prev_inertia.max(1e-30) {
            break;
        }
        prev_inertia = inertia;
    }
    (labels, inertia)
}

fn centers_of(centers: &[f64], label: u32, d: usize) -> Vec<f64> {
    centers[label as usize * d..(label as usize + 1) * d].to_vec()
}

//! Network generation from a block model and complete-data estimation.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{BlockModel, LabelAssignment};
use crate::rng::rng_from_seed;

/// Draw a graph and its planted labels.
///
/// Labels are multinomial with the model priors; each unordered pair
/// (i, j) is linked independently with probability c_{t_i t_j} / n.
/// Edge placement draws a binomial count per block pair and then places
/// that many distinct pairs uniformly, so the cost is O(M) rather than
/// O(N²).
pub fn generate(model: &BlockModel, n: usize, seed: u64) -> Result<(Graph, LabelAssignment)> {
    let q = model.q();
    if n == 0 {
        return Err(Error::InvalidInput("cannot generate an empty graph".into()));
    }
    for r in 0..q {
        for s in 0..q {
            if model.c(r, s) > n as f64 {
                return Err(Error::InvalidModel(format!(
                    "affinity entry ({r}, {s}) = {} implies probability > 1 at n = {n}",
                    model.c(r, s)
                )));
            }
        }
    }
    let mut rng = rng_from_seed(seed);

    // cumulative prior table for label draws
    let mut cum = vec![0.0; q];
    let mut acc = 0.0;
    for r in 0..q {
        acc += model.priors()[r];
        cum[r] = acc;
    }
    let mut labels = vec![0u32; n];
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); q];
    for (i, t) in labels.iter_mut().enumerate() {
        let u: f64 = rng.random();
        let r = cum.partition_point(|&c| c < u).min(q - 1);
        *t = r as u32;
        groups[r].push(i as u32);
    }

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut chosen: HashSet<u64> = HashSet::new();
    for r in 0..q {
        for s in r..q {
            let p = model.c(r, s) / n as f64;
            if p <= 0.0 {
                continue;
            }
            let pairs = if r == s {
                let nr = groups[r].len() as u64;
                nr * nr.saturating_sub(1) / 2
            } else {
                groups[r].len() as u64 * groups[s].len() as u64
            };
            if pairs == 0 {
                continue;
            }
            let count = Binomial::new(pairs, p.min(1.0))
                .map_err(|e| Error::InvalidModel(e.to_string()))?
                .sample(&mut rng);
            chosen.clear();
            let mut placed = 0u64;
            while placed < count {
                let (u, v) = if r == s {
                    let a = rng.random_range(0..groups[r].len());
                    let b = rng.random_range(0..groups[r].len());
                    if a == b {
                        continue;
                    }
                    (groups[r][a], groups[r][b])
                } else {
                    let a = rng.random_range(0..groups[r].len());
                    let b = rng.random_range(0..groups[s].len());
                    (groups[r][a], groups[s][b])
                };
                let (u, v) = if u < v { (u, v) } else { (v, u) };
                let key = (u as u64) * n as u64 + v as u64;
                if chosen.insert(key) {
                    edges.push((u, v));
                    placed += 1;
                }
            }
        }
    }
    edges.sort_unstable();
    let graph = Graph::from_sorted_unique(n, &edges);
    let labels = LabelAssignment::new(labels, q)?;
    Ok((graph, labels))
}

/// Maximum-likelihood parameters from a fully observed (graph, labels)
/// pair, returned in scaled form with n_scale = N.
///
/// The diagonal denominator n_r (n_r − 1) follows the printed estimator;
/// a single-node class has no within pairs, and its diagonal entry is
/// reported as zero rather than 0/0.
pub fn estimate_complete(graph: &Graph, labels: &LabelAssignment, q: usize) -> Result<BlockModel> {
    let n = graph.n_nodes();
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "labels cover {} nodes, graph has {n}",
            labels.len()
        )));
    }
    if labels.q() != q {
        return Err(Error::InvalidInput(format!(
            "labels are for q = {}, requested q = {q}",
            labels.q()
        )));
    }
    let counts = labels.class_counts();
    if let Some(r) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Estimation(format!(
            "class {} is empty: cannot estimate its affinities",
            r + 1
        )));
    }
    let mut edge_counts = vec![0u64; q * q];
    for (i, j) in graph.undirected_edges() {
        let (r, s) = (labels.label(i as usize), labels.label(j as usize));
        edge_counts[r * q + s] += 1;
        if r != s {
            edge_counts[s * q + r] += 1;
        }
    }
    let nf = n as f64;
    let mut priors = vec![0.0; q];
    let mut affinity = vec![0.0; q * q];
    for r in 0..q {
        priors[r] = counts[r] as f64 / nf;
    }
    for r in 0..q {
        for s in 0..q {
            let pairs = if r == s {
                counts[r] as f64 * (counts[r] as f64 - 1.0) / 2.0
            } else {
                counts[r] as f64 * counts[s] as f64
            };
            let e = edge_counts[r * q + s] as f64;
            // p_rs = (1+δ)/(N p_r (N p_s − δ)) Σ A δδ, written via pair counts
            let p = if pairs == 0.0 { 0.0 } else { e / pairs };
            affinity[r * q + s] = nf * p;
        }
    }
    BlockModel::new(priors, affinity, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_affinity_gives_empty_graph() {
        let model = BlockModel::new(vec![0.5, 0.5], vec![0.0; 4], 100).unwrap();
        let (g, t) = generate(&model, 100, 1).unwrap();
        assert_eq!(g.n_edges(), 0);
        assert_eq!(t.len(), 100);
    }

    #[test]
    fn rejects_probability_above_one() {
        let model = BlockModel::new(vec![1.0], vec![50.0], 100).unwrap();
        assert!(generate(&model, 30, 1).is_err());
    }

    #[test]
    fn generated_graph_is_simple_and_symmetric() {
        let model = BlockModel::new(
            vec![0.5, 0.5],
            vec![8.0, 2.0, 2.0, 8.0],
            500,
        )
        .unwrap();
        for seed in 0..5 {
            let (g, _) = generate(&model, 500, seed).unwrap();
            g.check_invariants().unwrap();
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let model = BlockModel::new(vec![0.5, 0.5], vec![6.0, 1.0, 1.0, 6.0], 200).unwrap();
        let (g1, t1) = generate(&model, 200, 99).unwrap();
        let (g2, t2) = generate(&model, 200, 99).unwrap();
        assert_eq!(t1.labels(), t2.labels());
        assert_eq!(g1.n_edges(), g2.n_edges());
        assert!(g1.undirected_edges().eq(g2.undirected_edges()));
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        // single class: empirical mean degree approaches c
        let c = 5.0;
        let model = BlockModel::new(vec![1.0], vec![c], 20_000).unwrap();
        let (g, _) = generate(&model, 20_000, 7).unwrap();
        let kbar = g.mean_degree();
        assert!(
            (kbar - c).abs() < 0.15,
            "mean degree {kbar} too far from {c}"
        );
    }

    #[test]
    fn estimate_complete_hand_example() {
        // N=4, labels (1,1,2,2), edges {(0,1),(2,3)}
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let t = LabelAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let m = estimate_complete(&g, &t, 2).unwrap();
        assert_eq!(m.priors(), &[0.5, 0.5]);
        // p_11 = 2/(2·1)·1 = 1, scaled c = N·p = 4
        assert_eq!(m.c(0, 0), 4.0);
        assert_eq!(m.c(1, 1), 4.0);
        assert_eq!(m.c(0, 1), 0.0);
    }

    #[test]
    fn estimate_complete_complete_graph() {
        let mut edges = Vec::new();
        for i in 0..6u32 {
            for j in (i + 1)..6 {
                edges.push((i, j));
            }
        }
        let g = Graph::from_edges(6, &edges).unwrap();
        let t = LabelAssignment::new(vec![0; 6], 1).unwrap();
        let m = estimate_complete(&g, &t, 1).unwrap();
        assert_eq!(m.c(0, 0), 6.0); // p_11 = 1
    }

    #[test]
    fn estimate_complete_names_empty_class() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let t = LabelAssignment::new(vec![0, 0, 0], 2).unwrap();
        let err = estimate_complete(&g, &t, 2).unwrap_err();
        assert!(err.to_string().contains("class 2"), "{err}");
    }

    #[test]
    fn singleton_class_diagonal_is_zero() {
        let g = Graph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let t = LabelAssignment::new(vec![0, 0, 1], 2).unwrap();
        let m = estimate_complete(&g, &t, 2).unwrap();
        assert_eq!(m.c(1, 1), 0.0);
        assert!((m.c(0, 1) - 3.0 * 0.5).abs() < 1e-12); // 1 edge / 2 cross pairs
    }
}

//! Graph embeddings and the spectral clustering pipeline.

use super::kmeans::kmeans;
use super::lanczos::{top_eigenpairs, EigsOptions, Which};
use super::operators::{LinearOperator, ModularityOperator, WalkOperator};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::LabelAssignment;
use crate::rng::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Modularity,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    Modularity,
    Diffusion,
}

/// Node coordinates from a spectral method, columns ordered by
/// decreasing eigenvalue magnitude (among non-trivial pairs for the
/// diffusion kind).
#[derive(Debug, Clone)]
pub struct Embedding {
    pub kind: EmbeddingKind,
    /// Row-major n×d coordinates.
    pub coords: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub eigenvalues: Vec<f64>,
    pub diffusion_time: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Embedding dimension; defaults to q − 1.
    pub dim: Option<usize>,
    /// Diffusion time t.
    pub t: u32,
    /// Relative eigenpair retention precision δ for the diffusion map.
    pub delta: f64,
    /// Scale modularity coordinates by their eigenvalues before k-means.
    /// Off by default: raw eigenvector entries, magnitude ordering only.
    pub eigenvalue_weighting: bool,
    pub eig_tol: f64,
    pub eig_max_iters: usize,
    pub kmeans_restarts: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            dim: None,
            t: 3,
            delta: 1e-3,
            eigenvalue_weighting: false,
            eig_tol: 1e-6,
            eig_max_iters: 400,
            kmeans_restarts: 10,
        }
    }
}

/// Coordinates from the leading eigenvectors of B = A − k kᵀ/2M.
pub fn embed_modularity(graph: &Graph, d: usize, eigs: &EigsOptions) -> Result<Embedding> {
    let op = ModularityOperator::new(graph)?;
    let n = op.dim();
    if d == 0 || d > n {
        return Err(Error::InvalidInput(format!(
            "embedding dimension {d} invalid for {n} nodes"
        )));
    }
    let (values, vectors) = top_eigenpairs(&op, d, Which::LargestMagnitude, eigs)?;
    let mut coords = vec![0.0; n * d];
    for (c, vec) in vectors.iter().enumerate() {
        for i in 0..n {
            coords[i * d + c] = vec[i];
        }
    }
    Ok(Embedding {
        kind: EmbeddingKind::Modularity,
        coords,
        n,
        d,
        eigenvalues: values,
        diffusion_time: None,
    })
}

/// Diffusion-map coordinates λ_r^t φ_r(i) built from the walk operator
/// of a connected graph. The trivial λ = 1 pair is dropped; of the
/// remaining pairs ordered by |λ|, those with |λ_r|^t > δ |λ_2|^t are
/// retained, capped at d. Euclidean distances in the embedding
/// reproduce the diffusion distance D_t up to the δ truncation.
pub fn embed_diffusion(
    graph: &Graph,
    d: usize,
    t: u32,
    delta: f64,
    eigs: &EigsOptions,
) -> Result<Embedding> {
    if !graph.is_connected() {
        return Err(Error::InvalidGraph(
            "graph is disconnected: extract the largest connected component first".into(),
        ));
    }
    let op = WalkOperator::new(graph)?;
    let n = op.dim();
    if d == 0 || d >= n {
        return Err(Error::InvalidInput(format!(
            "need 1 ≤ d < n non-trivial pairs, got d = {d}, n = {n}"
        )));
    }
    let (values, vectors) = top_eigenpairs(&op, d + 1, Which::LargestMagnitude, eigs)?;
    // the trivial pair is the unique algebraically largest eigenvalue
    // (Perron root 1) of the connected walk matrix
    let trivial = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut kept: Vec<usize> = (0..values.len()).filter(|&i| i != trivial).collect();
    kept.sort_by(|&a, &b| values[b].abs().partial_cmp(&values[a].abs()).unwrap());
    if let Some(&lead) = kept.first() {
        let lam2 = values[lead].abs();
        let cut = delta * lam2.powi(t as i32);
        kept.retain(|&i| values[i].abs().powi(t as i32) > cut);
    }
    kept.truncate(d);
    if kept.is_empty() {
        return Err(Error::Degenerate(
            "no non-trivial eigenpairs survive the retention rule".into(),
        ));
    }

    // φ_r = √(2M) · D^{−1/2} v_r has unit π-norm, which is the scaling
    // under which Σ_r λ^{2t} (φ_r(i) − φ_r(j))² equals D_t²(i, j)
    let scale = (2.0 * graph.n_edges() as f64).sqrt();
    let inv_sqrt_deg = op.inv_sqrt_degrees();
    let dd = kept.len();
    let mut coords = vec![0.0; n * dd];
    let mut eigenvalues = Vec::with_capacity(dd);
    for (c, &idx) in kept.iter().enumerate() {
        let lam_t = values[idx].powi(t as i32);
        eigenvalues.push(values[idx]);
        for i in 0..n {
            coords[i * dd + c] = lam_t * scale * inv_sqrt_deg[i] * vectors[idx][i];
        }
    }
    Ok(Embedding {
        kind: EmbeddingKind::Diffusion,
        coords,
        n,
        d: dd,
        eigenvalues,
        diffusion_time: Some(t),
    })
}

/// Embedding → k-means pipeline. The diffusion route works on the
/// largest connected component; nodes outside it receive the label of
/// the largest cluster.
pub fn spectral_cluster(
    graph: &Graph,
    q: usize,
    method: SpectralMethod,
    opts: &SpectralOptions,
    seed: u64,
) -> Result<LabelAssignment> {
    if q < 2 {
        return Err(Error::InvalidInput("spectral clustering needs q ≥ 2".into()));
    }
    let dim = opts.dim.unwrap_or(q - 1);
    let eigs = EigsOptions {
        tol: opts.eig_tol,
        max_iters: opts.eig_max_iters,
        seed: mix_seed(seed, 101),
    };
    match method {
        SpectralMethod::Modularity => {
            let mut emb = embed_modularity(graph, dim, &eigs)?;
            if opts.eigenvalue_weighting {
                for i in 0..emb.n {
                    for c in 0..emb.d {
                        emb.coords[i * emb.d + c] *= emb.eigenvalues[c];
                    }
                }
            }
            let (labels, _) = kmeans(
                &emb.coords,
                emb.n,
                emb.d,
                q,
                opts.kmeans_restarts,
                mix_seed(seed, 202),
            )?;
            LabelAssignment::new(labels, q)
        }
        SpectralMethod::Diffusion => {
            let (lcc, map) = graph.largest_connected_component()?;
            let emb = embed_diffusion(&lcc, dim, opts.t, opts.delta, &eigs)?;
            let (labels, _) = kmeans(
                &emb.coords,
                emb.n,
                emb.d,
                q,
                opts.kmeans_restarts,
                mix_seed(seed, 202),
            )?;
            // outside the component: the dominant cluster's label
            let mut counts = vec![0usize; q];
            for &l in &labels {
                counts[l as usize] += 1;
            }
            let dominant = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i as u32)
                .unwrap();
            let full: Vec<u32> = (0..graph.n_nodes())
                .map(|i| match map.old_to_new[i] {
                    Some(new) => labels[new as usize],
                    None => dominant,
                })
                .collect();
            LabelAssignment::new(full, q)
        }
    }
}

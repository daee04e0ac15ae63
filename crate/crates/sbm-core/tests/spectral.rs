//! Spectral module checks against dense linear algebra references.

use nalgebra::DMatrix;
use sbm_core::generate::generate;
use sbm_core::graph::Graph;
use sbm_core::model::{BlockModel, StructurePreset};
use sbm_core::spectral::{
    embed_diffusion, embed_modularity, spectral_cluster, top_eigenpairs, EigsOptions,
    LinearOperator, ModularityOperator, SpectralMethod, SpectralOptions, WalkOperator, Which,
};

fn materialize(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut dense = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        op.apply(&unit, &mut col);
        unit[j] = 0.0;
        for i in 0..n {
            dense[(i, j)] = col[i];
        }
    }
    dense
}

fn sbm_graph(n: usize, q: usize, c: f64, eps: f64, seed: u64) -> Graph {
    let model = StructurePreset::modular(q, c, eps).expand(n).unwrap();
    generate(&model, n, seed).unwrap().0
}

#[test]
fn lanczos_matches_dense_diagonalization_on_sbm() {
    let g = sbm_graph(200, 2, 6.0, 0.15, 3);
    let op = ModularityOperator::new(&g).unwrap();
    let dense = materialize(&op);
    let sym = dense.clone().symmetric_eigen();
    let mut all: Vec<f64> = sym.eigenvalues.iter().copied().collect();
    all.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
    let opts = EigsOptions {
        tol: 1e-9,
        max_iters: 250,
        seed: 5,
    };
    let (vals, vecs) = top_eigenpairs(&op, 4, Which::LargestMagnitude, &opts).unwrap();
    for (i, v) in vals.iter().enumerate() {
        assert!(
            (v - all[i]).abs() < 1e-8,
            "eigenvalue {i}: {v} vs dense {}",
            all[i]
        );
    }
    // residuals certify the eigenvectors
    let mut out = vec![0.0; op.dim()];
    for (lam, vec) in vals.iter().zip(&vecs) {
        op.apply(vec, &mut out);
        let res: f64 = out
            .iter()
            .zip(vec)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-8, "residual {res}");
    }
}

#[test]
fn matrix_free_apply_matches_dense_materialization() {
    let g = sbm_graph(150, 2, 5.0, 0.3, 9);
    let (lcc, _) = g.largest_connected_component().unwrap();
    let mod_op = ModularityOperator::new(&lcc).unwrap();
    let walk_op = WalkOperator::new(&lcc).unwrap();
    for op in [&mod_op as &dyn LinearOperator, &walk_op as &dyn LinearOperator] {
        let dense = materialize(op);
        let n = op.dim();
        let mut rng = sbm_core::rng::rng_from_seed(11);
        use rand::Rng;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y = vec![0.0; n];
        op.apply(&x, &mut y);
        let xv = nalgebra::DVector::from_column_slice(&x);
        let want = &dense * xv;
        for i in 0..n {
            assert!((y[i] - want[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn modularity_annihilates_constant_vector_at_scale() {
    let g = sbm_graph(2000, 4, 10.0, 0.2, 21);
    let op = ModularityOperator::new(&g).unwrap();
    let ones = vec![1.0; 2000];
    let mut out = vec![0.0; 2000];
    op.apply(&ones, &mut out);
    let norm: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm <= 1e-10 * 2000.0, "‖B·1‖ = {norm}");
}

#[test]
fn walk_spectrum_lies_in_unit_interval() {
    let g = sbm_graph(500, 2, 4.0, 0.2, 2);
    let (lcc, _) = g.largest_connected_component().unwrap();
    let op = WalkOperator::new(&lcc).unwrap();
    let opts = EigsOptions {
        tol: 1e-8,
        max_iters: 300,
        seed: 1,
    };
    let (vals, _) = top_eigenpairs(&op, 6, Which::LargestMagnitude, &opts).unwrap();
    for v in vals {
        assert!(v.abs() <= 1.0 + 1e-10, "eigenvalue {v} outside [-1, 1]");
    }
}

#[test]
fn diffusion_coordinates_reproduce_diffusion_distance() {
    // dense t-step propagation oracle on a connected 100-node graph
    let g0 = sbm_graph(110, 2, 5.0, 0.2, 4);
    let (g, _) = g0.largest_connected_component().unwrap();
    let n = g.n_nodes();
    let t = 3u32;

    // full embedding: every non-trivial pair retained
    let opts = EigsOptions {
        tol: 1e-10,
        max_iters: 4 * n,
        seed: 3,
    };
    let emb = embed_diffusion(&g, n - 1, t, 0.0, &opts).unwrap();

    // dense P^t
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            p[(i, j as usize)] = 1.0 / g.degree(i) as f64;
        }
    }
    let mut pt = DMatrix::<f64>::identity(n, n);
    for _ in 0..t {
        pt = &pt * &p;
    }
    let two_m = 2.0 * g.n_edges() as f64;
    let pi: Vec<f64> = (0..n).map(|i| g.degree(i) as f64 / two_m).collect();

    let d2_direct = |i: usize, j: usize| -> f64 {
        (0..n)
            .map(|k| (pt[(i, k)] - pt[(j, k)]).powi(2) / pi[k])
            .sum()
    };
    let d2_embed = |i: usize, j: usize| -> f64 {
        (0..emb.d)
            .map(|c| (emb.coords[i * emb.d + c] - emb.coords[j * emb.d + c]).powi(2))
            .sum()
    };
    for i in 0..n {
        assert!(d2_embed(i, i) == 0.0);
    }
    for (i, j) in [(0usize, 1usize), (0, 50), (3, 70), (10, 11), (20, 90)] {
        let a = d2_direct(i, j);
        let b = d2_embed(i, j);
        assert!(
            (a - b).abs() <= 1e-8 * a.max(1.0),
            "D_t²({i},{j}): direct {a} vs embedding {b}"
        );
    }
}

#[test]
fn truncated_diffusion_embedding_respects_delta_bound() {
    let g0 = sbm_graph(110, 2, 5.0, 0.2, 4);
    let (g, _) = g0.largest_connected_component().unwrap();
    let n = g.n_nodes();
    let t = 3u32;
    let opts = EigsOptions {
        tol: 1e-10,
        max_iters: 4 * n,
        seed: 3,
    };
    let full = embed_diffusion(&g, n - 1, t, 0.0, &opts).unwrap();
    let delta = 0.05f64;
    let trunc = embed_diffusion(&g, n - 1, t, delta, &opts).unwrap();
    assert!(trunc.d < full.d);
    // every dropped pair satisfies |λ|^t ≤ δ|λ₂|^t, so the distance error
    // is bounded by the dropped tail
    let lam2 = full.eigenvalues[0].abs();
    for lam in &trunc.eigenvalues {
        assert!(lam.abs().powi(t as i32) > delta * lam2.powi(t as i32));
    }
    let dropped: Vec<usize> = (trunc.d..full.d).collect();
    for &c in &dropped {
        let lam = full.eigenvalues[c].abs();
        assert!(lam.powi(t as i32) <= delta * lam2.powi(t as i32) + 1e-12);
    }
}

#[test]
fn chance_level_on_uniform_graph() {
    let n = 2000usize;
    let model = BlockModel::new(vec![0.5, 0.5], vec![5.0; 4], n).unwrap();
    let (g, t) = generate(&model, n, 8).unwrap();
    for method in [SpectralMethod::Modularity, SpectralMethod::Diffusion] {
        let labels = spectral_cluster(&g, 2, method, &SpectralOptions::default(), 3).unwrap();
        let (q, _) = sbm_core::metrics::overlap(&labels, &t, 2).unwrap();
        assert!(q < 0.62, "{method:?}: overlap {q} above chance band");
    }
}

#[test]
fn detectable_structure_is_recovered_deep_in_feasible_phase() {
    let n = 3000usize;
    let model = StructurePreset::modular(2, 8.0, 0.05).expand(n).unwrap();
    let (g, t) = generate(&model, n, 12).unwrap();
    for method in [SpectralMethod::Modularity, SpectralMethod::Diffusion] {
        let labels = spectral_cluster(&g, 2, method, &SpectralOptions::default(), 3).unwrap();
        let (q, _) = sbm_core::metrics::overlap(&labels, &t, 2).unwrap();
        assert!(q > 0.9, "{method:?}: overlap {q}");
    }
}

#[test]
fn modularity_embedding_rejects_empty_graph() {
    let g = Graph::from_edges(5, &[]).unwrap();
    assert!(embed_modularity(&g, 1, &EigsOptions::default()).is_err());
}

//! Belief propagation engine contract tests.

use sbm_core::bp::{init_messages, run_estep, BpEngine};
use sbm_core::engine::{BeliefInit, EstepOptions};
use sbm_core::generate::generate;
use sbm_core::graph::Graph;
use sbm_core::model::{BlockModel, LabelAssignment, StructurePreset};

fn uniform_four_groups(c: f64, n_scale: usize) -> BlockModel {
    BlockModel::new(vec![0.25; 4], vec![c; 16], n_scale).unwrap()
}

#[test]
fn init_uniform_gives_equal_entries() {
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let m = uniform_four_groups(2.0, 3);
    let msgs = init_messages(&g, &m, BeliefInit::Uniform, 0).unwrap();
    for e in 0..g.n_directed() {
        assert_eq!(msgs.message(e), &[0.25, 0.25, 0.25, 0.25]);
    }
}

#[test]
fn init_from_labels_tilts_to_label() {
    let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
    let m = BlockModel::new(vec![0.5, 0.5], vec![1.0; 4], 2).unwrap();
    let t = LabelAssignment::new(vec![1, 0], 2).unwrap();
    let msgs = init_messages(&g, &m, BeliefInit::FromLabels(&t), 0).unwrap();
    // node 0 carries label 2 (1-based): mass 0.999 on class index 1
    assert_eq!(msgs.message(0), &[1e-3, 0.999]);
    assert_eq!(msgs.message(1), &[0.999, 1e-3]);
}

#[test]
fn init_random_is_deterministic_and_normalized() {
    let n = 200usize;
    let model = BlockModel::new(vec![0.25; 4], vec![8.0, 2.0, 2.0, 2.0, 2.0, 8.0, 2.0, 2.0, 2.0, 2.0, 8.0, 2.0, 2.0, 2.0, 2.0, 8.0], n).unwrap();
    let (g, _) = generate(&model, n, 5).unwrap();
    let a = init_messages(&g, &model, BeliefInit::Random, 99).unwrap();
    let b = init_messages(&g, &model, BeliefInit::Random, 99).unwrap();
    assert_eq!(a.data(), b.data(), "same seed, same bits");
    let c = init_messages(&g, &model, BeliefInit::Random, 100).unwrap();
    assert_ne!(a.data(), c.data());
    assert!(a.max_sum_error() < 1e-12);
}

#[test]
fn uniform_affinity_is_exact_fixed_point() {
    // factorized fixed point: with equal priors and a flat affinity the
    // field is class-independent, so one sweep changes nothing at all
    let n = 300usize;
    let model = uniform_four_groups(6.0, n);
    let (g, _) = generate(&model, n, 7).unwrap();
    let msgs = init_messages(&g, &model, BeliefInit::Uniform, 0).unwrap();
    let mut engine = BpEngine::new(&g, &model, msgs, 1).unwrap();
    let delta = engine.sweep(0.0).unwrap();
    assert_eq!(delta, 0.0, "uniform start must be an exact fixed point");
    let marg = engine.marginals();
    for i in 0..n {
        for r in 0..4 {
            assert!((marg.row(i)[r] - 0.25).abs() < 1e-14);
        }
    }
}

#[test]
fn degree_one_message_is_prior_tilted_by_external_field() {
    // ∂i\j is empty for the endpoints of a single edge, so the converged
    // message must be exactly p_r e^{-θ_r} normalized
    let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
    let model = BlockModel::new(vec![0.5, 0.5], vec![1.8, 0.2, 0.2, 1.8], 2).unwrap();
    let opts = EstepOptions {
        tol: 1e-14,
        max_iters: 200,
        damping: 0.0,
    };
    let (_, msgs, report) = run_estep(&g, &model, &opts, BeliefInit::Random, 3).unwrap();
    assert!(report.converged);
    // recover θ from a fresh engine at the converged messages
    let engine = BpEngine::new(&g, &model, msgs.clone(), 1).unwrap();
    let theta = engine.external_field();
    let w: Vec<f64> = (0..2).map(|r| 0.5 * (-theta[r]).exp()).collect();
    let z = w[0] + w[1];
    for e in 0..2 {
        for r in 0..2 {
            assert!(
                (msgs.message(e)[r] - w[r] / z).abs() < 1e-9,
                "edge {e} class {r}: {} vs {}",
                msgs.message(e)[r],
                w[r] / z
            );
        }
    }
}

#[test]
fn bethe_free_energy_single_class_path_golden() {
    // q = 1 on the 3-node path collapses symbolically to
    // F = -(2/3) ln c + c - 2/3
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let c = 1.5f64;
    let model = BlockModel::new(vec![1.0], vec![c], 3).unwrap();
    let msgs = init_messages(&g, &model, BeliefInit::Uniform, 0).unwrap();
    let engine = BpEngine::new(&g, &model, msgs, 0).unwrap();
    let expected = -(2.0 / 3.0) * c.ln() + c - 2.0 / 3.0;
    let got = engine.bethe_free_energy().unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn free_energy_at_factorized_point_is_seed_independent() {
    let n = 400usize;
    let model = uniform_four_groups(5.0, n);
    let (g, _) = generate(&model, n, 13).unwrap();
    let opts = EstepOptions::default();
    let (_, _, r1) = run_estep(&g, &model, &opts, BeliefInit::Random, 1).unwrap();
    let (_, _, r2) = run_estep(&g, &model, &opts, BeliefInit::Random, 2).unwrap();
    assert!(r1.converged && r2.converged);
    assert!(r1.iterations <= 2 && r2.iterations <= 2);
    assert!(
        (r1.free_energy - r2.free_energy).abs() < 1e-9,
        "{} vs {}",
        r1.free_energy,
        r2.free_energy
    );
}

#[test]
fn messages_and_marginals_stay_normalized() {
    let n = 500usize;
    let preset = StructurePreset::modular(3, 8.0, 0.2);
    let model = preset.expand(n).unwrap();
    let (g, _) = generate(&model, n, 21).unwrap();
    let msgs = init_messages(&g, &model, BeliefInit::Random, 4).unwrap();
    let mut engine = BpEngine::new(&g, &model, msgs, 5).unwrap();
    for _ in 0..30 {
        engine.sweep(0.0).unwrap();
        assert!(engine.messages().max_sum_error() < 1e-12);
        assert!(engine.marginals().max_row_sum_error() < 1e-12);
    }
}

#[test]
fn incremental_external_field_tracks_recomputation() {
    let n = 400usize;
    let preset = StructurePreset::modular(2, 6.0, 0.3);
    let model = preset.expand(n).unwrap();
    let (g, _) = generate(&model, n, 2).unwrap();
    let msgs = init_messages(&g, &model, BeliefInit::Random, 8).unwrap();
    let mut engine = BpEngine::new(&g, &model, msgs, 9).unwrap();
    for sweep in 0..1000 {
        engine.sweep(0.2).unwrap();
        if sweep % 97 == 0 {
            let theta = engine.external_field().to_vec();
            let fresh = engine.external_field_recomputed();
            for (a, b) in theta.iter().zip(&fresh) {
                assert!((a - b).abs() < 1e-10, "sweep {sweep}: {a} vs {b}");
            }
        }
    }
    let theta = engine.external_field().to_vec();
    let fresh = engine.external_field_recomputed();
    for (a, b) in theta.iter().zip(&fresh) {
        assert!((a - b).abs() < 1e-10, "after 1000 sweeps: {a} vs {b}");
    }
}

#[test]
fn swap_permutation_equivariance_is_exact() {
    let n = 300usize;
    let model =
        BlockModel::new(vec![0.3, 0.7], vec![9.0, 2.0, 2.0, 5.0], n).unwrap();
    let (g, t) = generate(&model, n, 31).unwrap();
    let perm = vec![1usize, 0];
    let pmodel = model.permuted(&perm).unwrap();
    let pt = t.permuted(&[1, 0]).unwrap();

    let msgs = init_messages(&g, &model, BeliefInit::FromLabels(&t), 0).unwrap();
    let pmsgs = init_messages(&g, &pmodel, BeliefInit::FromLabels(&pt), 0).unwrap();

    let mut e1 = BpEngine::new(&g, &model, msgs, 77).unwrap();
    let mut e2 = BpEngine::new(&g, &pmodel, pmsgs, 77).unwrap();
    for _ in 0..20 {
        e1.sweep(0.0).unwrap();
        e2.sweep(0.0).unwrap();
    }
    // a two-class swap reorders no floating-point sums, so the match is
    // bitwise
    let m1 = e1.marginals().permuted(&perm);
    let m2 = e2.marginals();
    assert_eq!(m1.data(), m2.data());
}

#[test]
fn four_class_permutation_equivariance() {
    let n = 300usize;
    let preset = StructurePreset::modular(4, 8.0, 0.25);
    let base = preset.expand(n).unwrap();
    // break the class symmetry so the test is not vacuous
    let mut aff = base.affinity().to_vec();
    aff[0] = 12.0;
    aff[5] = 7.0;
    let model = BlockModel::new(vec![0.1, 0.2, 0.3, 0.4], aff, n).unwrap();
    let (g, t) = generate(&model, n, 33).unwrap();

    let perm = vec![2usize, 0, 3, 1];
    let pmodel = model.permuted(&perm).unwrap();
    // labels under the inverse relabeling: class t becomes inv[t]
    let mut inv = vec![0usize; 4];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let pt = t.permuted(&inv).unwrap();

    let msgs = init_messages(&g, &model, BeliefInit::FromLabels(&t), 0).unwrap();
    let pmsgs = init_messages(&g, &pmodel, BeliefInit::FromLabels(&pt), 0).unwrap();
    let mut e1 = BpEngine::new(&g, &model, msgs, 7).unwrap();
    let mut e2 = BpEngine::new(&g, &pmodel, pmsgs, 7).unwrap();
    for _ in 0..25 {
        e1.sweep(0.0).unwrap();
        e2.sweep(0.0).unwrap();
    }
    let m1 = e1.marginals().permuted(&perm);
    let m2 = e2.marginals();
    let mut worst = 0.0f64;
    for i in 0..n {
        for r in 0..4 {
            worst = worst.max((m1.row(i)[r] - m2.row(i)[r]).abs());
        }
    }
    // permuted summation order may differ in the last ulps
    assert!(worst < 1e-12, "worst deviation {worst}");
}

#[test]
fn run_estep_is_deterministic() {
    let n = 400usize;
    let preset = StructurePreset::modular(2, 5.0, 0.2);
    let model = preset.expand(n).unwrap();
    let (g, _) = generate(&model, n, 17).unwrap();
    let opts = EstepOptions::default();
    let (m1, s1, r1) = run_estep(&g, &model, &opts, BeliefInit::Random, 5).unwrap();
    let (m2, s2, r2) = run_estep(&g, &model, &opts, BeliefInit::Random, 5).unwrap();
    assert_eq!(m1.data(), m2.data());
    assert_eq!(s1.data(), s2.data());
    assert_eq!(r1.iterations, r2.iterations);
}

#[test]
fn nonconvergence_is_reported_not_an_error() {
    let n = 600usize;
    // near the transition with a one-sweep budget: cannot converge
    let preset = StructurePreset::modular(4, 16.0, 0.4);
    let model = preset.expand(n).unwrap();
    let (g, _) = generate(&model, n, 3).unwrap();
    let opts = EstepOptions {
        tol: 1e-12,
        max_iters: 1,
        damping: 0.0,
    };
    let (_, _, report) = run_estep(&g, &model, &opts, BeliefInit::Random, 1).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 1);
    assert!(report.final_delta > 1e-12);
}

#[test]
fn isolated_nodes_get_field_tilted_priors() {
    // a graph with an isolated node: its marginal is p_r e^{-θ_r} up to
    // normalization
    let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
    let model = BlockModel::new(vec![0.4, 0.6], vec![2.0, 0.5, 0.5, 1.0], 3).unwrap();
    let opts = EstepOptions {
        tol: 1e-13,
        max_iters: 500,
        damping: 0.0,
    };
    let (marg, _, report) = run_estep(&g, &model, &opts, BeliefInit::Uniform, 0).unwrap();
    assert!(report.converged);
    // θ by its definition over the returned marginals
    let mut theta = [0.0f64; 2];
    for r in 0..2 {
        for i in 0..3 {
            for s in 0..2 {
                theta[r] += model.c(r, s) * marg.row(i)[s] / 3.0;
            }
        }
    }
    let w: Vec<f64> = (0..2).map(|r| model.priors()[r] * (-theta[r]).exp()).collect();
    let z = w[0] + w[1];
    for r in 0..2 {
        assert!(
            (marg.row(2)[r] - w[r] / z).abs() < 1e-9,
            "{} vs {}",
            marg.row(2)[r],
            w[r] / z
        );
    }
}

use sbm_core::bp;
use sbm_core::em::{run_em, EmConfig, EngineKind, InitStrategy};
use sbm_core::engine::{BeliefInit, EstepOptions};
use sbm_core::generate::generate;
use sbm_core::metrics;
use sbm_core::model::{StructureKind, StructurePreset};
use sbm_core::rng::mix_seed;
use sbm_core::spectral::{spectral_cluster, SpectralMethod, SpectralOptions};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "cp".into());
    if which == "cp" {
        // criterion 6 regime: core-periphery c=4.5, N=1e4
        let n = 10_000usize;
        for eps in [0.0f64, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45] {
            let preset = StructurePreset {
                kind: StructureKind::CorePeriphery,
                q: 2,
                mean_degree: 4.5,
                epsilon: eps,
            };
            let model = preset.expand(n).unwrap();
            let mut qmods = Vec::new();
            let mut qbps = Vec::new();
            let mut doms = Vec::new();
            for rep in 0..3u64 {
                let seed = mix_seed(mix_seed(7, (eps * 100.0) as u64), rep);
                let (g, t) = generate(&model, n, seed).unwrap();
                let labels = spectral_cluster(
                    &g,
                    2,
                    SpectralMethod::Modularity,
                    &SpectralOptions::default(),
                    mix_seed(seed, 3),
                )
                .unwrap();
                let (qm, _) = metrics::overlap(&labels, &t, 2).unwrap();
                let counts = labels.class_counts();
                doms.push(*counts.iter().max().unwrap() as f64 / n as f64);
                qmods.push(qm);
                let (marg, _, _) = bp::run_estep(
                    &g,
                    &model,
                    &EstepOptions { damping: 0.2, ..EstepOptions::default() },
                    BeliefInit::Random,
                    mix_seed(seed, 4),
                )
                .unwrap();
                let est = metrics::marginalize(&marg, mix_seed(seed, 5));
                let (qb, _) = metrics::overlap(&est, &t, 2).unwrap();
                qbps.push(qb);
            }
            let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "eps={eps:.2}: Q_mod={:.3} dom={:.3} Q_bp={:.3} gap={:+.3}",
                mean(&qmods),
                mean(&doms),
                mean(&qbps),
                mean(&qbps) - mean(&qmods)
            );
        }
    } else {
        // criterion 7 regime: q=4, eps=0.35, c=16, N=1e4
        let n = 10_000usize;
        let preset = StructurePreset::modular(4, 16.0, 0.35);
        let model = preset.expand(n).unwrap();
        let (g, t) = generate(&model, n, 99).unwrap();
        let estep = EstepOptions { max_iters: 400, ..EstepOptions::default() };

        let raw = spectral_cluster(
            &g,
            4,
            SpectralMethod::Diffusion,
            &SpectralOptions::default(),
            5,
        );
        let q_raw = match &raw {
            Ok(labels) => metrics::overlap(labels, &t, 4).unwrap().0,
            Err(e) => {
                println!("raw spectral error: {e}");
                f64::NAN
            }
        };
        println!("raw spectral (diffusion) Q = {q_raw:.3}");

        let t0 = std::time::Instant::now();
        let config = EmConfig {
            engine: EngineKind::Bp,
            estep,
            max_rounds: 12,
            param_tol: 1e-3,
            n_restarts: 1,
            init: InitStrategy::Spectral(SpectralMethod::Diffusion),
            ..EmConfig::default()
        };
        let em_spec = run_em(&g, 4, &config, 17).unwrap();
        let est = metrics::marginalize(&em_spec.marginals, 3);
        let (q_spec, _) = metrics::overlap(&est, &t, 4).unwrap();
        println!(
            "EM-BP from spectral init: Q = {q_spec:.3} (rounds {}, {:.1}s)",
            em_spec.restarts[0].rounds,
            t0.elapsed().as_secs_f64()
        );

        let mut q_randoms = Vec::new();
        for restart in 0..20u64 {
            let t1 = std::time::Instant::now();
            let config = EmConfig {
                engine: EngineKind::Bp,
                estep,
                max_rounds: 12,
                param_tol: 1e-3,
                n_restarts: 1,
                init: InitStrategy::RandomAffinity,
                ..EmConfig::default()
            };
            let r = run_em(&g, 4, &config, mix_seed(1000, restart)).unwrap();
            let est = metrics::marginalize(&r.marginals, 3);
            let (q, _) = metrics::overlap(&est, &t, 4).unwrap();
            q_randoms.push(q);
            println!("  random restart {restart}: Q = {q:.3} ({:.1}s)", t1.elapsed().as_secs_f64());
        }
        q_randoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (q_randoms[9] + q_randoms[10]);
        println!("median of 20 random EM-BP restarts: {median:.3}");
    }
}

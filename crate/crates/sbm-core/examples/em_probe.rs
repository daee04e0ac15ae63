use sbm_core::generate::generate;
use sbm_core::metrics;
use sbm_core::model::StructurePreset;
use sbm_core::spectral::{spectral_cluster, SpectralMethod, SpectralOptions};

fn main() {
    let n = 100_000usize;
    let model = StructurePreset::modular(2, 3.0, 0.05).expand(n).unwrap();
    for seed in [42u64, 43] {
        let (g, t) = generate(&model, n, seed).unwrap();
        for dim in [8usize, 24, 64] {
            let so = SpectralOptions {
                dim: Some(dim),
                eig_max_iters: 900,
                eig_tol: 1e-5,
                ..SpectralOptions::default()
            };
            match spectral_cluster(&g, 2, SpectralMethod::Diffusion, &so, 3) {
                Ok(labels) => {
                    let (q, _) = metrics::overlap(&labels, &t, 2).unwrap();
                    print!("diff(d={dim}): Q={q:.3}  ");
                }
                Err(e) => print!("diff(d={dim}): ERR {e}  "),
            }
        }
        // modularity with eigenvalue weighting knob
        for (dim, w) in [(1usize, true), (2, true), (3, true)] {
            let so = SpectralOptions {
                dim: Some(dim),
                eigenvalue_weighting: w,
                eig_max_iters: 900,
                eig_tol: 1e-5,
                ..SpectralOptions::default()
            };
            match spectral_cluster(&g, 2, SpectralMethod::Modularity, &so, 3) {
                Ok(labels) => {
                    let (q, _) = metrics::overlap(&labels, &t, 2).unwrap();
                    print!("modw(d={dim}): Q={q:.3}  ");
                }
                Err(e) => print!("modw(d={dim}): ERR {e}  "),
            }
        }
        println!("[seed {seed}]");
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sbm_cli::harness::{
    emit_summary, emit_tsv, run_sweep, EmSweepOptions, EngineSel, ExperimentSpec, Preset,
    SweepAxis,
};
use sbm_core::bp;
use sbm_core::em::{self, EmConfig, EngineKind, InitStrategy};
use sbm_core::engine::{BeliefInit, EstepOptions};
use sbm_core::error::Error;
use sbm_core::generate::generate;
use sbm_core::io;
use sbm_core::metrics;
use sbm_core::mf::{self, MassMode};
use sbm_core::model::{BlockModel, StructureKind, StructurePreset};
use sbm_core::spectral::{
    embed_diffusion, embed_modularity, spectral_cluster, EigsOptions, SpectralMethod,
    SpectralOptions,
};

#[derive(Parser)]
#[command(
    name = "sbm",
    about = "Stochastic block model generation, inference and benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    #[value(name = "four-groups")]
    FourGroups,
    #[value(name = "two-groups")]
    TwoGroups,
    #[value(name = "core-periphery")]
    CorePeriphery,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Bp,
    Mf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Modularity,
    Diffusion,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Epsilon,
    #[value(name = "mean-degree")]
    MeanDegree,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Summary,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    #[value(name = "spectral-modularity")]
    SpectralModularity,
    #[value(name = "spectral-diffusion")]
    SpectralDiffusion,
}

#[derive(Args)]
struct ModelSource {
    /// Benchmark preset supplying the affinity.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Model file (scaled affinity) instead of a preset.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of classes for the modular preset.
    #[arg(long, default_value_t = 4)]
    q: usize,
    /// Mean degree ⟨k⟩ of the preset.
    #[arg(long, default_value_t = 16.0)]
    c: f64,
    /// Affinity contrast ε = c_out / c_in.
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
}

impl ModelSource {
    fn build(&self, n: usize) -> Result<BlockModel, Error> {
        if let Some(path) = &self.model {
            return io::read_model(path, n);
        }
        let preset = match self.preset.unwrap_or(PresetArg::FourGroups) {
            PresetArg::FourGroups => StructurePreset::modular(self.q, self.c, self.epsilon),
            PresetArg::TwoGroups => StructurePreset::modular(2, self.c, self.epsilon),
            PresetArg::CorePeriphery => StructurePreset {
                kind: StructureKind::CorePeriphery,
                q: 2,
                mean_degree: self.c,
                epsilon: self.epsilon,
            },
        };
        preset.expand(n)
    }
}

#[derive(Args)]
struct EstepArgs {
    /// Convergence tolerance on the L∞ message/belief change.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap for one E-step.
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Damping λ_d in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
}

impl EstepArgs {
    fn options(&self) -> EstepOptions {
        EstepOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            damping: self.damping,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a network and its planted labels from a block model.
    Generate {
        #[command(flatten)]
        model: ModelSource,
        #[arg(long = "N", default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <out>.graph.txt, <out>.labels.txt,
        /// <out>.model.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one known-parameters E-step and dump marginals.
    Infer {
        #[arg(long)]
        graph: PathBuf,
        /// Model file with the (scaled) parameters to infer under.
        #[arg(long)]
        model: PathBuf,
        /// Planted labels; when given, a score report is printed.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EngineArg::Bp)]
        engine: EngineArg,
        #[command(flatten)]
        estep: EstepArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <out>.marginals.tsv and <out>.report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn parameters by expectation maximization.
    Em {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 4)]
        q: usize,
        #[arg(long, value_enum, default_value_t = EngineArg::Bp)]
        engine: EngineArg,
        #[command(flatten)]
        estep: EstepArgs,
        #[arg(long, value_enum, default_value_t = InitArg::Random)]
        init: InitArg,
        /// Starting model file (overrides --init).
        #[arg(long)]
        init_model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
        #[arg(long, default_value_t = 1e-4)]
        param_tol: f64,
        /// Keep the priors fixed at their initial values.
        #[arg(long)]
        fix_priors: bool,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for restarts (0 = default).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Output prefix; writes <out>.model.txt, <out>.trace.txt,
        /// <out>.summary.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral embedding and clustering.
    Spectral {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Modularity)]
        method: MethodArg,
        /// Embedding dimension (default q − 1).
        #[arg(long)]
        dim: Option<usize>,
        /// Diffusion time t.
        #[arg(long, default_value_t = 3)]
        t: u32,
        /// Eigenpair retention precision δ for the diffusion map.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <out>.labels.txt (and
        /// <out>.embedding.tsv with --embedding).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the embedding coordinates.
        #[arg(long)]
        embedding: bool,
    },
    /// Replication sweeps over ε or the mean degree.
    Sweep {
        #[arg(long, value_enum, default_value_t = PresetArg::FourGroups)]
        preset: PresetArg,
        #[arg(long, default_value_t = 4)]
        q: usize,
        #[arg(long = "N", default_value_t = 10_000)]
        n: usize,
        #[arg(long, value_enum, default_value_t = AxisArg::Epsilon)]
        axis: AxisArg,
        #[arg(long, default_value_t = 0.1)]
        from: f64,
        #[arg(long, default_value_t = 0.9)]
        to: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Mean degree, fixed while ε sweeps.
        #[arg(long, default_value_t = 16.0)]
        c: f64,
        /// ε, fixed while the mean degree sweeps.
        #[arg(long, default_value_t = 0.35)]
        epsilon: f64,
        /// Comma-separated engines: bp, mf, spectral-modularity,
        /// spectral-diffusion, em-bp, em-mf.
        #[arg(long, default_value = "bp,mf")]
        engines: String,
        #[arg(long, default_value_t = 5)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        estep: EstepArgs,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// EM initialization for the em-* engines.
        #[arg(long, value_enum, default_value_t = InitArg::Random)]
        init: InitArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
        format: FormatArg,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an estimated assignment against the truth.
    Score {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        q: usize,
        /// Marginals backing the estimate, for the confidence column.
        #[arg(long)]
        marginals: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) | Error::NoConvergence(_) | Error::Estimation(_)
        | Error::Degenerate(_) => 2,
        Error::Io(_) | Error::Parse(_) => 3,
        _ => 1,
    }
}

fn write_or_print(path: &Option<PathBuf>, suffix: &str, content: &str) -> Result<(), Error> {
    match path {
        Some(prefix) => {
            let mut name = prefix.as_os_str().to_owned();
            name.push(suffix);
            std::fs::write(PathBuf::from(name), content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { model, n, seed, out } => {
            let block_model = model.build(n)?;
            let (graph, labels) = generate(&block_model, n, seed)?;
            let mut base = out.as_os_str().to_owned();
            base.push(".graph.txt");
            io::write_graph(&graph, &PathBuf::from(&base))?;
            let mut base = out.as_os_str().to_owned();
            base.push(".labels.txt");
            io::write_labels(&labels, &PathBuf::from(&base))?;
            let mut base = out.as_os_str().to_owned();
            base.push(".model.txt");
            io::write_model(&block_model, &PathBuf::from(&base))?;
            eprintln!(
                "generated N={} M={} mean degree {:.3}",
                graph.n_nodes(),
                graph.n_edges(),
                graph.mean_degree()
            );
            Ok(())
        }
        Command::Infer {
            graph,
            model,
            labels,
            engine,
            estep,
            seed,
            out,
        } => {
            let g = io::read_graph(&graph)?;
            let m = io::read_model(&model, g.n_nodes())?;
            let opts = estep.options();
            let (marginals, report) = match engine {
                EngineArg::Bp => {
                    let (marg, _, rep) =
                        bp::run_estep(&g, &m, &opts, BeliefInit::Random, seed)?;
                    (marg, rep)
                }
                EngineArg::Mf => {
                    let (marg, rep) = mf::run_estep(
                        &g,
                        &m,
                        &opts,
                        BeliefInit::Random,
                        MassMode::BeliefMass,
                        seed,
                    )?;
                    (marg, rep)
                }
            };
            if let Some(prefix) = &out {
                let mut name = prefix.as_os_str().to_owned();
                name.push(".marginals.tsv");
                io::write_marginals(&marginals, &PathBuf::from(name))?;
            }
            write_or_print(&out, ".report.txt", &io::engine_report_text(&report))?;
            if let Some(truth_path) = labels {
                let truth = io::read_labels(&truth_path, m.q())?;
                let est = metrics::marginalize(&marginals, sbm_core::rng::mix_seed(seed, 9));
                let score = metrics::score(&est, &truth, Some(&marginals), m.q())?;
                write_or_print(&out, ".score.txt", &io::score_report_text(&score))?;
            }
            Ok(())
        }
        Command::Em {
            graph,
            q,
            engine,
            estep,
            init,
            init_model,
            restarts,
            rounds,
            param_tol,
            fix_priors,
            labels,
            seed,
            threads,
            out,
        } => {
            let g = io::read_graph(&graph)?;
            let init_strategy = match (&init_model, init) {
                (Some(path), _) => InitStrategy::Given(io::read_model(path, g.n_nodes())?),
                (None, InitArg::Random) => InitStrategy::RandomAffinity,
                (None, InitArg::SpectralModularity) => {
                    InitStrategy::Spectral(SpectralMethod::Modularity)
                }
                (None, InitArg::SpectralDiffusion) => {
                    InitStrategy::Spectral(SpectralMethod::Diffusion)
                }
            };
            let config = EmConfig {
                engine: match engine {
                    EngineArg::Bp => EngineKind::Bp,
                    EngineArg::Mf => EngineKind::Mf,
                },
                estep: estep.options(),
                max_rounds: rounds,
                param_tol,
                n_restarts: restarts,
                init: init_strategy,
                learn_priors: !fix_priors,
                ..EmConfig::default()
            };
            let result = if threads > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?
                    .install(|| em::run_em(&g, q, &config, seed))?
            } else {
                em::run_em(&g, q, &config, seed)?
            };
            if let Some(prefix) = &out {
                let mut name = prefix.as_os_str().to_owned();
                name.push(".model.txt");
                io::write_model(&result.model, &PathBuf::from(name))?;
                let trace: String = result
                    .free_energy_trace
                    .iter()
                    .map(|v| format!("{v}\n"))
                    .collect();
                let mut name = prefix.as_os_str().to_owned();
                name.push(".trace.txt");
                std::fs::write(PathBuf::from(name), trace)?;
            }
            let mut summary = String::new();
            summary.push_str(&format!(
                "selected_restart={}\nrounds={}\nfree_energy={}\n",
                result.selected_restart,
                result.restarts[result.selected_restart].rounds,
                result.restarts[result.selected_restart].free_energy
            ));
            for r in &result.restarts {
                summary.push_str(&format!(
                    "restart={} converged={} rounds={} free_energy={}{}\n",
                    r.index,
                    r.converged,
                    r.rounds,
                    r.free_energy,
                    r.error
                        .as_ref()
                        .map(|e| format!(" error={e}"))
                        .unwrap_or_default()
                ));
            }
            write_or_print(&out, ".summary.txt", &summary)?;
            if let Some(truth_path) = labels {
                let truth = io::read_labels(&truth_path, q)?;
                let est =
                    metrics::marginalize(&result.marginals, sbm_core::rng::mix_seed(seed, 9));
                let score = metrics::score(&est, &truth, Some(&result.marginals), q)?;
                write_or_print(&out, ".score.txt", &io::score_report_text(&score))?;
            }
            Ok(())
        }
        Command::Spectral {
            graph,
            q,
            method,
            dim,
            t,
            delta,
            restarts,
            labels,
            seed,
            out,
            embedding,
        } => {
            let g = io::read_graph(&graph)?;
            let opts = SpectralOptions {
                dim,
                t,
                delta,
                kmeans_restarts: restarts,
                ..SpectralOptions::default()
            };
            let method = match method {
                MethodArg::Modularity => SpectralMethod::Modularity,
                MethodArg::Diffusion => SpectralMethod::Diffusion,
            };
            if embedding {
                let eigs = EigsOptions {
                    tol: opts.eig_tol,
                    max_iters: opts.eig_max_iters,
                    seed,
                };
                let emb = match method {
                    SpectralMethod::Modularity => {
                        embed_modularity(&g, dim.unwrap_or(q - 1), &eigs)?
                    }
                    SpectralMethod::Diffusion => {
                        let (lcc, _) = g.largest_connected_component()?;
                        embed_diffusion(&lcc, dim.unwrap_or(q - 1), t, delta, &eigs)?
                    }
                };
                if let Some(prefix) = &out {
                    let mut name = prefix.as_os_str().to_owned();
                    name.push(".embedding.tsv");
                    io::write_embedding(&emb, &PathBuf::from(name))?;
                }
            }
            let est = spectral_cluster(&g, q, method, &opts, seed)?;
            if let Some(prefix) = &out {
                let mut name = prefix.as_os_str().to_owned();
                name.push(".labels.txt");
                io::write_labels(&est, &PathBuf::from(name))?;
            }
            if let Some(truth_path) = labels {
                let truth = io::read_labels(&truth_path, q)?;
                let score = metrics::score(&est, &truth, None, q)?;
                write_or_print(&out, ".score.txt", &io::score_report_text(&score))?;
            }
            Ok(())
        }
        Command::Sweep {
            preset,
            q,
            n,
            axis,
            from,
            to,
            step,
            c,
            epsilon,
            engines,
            replicates,
            seed,
            estep,
            restarts,
            init,
            format,
            threads,
            out,
        } => {
            let engines = engines
                .split(',')
                .map(|s| EngineSel::parse(s.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = ExperimentSpec {
                preset: match preset {
                    PresetArg::FourGroups => Preset::FourGroups { q },
                    PresetArg::TwoGroups => Preset::TwoGroups,
                    PresetArg::CorePeriphery => Preset::CorePeriphery,
                },
                n,
                axis: match axis {
                    AxisArg::Epsilon => SweepAxis::Epsilon,
                    AxisArg::MeanDegree => SweepAxis::MeanDegree,
                },
                start: from,
                stop: to,
                step,
                fixed_epsilon: epsilon,
                fixed_mean_degree: c,
                engines,
                replicates,
                base_seed: seed,
                estep: estep.options(),
                spectral: SpectralOptions::default(),
                em: EmSweepOptions {
                    n_restarts: restarts,
                    spectral_init: match init {
                        InitArg::Random => None,
                        InitArg::SpectralModularity => Some(SpectralMethod::Modularity),
                        InitArg::SpectralDiffusion => Some(SpectralMethod::Diffusion),
                    },
                    ..EmSweepOptions::default()
                },
                workers: threads,
            };
            let result = run_sweep(&spec)?;
            let text = match format {
                FormatArg::Tsv => emit_tsv(&result),
                FormatArg::Summary => emit_summary(&result),
            };
            write_or_print(&out, "", &text)?;
            Ok(())
        }
        Command::Score {
            estimate,
            truth,
            q,
            marginals,
            out,
        } => {
            let est = io::read_labels(&estimate, q)?;
            let t = io::read_labels(&truth, q)?;
            let marg = match marginals {
                Some(path) => Some(io::read_marginals(&path)?),
                None => None,
            };
            let score = metrics::score(&est, &t, marg.as_ref(), q)?;
            write_or_print(&out, "", &io::score_report_text(&score))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

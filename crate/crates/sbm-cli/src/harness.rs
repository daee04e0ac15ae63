use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use sbm_core::bp;
use sbm_core::em::{self, EmConfig, EngineKind, InitStrategy};
use sbm_core::engine::{BeliefInit, EstepOptions};
use sbm_core::error::{Error, Result};
use sbm_core::generate::generate;
use sbm_core::metrics;
use sbm_core::mf::{self, MassMode};
use sbm_core::model::{BlockModel, StructureKind, StructurePreset};
use sbm_core::rng::mix_seed;
use sbm_core::spectral::{SpectralMethod, SpectralOptions};

/// Which benchmark family supplies the affinity for each sweep point.
#[derive(Debug, Clone)]
pub enum Preset {
    /// Equal-prior modular structure with q groups.
    FourGroups { q: usize },
    /// The q = 2 modular benchmark.
    TwoGroups,
    /// Two groups (2/3, 1/3) with the core–periphery affinity.
    CorePeriphery,
    /// A fixed model used at every point (the axis still drives the
    /// seed); mainly useful for replicate studies of one instance class.
    Custom(BlockModel),
}

impl Preset {
    pub fn q(&self) -> usize {
        match self {
            Preset::FourGroups { q } => *q,
            Preset::TwoGroups | Preset::CorePeriphery => 2,
            Preset::Custom(m) => m.q(),
        }
    }

    fn model(&self, n: usize, mean_degree: f64, epsilon: f64) -> Result<BlockModel> {
        match self {
            Preset::FourGroups { q } => {
                StructurePreset::modular(*q, mean_degree, epsilon).expand(n)
            }
            Preset::TwoGroups => StructurePreset::modular(2, mean_degree, epsilon).expand(n),
            Preset::CorePeriphery => {
                StructurePreset {
                    kind: StructureKind::CorePeriphery,
                    q: 2,
                    mean_degree,
                    epsilon,
                }
                .expand(n)
            }
            Preset::Custom(m) => Ok(m.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Epsilon,
    MeanDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineSel {
    Bp,
    Mf,
    SpectralModularity,
    SpectralDiffusion,
    EmBp,
    EmMf,
}

impl EngineSel {
    pub fn name(&self) -> &'static str {
        match self {
            EngineSel::Bp => "bp",
            EngineSel::Mf => "mf",
            EngineSel::SpectralModularity => "spectral_modularity",
            EngineSel::SpectralDiffusion => "spectral_diffusion",
            EngineSel::EmBp => "em_bp",
            EngineSel::EmMf => "em_mf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bp" => Ok(EngineSel::Bp),
            "mf" => Ok(EngineSel::Mf),
            "spectral-modularity" | "spectral_modularity" => Ok(EngineSel::SpectralModularity),
            "spectral-diffusion" | "spectral_diffusion" => Ok(EngineSel::SpectralDiffusion),
            "em-bp" | "em_bp" => Ok(EngineSel::EmBp),
            "em-mf" | "em_mf" => Ok(EngineSel::EmMf),
            other => Err(Error::InvalidInput(format!("unknown engine `{other}`"))),
        }
    }

    fn tag(&self) -> u64 {
        match self {
            EngineSel::Bp => 1,
            EngineSel::Mf => 2,
            EngineSel::SpectralModularity => 3,
            EngineSel::SpectralDiffusion => 4,
            EngineSel::EmBp => 5,
            EngineSel::EmMf => 6,
        }
    }
}

/// EM settings used by the em_bp / em_mf sweep engines.
#[derive(Debug, Clone)]
pub struct EmSweepOptions {
    pub n_restarts: usize,
    pub max_rounds: usize,
    pub param_tol: f64,
    pub learn_priors: bool,
    pub spectral_init: Option<SpectralMethod>,
}

impl Default for EmSweepOptions {
    fn default() -> Self {
        EmSweepOptions {
            n_restarts: 4,
            max_rounds: 50,
            param_tol: 1e-4,
            learn_priors: true,
            spectral_init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub n: usize,
    pub axis: SweepAxis,
    /// Inclusive sweep range walked in `step` increments.
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Held fixed while the other quantity sweeps.
    pub fixed_epsilon: f64,
    pub fixed_mean_degree: f64,
    pub engines: Vec<EngineSel>,
    pub replicates: usize,
    pub base_seed: u64,
    pub estep: EstepOptions,
    pub spectral: SpectralOptions,
    pub em: EmSweepOptions,
    /// Worker threads; 0 keeps the global default (or the environment
    /// override).
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn axis_values(&self) -> Vec<f64> {
        let mut values = Vec::new();
        if self.step <= 0.0 {
            return values;
        }
        let mut k = 0usize;
        loop {
            let v = self.start + self.step * k as f64;
            if v > self.stop + 1e-12 {
                break;
            }
            values.push(v);
            k += 1;
        }
        values
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis_values().is_empty() {
            return Err(Error::InvalidInput("sweep range is empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("need at least one replicate".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::InvalidInput("no engines requested".into()));
        }
        self.estep.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub engine: EngineSel,
    pub replicate: usize,
    pub seed: u64,
    pub overlap: f64,
    pub confidence: f64,
    pub free_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_seconds: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn engine_row(
    spec: &ExperimentSpec,
    engine: EngineSel,
    graph: &sbm_core::Graph,
    truth: &sbm_core::LabelAssignment,
    model: &BlockModel,
    q: usize,
    seed: u64,
) -> (f64, f64, f64, usize, bool, f64, String) {
    let engine_seed = mix_seed(seed, engine.tag());
    let start = Instant::now();
    let outcome: Result<(f64, f64, f64, usize, bool)> = (|| match engine {
        EngineSel::Bp => {
            let (marg, _, rep) =
                bp::run_estep(graph, model, &spec.estep, BeliefInit::Random, engine_seed)?;
            let est = metrics::marginalize(&marg, mix_seed(engine_seed, 9));
            let score = metrics::score(&est, truth, Some(&marg), q)?;
            Ok((
                score.overlap,
                score.confidence,
                rep.free_energy,
                rep.iterations,
                rep.converged,
            ))
        }
        EngineSel::Mf => {
            let (marg, rep) = mf::run_estep(
                graph,
                model,
                &spec.estep,
                BeliefInit::Random,
                MassMode::BeliefMass,
                engine_seed,
            )?;
            let est = metrics::marginalize(&marg, mix_seed(engine_seed, 9));
            let score = metrics::score(&est, truth, Some(&marg), q)?;
            Ok((
                score.overlap,
                score.confidence,
                rep.free_energy,
                rep.iterations,
                rep.converged,
            ))
        }
        EngineSel::SpectralModularity | EngineSel::SpectralDiffusion => {
            let method = if engine == EngineSel::SpectralModularity {
                SpectralMethod::Modularity
            } else {
                SpectralMethod::Diffusion
            };
            let labels =
                sbm_core::spectral::spectral_cluster(graph, q, method, &spec.spectral, engine_seed)?;
            let score = metrics::score(&labels, truth, None, q)?;
            Ok((score.overlap, f64::NAN, f64::NAN, 0, true))
        }
        EngineSel::EmBp | EngineSel::EmMf => {
            let config = EmConfig {
                engine: if engine == EngineSel::EmBp {
                    EngineKind::Bp
                } else {
                    EngineKind::Mf
                },
                estep: spec.estep,
                max_rounds: spec.em.max_rounds,
                param_tol: spec.em.param_tol,
                n_restarts: spec.em.n_restarts,
                init: match spec.em.spectral_init {
                    Some(method) => InitStrategy::Spectral(method),
                    None => InitStrategy::RandomAffinity,
                },
                learn_priors: spec.em.learn_priors,
                spectral: spec.spectral,
                ..EmConfig::default()
            };
            let result = em::run_em(graph, q, &config, engine_seed)?;
            let est = metrics::marginalize(&result.marginals, mix_seed(engine_seed, 9));
            let score = metrics::score(&est, truth, Some(&result.marginals), q)?;
            let chosen = &result.restarts[result.selected_restart];
            Ok((
                score.overlap,
                score.confidence,
                chosen.free_energy,
                chosen.rounds,
                chosen.converged,
            ))
        }
    })();
    let wall = start.elapsed().as_secs_f64();
    match outcome {
        Ok((q_over, c, fe, iters, conv)) => (q_over, c, fe, iters, conv, wall, String::new()),
        Err(e) => (
            f64::NAN,
            f64::NAN,
            f64::NAN,
            0,
            false,
            wall,
            e.to_string().replace(['\t', '\n'], " "),
        ),
    }
}

/// Run every (point, replicate, engine) job. Jobs are independent and
/// run on a bounded worker pool; rows come back ordered by axis value,
/// then engine (in requested order), then replicate.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec.axis_values();
    let q = spec.preset.q();

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.replicates).map(move |r| (p, r)))
        .collect();

    let run_jobs = || -> Vec<Vec<SweepRow>> {
        jobs.par_iter()
            .map(|&(point_idx, replicate)| {
                let axis_value = points[point_idx];
                let (c, eps) = match spec.axis {
                    SweepAxis::Epsilon => (spec.fixed_mean_degree, axis_value),
                    SweepAxis::MeanDegree => (axis_value, spec.fixed_epsilon),
                };
                let seed = mix_seed(mix_seed(spec.base_seed, point_idx as u64), replicate as u64);
                let model = match spec.preset.model(spec.n, c, eps) {
                    Ok(m) => m,
                    Err(e) => {
                        return spec
                            .engines
                            .iter()
                            .map(|&engine| SweepRow {
                                axis_value,
                                engine,
                                replicate,
                                seed,
                                overlap: f64::NAN,
                                confidence: f64::NAN,
                                free_energy: f64::NAN,
                                iterations: 0,
                                converged: false,
                                wall_seconds: 0.0,
                                note: e.to_string(),
                            })
                            .collect();
                    }
                };
                let (graph, truth) = match generate(&model, spec.n, seed) {
                    Ok(pair) => pair,
                    Err(e) => {
                        return spec
                            .engines
                            .iter()
                            .map(|&engine| SweepRow {
                                axis_value,
                                engine,
                                replicate,
                                seed,
                                overlap: f64::NAN,
                                confidence: f64::NAN,
                                free_energy: f64::NAN,
                                iterations: 0,
                                converged: false,
                                wall_seconds: 0.0,
                                note: e.to_string(),
                            })
                            .collect();
                    }
                };
                spec.engines
                    .iter()
                    .map(|&engine| {
                        let (overlap, confidence, free_energy, iterations, converged, wall, note) =
                            engine_row(spec, engine, &graph, &truth, &model, q, seed);
                        SweepRow {
                            axis_value,
                            engine,
                            replicate,
                            seed,
                            overlap,
                            confidence,
                            free_energy,
                            iterations,
                            converged,
                            wall_seconds: wall,
                            note,
                        }
                    })
                    .collect()
            })
            .collect()
    };

    let workers = effective_workers(spec.workers);
    let nested: Vec<Vec<SweepRow>> = if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?
            .install(run_jobs)
    } else {
        run_jobs()
    };

    let engine_order: Vec<EngineSel> = spec.engines.clone();
    let mut rows: Vec<SweepRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.axis_value
            .partial_cmp(&b.axis_value)
            .unwrap()
            .then_with(|| {
                let ia = engine_order.iter().position(|e| *e == a.engine).unwrap();
                let ib = engine_order.iter().position(|e| *e == b.engine).unwrap();
                ia.cmp(&ib)
            })
            .then(a.replicate.cmp(&b.replicate))
    });
    Ok(SweepResult { rows })
}

/// Worker count resolution: explicit spec value wins, then the
/// SBM_WORKERS environment override, then the rayon default (0 = leave
/// the global pool alone).
fn effective_workers(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var("SBM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0)
}

/// Floats rendered with six significant digits.
fn sig6(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == 0.0 {
        "0.00000e0".to_string()
    } else {
        format!("{v:.5e}")
    }
}

pub fn emit_tsv(result: &SweepResult) -> String {
    let mut out = String::from(
        "axis\tengine\treplicate\tseed\toverlap\tconfidence\tfree_energy\titerations\tconverged\twall_seconds\tnote\n",
    );
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            sig6(row.axis_value),
            row.engine.name(),
            row.replicate,
            row.seed,
            sig6(row.overlap),
            sig6(row.confidence),
            sig6(row.free_energy),
            row.iterations,
            row.converged,
            sig6(row.wall_seconds),
            row.note
        );
    }
    out
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    if finite.len() < 2 {
        return (mean, 0.0);
    }
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-(point, engine) means with standard errors.
pub fn emit_summary(result: &SweepResult) -> String {
    let mut out = String::from(
        "axis\tengine\tn\toverlap\toverlap_se\tconfidence\tconfidence_se\tfree_energy\titerations\twall_seconds\n",
    );
    let mut groups: Vec<(f64, EngineSel)> = Vec::new();
    for row in &result.rows {
        let key = (row.axis_value, row.engine);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (axis, engine) in groups {
        let rows: Vec<&SweepRow> = result
            .rows
            .iter()
            .filter(|r| r.axis_value == axis && r.engine == engine)
            .collect();
        let (q_mean, q_se) = mean_se(&rows.iter().map(|r| r.overlap).collect::<Vec<_>>());
        let (c_mean, c_se) = mean_se(&rows.iter().map(|r| r.confidence).collect::<Vec<_>>());
        let (f_mean, _) = mean_se(&rows.iter().map(|r| r.free_energy).collect::<Vec<_>>());
        let (i_mean, _) = mean_se(&rows.iter().map(|r| r.iterations as f64).collect::<Vec<_>>());
        let (w_mean, _) = mean_se(&rows.iter().map(|r| r.wall_seconds).collect::<Vec<_>>());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            sig6(axis),
            engine.name(),
            rows.len(),
            sig6(q_mean),
            sig6(q_se),
            sig6(c_mean),
            sig6(c_se),
            sig6(f_mean),
            sig6(i_mean),
            sig6(w_mean)
        );
    }
    out
}

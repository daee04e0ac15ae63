//! Expectation maximization over the block model parameters with a
//! pluggable E-step engine and restart management.

use rand::Rng;
use rayon::prelude::*;

use crate::bp::{self, BpEngine, MessageSet};
use crate::engine::{BeliefInit, EstepOptions, Marginals};
use crate::error::{Error, Result};
use crate::generate::estimate_complete;
use crate::graph::Graph;
use crate::mf::{self, MassMode, MfEngine};
use crate::model::BlockModel;
use crate::rng::{mix_seed, rng_from_seed};
use crate::spectral::{spectral_cluster, SpectralMethod, SpectralOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Bp,
    Mf,
}

#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Diagonal entries uniform in [c̄, 3c̄], off-diagonal in [0, c̄],
    /// rescaled to the observed mean degree; uniform priors.
    RandomAffinity,
    /// Cluster spectrally, then estimate parameters from the hard labels.
    Spectral(SpectralMethod),
    /// Start from an explicit model.
    Given(BlockModel),
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub engine: EngineKind,
    pub estep: EstepOptions,
    /// Cap on EM rounds per restart.
    pub max_rounds: usize,
    /// Convergence threshold on max |Δc_rs| between rounds.
    pub param_tol: f64,
    pub n_restarts: usize,
    pub init: InitStrategy,
    /// Update priors in the M-step; when false they stay at their
    /// initial values (known-proportions mode).
    pub learn_priors: bool,
    /// Re-draw messages/beliefs at every round instead of warm-starting.
    pub reinit_each_round: bool,
    /// How the E-step beliefs are initialized at the start of a chain.
    pub belief_init_uniform: bool,
    pub spectral: SpectralOptions,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            engine: EngineKind::Bp,
            estep: EstepOptions::default(),
            max_rounds: 50,
            param_tol: 1e-4,
            n_restarts: 1,
            init: InitStrategy::RandomAffinity,
            learn_priors: true,
            reinit_each_round: false,
            belief_init_uniform: false,
            spectral: SpectralOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestartSummary {
    pub index: usize,
    pub converged: bool,
    pub rounds: usize,
    pub free_energy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EmResult {
    pub model: BlockModel,
    pub marginals: Marginals,
    pub free_energy_trace: Vec<f64>,
    pub selected_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

/// BP M-step: p_r from the marginals, c_rs from the edge-resolved update
/// c_rs ← c_rs/(N p_r p_s) Σ_E (ψ_r^{i→j} ψ_s^{j→i} + ψ_s^{i→j} ψ_r^{j→i}) / Z^{ij}.
pub fn m_step_bp(
    messages: &MessageSet,
    marginals: &Marginals,
    graph: &Graph,
    model: &BlockModel,
) -> Result<BlockModel> {
    let q = model.q();
    let n = graph.n_nodes();
    if marginals.n() != n || messages.n_messages() != graph.n_directed() {
        return Err(Error::InvalidInput("state does not match graph".into()));
    }
    let mut priors = vec![0.0; q];
    for i in 0..n {
        for r in 0..q {
            priors[r] += marginals.row(i)[r];
        }
    }
    for p in &mut priors {
        *p /= n as f64;
    }
    let mut acc = vec![0.0; q * q];
    for e in 0..graph.n_directed() {
        let i = graph.edge_source(e);
        let j = graph.edge_target(e);
        if i >= j {
            continue;
        }
        let erev = graph.reverse_edge(e);
        let mi = messages.message(e);
        let mj = messages.message(erev);
        let mut z = 0.0;
        for r in 0..q {
            for s in 0..q {
                z += model.c(r, s) * mi[r] * mj[s];
            }
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Numerical(format!(
                "vanishing edge normalizer Z on edge ({i}, {j})"
            )));
        }
        for r in 0..q {
            for s in 0..q {
                acc[r * q + s] += (mi[r] * mj[s] + mi[s] * mj[r]) / z;
            }
        }
    }
    let mut affinity = vec![0.0; q * q];
    for r in 0..q {
        for s in 0..q {
            let denom = n as f64 * priors[r] * priors[s];
            if denom <= 0.0 {
                return Err(Error::Estimation(format!(
                    "class {} or {} has vanished",
                    r + 1,
                    s + 1
                )));
            }
            affinity[r * q + s] = (model.c(r, s) / denom) * acc[r * q + s];
        }
    }
    clamp_affinity(&mut affinity, n);
    BlockModel::new(priors, affinity, n)
}

/// MF M-step: p_rs = Σ_{i<j} A_ij ψ^i_r ψ^j_s / Σ_{i<j} ψ^i_r ψ^j_s,
/// symmetrized over (r, s) and returned in scaled form.
pub fn m_step_mf(beliefs: &Marginals, graph: &Graph) -> Result<BlockModel> {
    let q = beliefs.q();
    let n = graph.n_nodes();
    if beliefs.n() != n {
        return Err(Error::InvalidInput("state does not match graph".into()));
    }
    let nf = n as f64;
    let mut priors = vec![0.0; q];
    let mut mass = vec![0.0; q];
    let mut self_products = vec![0.0; q * q];
    for i in 0..n {
        let row = beliefs.row(i);
        for r in 0..q {
            mass[r] += row[r];
            for s in 0..q {
                self_products[r * q + s] += row[r] * row[s];
            }
        }
    }
    for r in 0..q {
        priors[r] = mass[r] / nf;
    }
    // numerator over edges, symmetrized in (r, s)
    let mut num = vec![0.0; q * q];
    for e in 0..graph.n_directed() {
        let i = graph.edge_source(e);
        let j = graph.edge_target(e);
        if i >= j {
            continue;
        }
        let bi = beliefs.row(i);
        let bj = beliefs.row(j);
        for r in 0..q {
            for s in 0..q {
                num[r * q + s] += 0.5 * (bi[r] * bj[s] + bi[s] * bj[r]);
            }
        }
    }
    let mut affinity = vec![0.0; q * q];
    for r in 0..q {
        for s in 0..q {
            let den = 0.5 * (mass[r] * mass[s] - self_products[r * q + s]);
            if den <= 0.0 {
                return Err(Error::Estimation(format!(
                    "belief mass of class pair ({}, {}) has vanished",
                    r + 1,
                    s + 1
                )));
            }
            affinity[r * q + s] = nf * num[r * q + s] / den;
        }
    }
    clamp_affinity(&mut affinity, n);
    BlockModel::new(priors, affinity, n)
}

/// Numerical safety on extreme fixed points: entries may exceed N by
/// round-off when a class collapses onto a clique.
fn clamp_affinity(affinity: &mut [f64], n: usize) {
    for v in affinity.iter_mut() {
        if *v > n as f64 {
            *v = n as f64;
        }
    }
}

/// Cluster spectrally and estimate the parameters from the labels.
pub fn spectral_init(
    graph: &Graph,
    q: usize,
    method: SpectralMethod,
    opts: &SpectralOptions,
    seed: u64,
) -> Result<BlockModel> {
    let labels = spectral_cluster(graph, q, method, opts, seed)?;
    estimate_complete(graph, &labels, q)
}

/// Random starting affinity matched to the observed mean degree.
pub fn random_affinity_init(graph: &Graph, q: usize, seed: u64) -> Result<BlockModel> {
    let mut rng = rng_from_seed(seed);
    let cbar = graph.mean_degree().max(1e-6);
    let n = graph.n_nodes();
    let mut affinity = vec![0.0; q * q];
    for r in 0..q {
        affinity[r * q + r] = cbar * (1.0 + 2.0 * rng.random::<f64>());
        for s in (r + 1)..q {
            let v = cbar * rng.random::<f64>();
            affinity[r * q + s] = v;
            affinity[s * q + r] = v;
        }
    }
    // rescale so the implied mean degree under uniform priors matches
    let implied: f64 = affinity.iter().sum::<f64>() / (q * q) as f64;
    let factor = cbar / implied.max(1e-12);
    for v in &mut affinity {
        *v = (*v * factor).min(n as f64);
    }
    BlockModel::new(vec![1.0 / q as f64; q], affinity, n)
}

struct ChainOutcome {
    summary: RestartSummary,
    model: Option<BlockModel>,
    marginals: Option<Marginals>,
    trace: Vec<f64>,
}

fn run_chain(
    graph: &Graph,
    config: &EmConfig,
    init_model: BlockModel,
    seed: u64,
    index: usize,
) -> ChainOutcome {
    let mut model = init_model;
    let mut trace = Vec::new();
    let mut bp_messages: Option<MessageSet> = None;
    let mut mf_beliefs: Option<Marginals> = None;
    let mut converged = false;
    let mut rounds = 0;
    let mut marginals: Option<Marginals> = None;

    let fail = |e: Error, rounds: usize, trace: Vec<f64>| ChainOutcome {
        summary: RestartSummary {
            index,
            converged: false,
            rounds,
            free_energy: f64::NAN,
            error: Some(e.to_string()),
        },
        model: None,
        marginals: None,
        trace,
    };

    for round in 0..config.max_rounds {
        rounds = round + 1;
        let estep_seed = mix_seed(seed, 1000 + round as u64);
        let result: Result<(Marginals, f64)> = match config.engine {
            EngineKind::Bp => (|| {
                let messages = match (&bp_messages, config.reinit_each_round) {
                    (Some(m), false) => m.clone(),
                    _ => bp::init_messages(
                        graph,
                        &model,
                        if config.belief_init_uniform {
                            BeliefInit::Uniform
                        } else {
                            BeliefInit::Random
                        },
                        mix_seed(estep_seed, 1),
                    )?,
                };
                let mut engine =
                    BpEngine::new(graph, &model, messages, mix_seed(estep_seed, 2))?;
                let mut iters = 0;
                loop {
                    let delta = engine.sweep(config.estep.damping)?;
                    iters += 1;
                    if delta <= config.estep.tol || iters >= config.estep.max_iters {
                        break;
                    }
                }
                engine.rebuild_from_current_marginals()?;
                let fe = engine.bethe_free_energy()?;
                let marg = engine.marginals();
                let msgs = engine.messages();
                let next = m_step_bp(&msgs, &marg, graph, &model)?;
                bp_messages = Some(msgs);
                let next = apply_prior_policy(next, &model, config)?;
                let delta_c = max_affinity_change(&model, &next);
                model = next;
                converged = delta_c <= config.param_tol;
                Ok((marg, fe))
            })(),
            EngineKind::Mf => (|| {
                let beliefs = match (&mf_beliefs, config.reinit_each_round) {
                    (Some(b), false) => b.clone(),
                    _ => mf::init_beliefs(
                        graph,
                        &model,
                        if config.belief_init_uniform {
                            BeliefInit::Uniform
                        } else {
                            BeliefInit::Random
                        },
                        mix_seed(estep_seed, 1),
                    )?,
                };
                let mut engine = MfEngine::new(
                    graph,
                    &model,
                    beliefs,
                    MassMode::BeliefMass,
                    mix_seed(estep_seed, 2),
                )?;
                let mut iters = 0;
                loop {
                    let delta = engine.sweep(config.estep.damping)?;
                    iters += 1;
                    if delta <= config.estep.tol || iters >= config.estep.max_iters {
                        break;
                    }
                }
                engine.refresh_mass();
                let fe = engine.free_energy();
                let marg = engine.beliefs();
                let next = m_step_mf(&marg, graph)?;
                mf_beliefs = Some(marg.clone());
                let next = apply_prior_policy(next, &model, config)?;
                let delta_c = max_affinity_change(&model, &next);
                model = next;
                converged = delta_c <= config.param_tol;
                Ok((marg, fe))
            })(),
        };
        match result {
            Ok((marg, fe)) => {
                trace.push(fe);
                marginals = Some(marg);
                if converged {
                    break;
                }
            }
            Err(e) => return fail(e, rounds, trace),
        }
    }

    ChainOutcome {
        summary: RestartSummary {
            index,
            converged,
            rounds,
            free_energy: trace.last().copied().unwrap_or(f64::NAN),
            error: None,
        },
        model: Some(model),
        marginals,
        trace,
    }
}

fn apply_prior_policy(
    next: BlockModel,
    current: &BlockModel,
    config: &EmConfig,
) -> Result<BlockModel> {
    if config.learn_priors {
        Ok(next)
    } else {
        BlockModel::new(
            current.priors().to_vec(),
            next.affinity().to_vec(),
            next.n_scale(),
        )
    }
}

fn max_affinity_change(a: &BlockModel, b: &BlockModel) -> f64 {
    a.affinity()
        .iter()
        .zip(b.affinity())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Run `n_restarts` independent EM chains and keep the one with the
/// largest final free energy, preferring converged chains. Restarts run
/// concurrently; aggregation is ordered by restart index.
pub fn run_em(graph: &Graph, q: usize, config: &EmConfig, seed: u64) -> Result<EmResult> {
    if q == 0 {
        return Err(Error::InvalidInput("q must be at least 1".into()));
    }
    config.estep.validate()?;
    if config.max_rounds == 0 || config.n_restarts == 0 {
        return Err(Error::InvalidInput(
            "rounds and restarts must be positive".into(),
        ));
    }
    if config.param_tol <= 0.0 {
        return Err(Error::InvalidInput("parameter tolerance must be positive".into()));
    }
    // the spectral starting point does not depend on the restart index
    let spectral_model = match &config.init {
        InitStrategy::Spectral(method) => Some(spectral_init(
            graph,
            q,
            *method,
            &config.spectral,
            mix_seed(seed, 777),
        )?),
        _ => None,
    };

    let outcomes: Vec<ChainOutcome> = (0..config.n_restarts)
        .into_par_iter()
        .map(|idx| {
            let chain_seed = mix_seed(seed, idx as u64);
            let init_model = match &config.init {
                InitStrategy::RandomAffinity => {
                    match random_affinity_init(graph, q, mix_seed(chain_seed, 555)) {
                        Ok(m) => m,
                        Err(e) => {
                            return ChainOutcome {
                                summary: RestartSummary {
                                    index: idx,
                                    converged: false,
                                    rounds: 0,
                                    free_energy: f64::NAN,
                                    error: Some(e.to_string()),
                                },
                                model: None,
                                marginals: None,
                                trace: Vec::new(),
                            }
                        }
                    }
                }
                InitStrategy::Spectral(_) => spectral_model.clone().unwrap(),
                InitStrategy::Given(m) => m.clone(),
            };
            run_chain(graph, config, init_model, chain_seed, idx)
        })
        .collect();

    let eligible = |o: &&ChainOutcome| o.model.is_some() && o.summary.free_energy.is_finite();
    let converged_best = outcomes
        .iter()
        .filter(eligible)
        .filter(|o| o.summary.converged)
        .max_by(|a, b| {
            a.summary
                .free_energy
                .partial_cmp(&b.summary.free_energy)
                .unwrap()
                .then(b.summary.index.cmp(&a.summary.index))
        });
    let any_best = outcomes.iter().filter(eligible).max_by(|a, b| {
        a.summary
            .free_energy
            .partial_cmp(&b.summary.free_energy)
            .unwrap()
            .then(b.summary.index.cmp(&a.summary.index))
    });
    let best = converged_best.or(any_best).ok_or_else(|| {
        let notes: Vec<String> = outcomes
            .iter()
            .filter_map(|o| o.summary.error.clone())
            .collect();
        Error::Numerical(format!("all EM restarts failed: {}", notes.join("; ")))
    })?;

    Ok(EmResult {
        model: best.model.clone().unwrap(),
        marginals: best
            .marginals
            .clone()
            .unwrap_or_else(|| Marginals::uniform(graph.n_nodes(), q)),
        free_energy_trace: best.trace.clone(),
        selected_restart: best.summary.index,
        restarts: outcomes.into_iter().map(|o| o.summary).collect(),
    })
}

//! End-to-end steps shared by the command line and the tests: library
//! extraction, GFlowNet training, checkpoints and batch inference.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, ParamStore};
use crate::env::{EnvConfig, FlowEnv, RetroEnv, State};
use crate::eval::{infer, EvalError, InferConfig, RankedPredictions};
use crate::feasibility::ForwardModel;
use crate::molgraph::{reactant_set_key, MolGraph, ReactionRecord};
use crate::policy::{EncoderConfig, PolicyError, PolicyShape, RetroPolicy};
use crate::templates::{apply_template, build_library, extract_with_center, PatternLibrary};
use crate::train::{self, IterationMetrics, TrainConfig, TrainData, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Data(String),
}

/// Outcome of extracting templates from a corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub reactions: usize,
    pub extracted: usize,
    /// Reapplying the template at its own center gives back the reactants.
    pub round_trip_ok: usize,
    pub templates: usize,
    pub product_patterns: usize,
    pub reactant_patterns: usize,
    /// (corpus index, reason) for every reaction that failed either step.
    pub failures: Vec<(usize, String)>,
}

impl ExtractionReport {
    pub fn round_trip_rate(&self) -> f64 {
        if self.reactions == 0 {
            return 0.0;
        }
        self.round_trip_ok as f64 / self.reactions as f64
    }
}

pub fn extract_library(corpus: &[ReactionRecord], radius: usize) -> (PatternLibrary, ExtractionReport) {
    let mut report = ExtractionReport {
        reactions: corpus.len(),
        ..ExtractionReport::default()
    };
    let mut templates = Vec::new();
    for (i, r) in corpus.iter().enumerate() {
        match extract_with_center(r, radius) {
            Ok(ex) => {
                report.extracted += 1;
                match apply_template(&ex.template, &r.product, &ex.center) {
                    Ok(rs) if reactant_set_key(&rs) == r.reactant_key() => report.round_trip_ok += 1,
                    Ok(rs) => {
                        let msg = format!("template collision: reapplied to {}", reactant_set_key(&rs));
                        log::warn!("reaction {i}: {msg}");
                        report.failures.push((i, msg));
                    }
                    Err(e) => {
                        log::warn!("reaction {i}: reapplication failed: {e}");
                        report.failures.push((i, format!("reapplication failed: {e}")));
                    }
                }
                templates.push(ex.template);
            }
            Err(e) => {
                log::warn!("reaction {i}: extraction failed: {e}");
                report.failures.push((i, format!("extraction failed: {e}")));
            }
        }
    }
    let library = build_library(&templates);
    report.templates = library.templates.len();
    report.product_patterns = library.pps.len();
    report.reactant_patterns = library.rps.len();
    (library, report)
}

/// Everything `train-gfn` needs beyond the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GfnConfig {
    pub train: TrainConfig,
    pub encoder: EncoderConfig,
    pub radius: usize,
    pub match_cap: usize,
    /// Iterations between validation passes; 0 disables them.
    pub validate_every: usize,
    pub validate_products: usize,
    pub validate_n: usize,
}

impl Default for GfnConfig {
    fn default() -> Self {
        GfnConfig {
            train: TrainConfig::default(),
            encoder: EncoderConfig::default(),
            radius: 1,
            match_cap: 10_000,
            validate_every: 500,
            validate_products: 8,
            validate_n: 10,
        }
    }
}

impl GfnConfig {
    /// Reduced model and batch that fit the single-core smoke budget.
    pub fn smoke() -> GfnConfig {
        GfnConfig {
            train: TrainConfig {
                iterations: 2000,
                n_forward: 2,
                n_dataset: 8,
                n_replay: 2,
                lr: 1e-3,
                ..TrainConfig::default()
            },
            encoder: EncoderConfig {
                hidden_dim: 32,
                gnn1_layers: 2,
                gnn2_layers: 2,
                attention_heads: 4,
                rw_pe_steps: 8,
            },
            validate_every: 0,
            ..GfnConfig::default()
        }
    }
}

/// A policy with its parameters and environment.
pub struct GfnModel {
    pub env: RetroEnv,
    pub policy: RetroPolicy,
    pub store: ParamStore,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    shape: PolicyShape,
    library_templates: usize,
    params: serde_json::Value,
}

impl GfnModel {
    pub fn new(
        library: Arc<PatternLibrary>,
        encoder: EncoderConfig,
        flow_products: Vec<String>,
        env_config: EnvConfig,
        seed: u64,
    ) -> Result<GfnModel, PipelineError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let policy = RetroPolicy::new(encoder, library.clone(), flow_products, &mut store, &mut rng)?;
        Ok(GfnModel {
            env: RetroEnv::new(library, env_config),
            policy,
            store,
        })
    }

    pub fn to_json(&self) -> String {
        let params: serde_json::Value = serde_json::from_str(&self.store.to_json()).expect("store json");
        serde_json::to_string(&Checkpoint {
            version: 1,
            shape: self.policy.shape().clone(),
            library_templates: self.env.library().templates.len(),
            params,
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str, library: Arc<PatternLibrary>, env_config: EnvConfig) -> Result<GfnModel, PipelineError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
        if ck.version != 1 {
            return Err(PipelineError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        if ck.shape.n_pps != library.pps.len()
            || ck.shape.n_rps != library.rps.len()
            || ck.library_templates != library.templates.len()
        {
            return Err(PipelineError::Checkpoint("checkpoint was trained with a different library".into()));
        }
        let mut model = GfnModel::new(library, ck.shape.encoder, ck.shape.flow_products, env_config, 0)?;
        model.store.load_json(&ck.params.to_string())?;
        Ok(model)
    }
}

/// Summary of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub dataset_terminals: usize,
    pub unreachable_reactions: usize,
    pub final_buffer_size: usize,
    pub last_loss: Option<f64>,
}

/// Line of the training metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    #[serde(flatten)]
    pub metrics: IterationMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_top_k: Option<f64>,
}

/// Trains on `corpus` with the feasibility proxy of `forward`; corpus
/// reactions have f = 1.
pub fn train_gfn(
    cfg: &GfnConfig,
    library: Arc<PatternLibrary>,
    corpus: &[ReactionRecord],
    forward: &ForwardModel,
    mut log: impl FnMut(&LogLine),
) -> Result<(GfnModel, TrainSummary), PipelineError> {
    let env_config = EnvConfig {
        max_reactants: cfg.train.max_reactants,
        match_cap: cfg.match_cap,
    };
    let products: Vec<String> = corpus
        .iter()
        .map(|r| r.product_key())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut model = GfnModel::new(library, cfg.encoder.clone(), products, env_config, cfg.train.seed)?;
    let positives: HashSet<(String, String)> = corpus.iter().map(|r| (r.product_key(), r.reactant_key())).collect();

    let mut starts = Vec::new();
    let mut seen = HashSet::new();
    for r in corpus {
        if seen.insert(r.product_key()) {
            let info = model.env.product(r.product.without_map_numbers());
            starts.push(model.env.initial_state(info));
        }
    }
    let mut dataset = Vec::new();
    let mut unreachable = 0;
    for (i, r) in corpus.iter().enumerate() {
        match model.env.reaction_terminal(r, cfg.radius) {
            Ok(t) => dataset.push(t),
            Err(e) => {
                unreachable += 1;
                log::warn!("reaction {i} has no trajectory: {e}");
            }
        }
    }
    if dataset.is_empty() {
        return Err(PipelineError::Data("no corpus reaction is reachable with this library".into()));
    }
    let feasibility = |s: &State| -> f64 {
        let Some(rk) = s.reactant_key() else { return 0.0 };
        let pk = &s.product.key;
        if positives.contains(&(pk.clone(), rk.to_string())) {
            1.0
        } else {
            forward.backtranslate_indicator(rk, pk)
        }
    };

    // Validation slice: the first few training reactions by product.
    let val: Vec<&ReactionRecord> = {
        let mut seen = HashSet::new();
        corpus
            .iter()
            .filter(|r| seen.insert(r.product_key()))
            .take(cfg.validate_products)
            .collect()
    };
    let mut summary = TrainSummary {
        dataset_terminals: dataset.len(),
        unreachable_reactions: unreachable,
        ..TrainSummary::default()
    };
    let data = TrainData { starts, dataset };
    let mut pending: Vec<IterationMetrics> = Vec::new();
    let GfnModel { env, policy, store } = &mut model;
    let buffer = train::train(env, policy, store, &cfg.train, &data, feasibility, |m, store| {
        pending.push(m.clone());
        let validation_top_k = if cfg.validate_every > 0 && (m.iteration + 1) % cfg.validate_every == 0 {
            Some(validation_hit_rate(env, policy, store, &val, cfg.validate_n, cfg.train.seed))
        } else {
            None
        };
        log(&LogLine {
            metrics: m.clone(),
            validation_top_k,
        });
    })?;
    summary.final_buffer_size = buffer.len();
    summary.last_loss = pending.last().map(|m| m.loss);
    Ok((model, summary))
}

fn validation_hit_rate(env: &RetroEnv, policy: &RetroPolicy, store: &ParamStore, val: &[&ReactionRecord], n: usize, seed: u64) -> f64 {
    if val.is_empty() {
        return 0.0;
    }
    let cfg = InferConfig {
        n: n.clamp(1, 100),
        ..InferConfig::default()
    };
    let mut hits = 0;
    for (i, r) in val.iter().enumerate() {
        let mut rng = product_rng(seed, i);
        let info = env.product(r.product.without_map_numbers());
        if let Ok(p) = infer(env, policy, store, info, &cfg, &mut rng) {
            if p.rank_of(&r.reactant_key()).is_some() {
                hits += 1;
            }
        }
    }
    hits as f64 / val.len() as f64
}

/// Independent generator per product so results do not depend on the
/// number of workers.
pub fn product_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Ranked predictions for every product, spread over `jobs` workers.
pub fn infer_products(
    model: &GfnModel,
    products: &[MolGraph],
    cfg: &InferConfig,
    seed: u64,
    jobs: usize,
) -> Result<Vec<RankedPredictions>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    let out: Result<Vec<RankedPredictions>, EvalError> = pool.install(|| {
        products
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let mut rng = product_rng(seed, i);
                let info = model.env.product(g.without_map_numbers());
                infer(&model.env, &model.policy, &model.store, info, cfg, &mut rng)
            })
            .collect()
    });
    Ok(out?)
}

/// Distinct products of `corpus`, in first-appearance order.
pub fn distinct_products(corpus: &[ReactionRecord]) -> Vec<MolGraph> {
    let mut seen = HashSet::new();
    corpus
        .iter()
        .filter(|r| seen.insert(r.product_key()))
        .map(|r| r.product.without_map_numbers())
        .collect()
}

/// Product key to recorded reactant keys.
pub fn ground_truth(corpus: &[ReactionRecord]) -> crate::eval::GroundTruth {
    let mut truth = crate::eval::GroundTruth::new();
    for r in corpus {
        truth.entry(r.product_key()).or_default().insert(r.reactant_key());
    }
    truth
}

/// Whether the terminal states of `env` reachable from `s` are finite and
/// small; used to guard exhaustive checks.
pub fn count_terminals<E: FlowEnv>(env: &E, s0: &E::State, limit: usize) -> Option<usize> {
    let mut stack = vec![s0.clone()];
    let mut seen = HashSet::new();
    let mut terminals = 0;
    while let Some(s) = stack.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        if env.is_terminal(&s) {
            terminals += 1;
            if terminals > limit {
                return None;
            }
            continue;
        }
        for a in env.actions(&s) {
            stack.push(env.step(&s, &a).ok()?);
        }
        if seen.len() > limit * 100 {
            return None;
        }
    }
    Some(terminals)
}

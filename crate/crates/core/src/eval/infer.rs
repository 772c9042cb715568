use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::autodiff::{ParamStore, Tape};
use crate::env::{FlowEnv, ProductInfo, RetroEnv};
use crate::policy::{FlowPolicy, RetroPolicy};
use crate::train::sample_categorical;

/// Summed probability of every distinct sampled trajectory, per terminal.
///
/// Trajectories are deduplicated by action sequence, so the total never
/// exceeds one. Per-state action probabilities are computed once on a shared
/// tape. Rollouts that reach a dead end are dropped.
pub fn estimate_terminal_probs<E: FlowEnv, P: FlowPolicy<E>>(
    env: &E,
    policy: &P,
    store: &ParamStore,
    s0: &E::State,
    samples: usize,
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(E::State, f64)>, EvalError> {
    let mut tape = Tape::new(store);
    let mut cache = P::Cache::default();
    let mut memo: HashMap<E::State, (Vec<E::Action>, Vec<f64>)> = HashMap::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut order: Vec<E::State> = Vec::new();
    let mut mass: HashMap<E::State, f64> = HashMap::new();
    'sample: for _ in 0..samples {
        let mut s = s0.clone();
        let mut path = Vec::new();
        let mut log_p = 0.0;
        while !env.is_terminal(&s) {
            if !memo.contains_key(&s) {
                let actions = env.actions(&s);
                let logp = if actions.is_empty() {
                    Vec::new()
                } else {
                    let lp = policy.log_probs(&mut tape, &mut cache, &s, &actions, alpha)?;
                    tape.value(lp).as_slice().to_vec()
                };
                memo.insert(s.clone(), (actions, logp));
            }
            let (actions, logp) = &memo[&s];
            if actions.is_empty() {
                continue 'sample;
            }
            let i = sample_categorical(logp, rng);
            log_p += logp[i];
            path.push(i);
            s = env.step(&s, &actions[i])?;
        }
        if seen.insert(path) {
            let e = mass.entry(s.clone()).or_insert_with(|| {
                order.push(s.clone());
                0.0
            });
            *e += log_p.exp();
        }
    }
    Ok(order
        .into_iter()
        .map(|s| {
            let p = mass[&s];
            (s, p)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    /// Requested reactions per product.
    pub n: usize,
    /// Trajectories per requested reaction.
    pub k: usize,
    pub alpha: f64,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            n: 100,
            k: 20,
            alpha: 0.7,
        }
    }
}

/// Longest list kept per product.
pub const MAX_PREDICTIONS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Canonical reactant-set key.
    pub reactants: String,
    pub p_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPredictions {
    /// Canonical product key.
    pub product: String,
    pub predictions: Vec<Prediction>,
}

impl RankedPredictions {
    /// Merges duplicate reactant sets, sorts by probability (key on ties)
    /// and truncates.
    pub fn from_masses(product: String, masses: impl IntoIterator<Item = (String, f64)>, limit: usize) -> Self {
        let mut merged: HashMap<String, f64> = HashMap::new();
        for (k, p) in masses {
            *merged.entry(k).or_default() += p;
        }
        let mut predictions: Vec<Prediction> = merged
            .into_iter()
            .map(|(reactants, p_estimate)| Prediction { reactants, p_estimate })
            .collect();
        predictions.sort_by(|a, b| b.p_estimate.total_cmp(&a.p_estimate).then_with(|| a.reactants.cmp(&b.reactants)));
        predictions.truncate(limit);
        RankedPredictions { product, predictions }
    }

    pub fn rank_of(&self, reactants: &str) -> Option<usize> {
        self.predictions.iter().position(|p| p.reactants == reactants).map(|i| i + 1)
    }
}

/// Ranked single-step predictions for one product.
pub fn infer(
    env: &RetroEnv,
    policy: &RetroPolicy,
    store: &ParamStore,
    product: Arc<ProductInfo>,
    cfg: &InferConfig,
    rng: &mut impl Rng,
) -> Result<RankedPredictions, EvalError> {
    if cfg.n == 0 || cfg.n > 100 || cfg.k == 0 {
        return Err(EvalError::Config(format!("need 1 <= n <= 100 and k >= 1, got n={} k={}", cfg.n, cfg.k)));
    }
    let key = product.key.clone();
    let s0 = env.initial_state(product);
    let terminals = estimate_terminal_probs(env, policy, store, &s0, cfg.k * cfg.n, cfg.alpha, rng)?;
    let masses = terminals
        .into_iter()
        .filter_map(|(t, p)| t.reactant_key().map(|k| (k.to_string(), p)));
    Ok(RankedPredictions::from_masses(key, masses, cfg.n.min(MAX_PREDICTIONS)))
}

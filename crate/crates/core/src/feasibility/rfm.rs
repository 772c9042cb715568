use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_reactant_key, FeasibilityError};
use crate::autodiff::{sigmoid, Adam, ParamId, ParamStore, Tape, Var};
use crate::molgraph::{parse_smiles, MolGraph, NODE_FEATURES, RW_STEPS};
use crate::policy::{Encoder, GraphInput, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfmConfig {
    pub hidden_dim: usize,
    pub mp_layers: usize,
    pub heads: usize,
    pub rw_steps: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Fraction of examples held out for AUC.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for RfmConfig {
    fn default() -> Self {
        RfmConfig {
            hidden_dim: 32,
            mp_layers: 2,
            heads: 4,
            rw_steps: 8,
            epochs: 20,
            lr: 2e-3,
            batch_size: 32,
            holdout: 0.2,
            seed: 0,
        }
    }
}

impl RfmConfig {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        let bad = |m: &str| Err(FeasibilityError::Config(m.into()));
        if self.hidden_dim == 0 || self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return bad("hidden_dim must be a positive multiple of heads");
        }
        if self.rw_steps > RW_STEPS {
            return bad("rw_steps exceeds the supported maximum");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return bad("holdout must lie in [0, 1)");
        }
        if self.lr <= 0.0 {
            return bad("lr must be positive");
        }
        Ok(())
    }
}

/// A reaction ready for the classifier.
#[derive(Clone, Debug)]
pub struct RfmInput {
    reactants: GraphInput,
    product: GraphInput,
}

impl RfmInput {
    pub fn new(reactants: &[MolGraph], product: &MolGraph, rw_steps: usize) -> RfmInput {
        RfmInput {
            reactants: GraphInput::molecule(&MolGraph::union(reactants), rw_steps),
            product: GraphInput::molecule(product, rw_steps),
        }
    }

    /// From canonical reactant-set and product keys.
    pub fn from_keys(reactants: &str, product: &str, rw_steps: usize) -> Result<RfmInput, FeasibilityError> {
        let r = parse_reactant_key(reactants);
        let p = parse_smiles(product).map_err(|e| FeasibilityError::Format(format!("{product}: {e}")))?;
        if r.is_empty() {
            return Err(FeasibilityError::Format(format!("no reactants in {reactants:?}")));
        }
        Ok(RfmInput::new(&r, &p, rw_steps))
    }
}

/// Reaction feasibility classifier: a shared graph encoder, one attention
/// pooling query per side and an MLP over both pooled vectors.
pub struct Rfm {
    pub config: RfmConfig,
    pub store: ParamStore,
    encoder: Encoder,
    query_r: ParamId,
    query_p: ParamId,
    head: Mlp,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: RfmConfig,
    params: serde_json::Value,
}

impl Rfm {
    pub fn new(config: RfmConfig) -> Result<Rfm, FeasibilityError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.hidden_dim;
        let in_width = NODE_FEATURES - RW_STEPS + config.rw_steps;
        let encoder = Encoder::new(&mut store, "rfm.enc", in_width, d, config.mp_layers, config.heads, &mut rng);
        let query_r = store.add_uniform("rfm.query_r", d, 1, d, &mut rng);
        let query_p = store.add_uniform("rfm.query_p", d, 1, d, &mut rng);
        let head = Mlp::new(&mut store, "rfm.head", &[2 * d, d, 1], &mut rng);
        Ok(Rfm {
            config,
            store,
            encoder,
            query_r,
            query_p,
            head,
        })
    }

    pub fn input(&self, reactants: &[MolGraph], product: &MolGraph) -> RfmInput {
        RfmInput::new(reactants, product, self.config.rw_steps)
    }

    fn pool(&self, tape: &mut Tape, g: &GraphInput, query: ParamId) -> Result<Var, FeasibilityError> {
        let h = self.encoder.encode(tape, g)?;
        let q = tape.param(query);
        let s = tape.matmul(h, q)?;
        let st = tape.transpose(s);
        let w = tape.softmax_with_temperature(st, 1.0 / (self.config.hidden_dim as f64).sqrt());
        Ok(tape.matmul(w, h)?)
    }

    /// 1x1 pre-sigmoid logit.
    pub fn logit(&self, tape: &mut Tape, x: &RfmInput) -> Result<Var, FeasibilityError> {
        let r = self.pool(tape, &x.reactants, self.query_r)?;
        let p = self.pool(tape, &x.product, self.query_p)?;
        let joined = tape.concat_cols(&[r, p])?;
        Ok(self.head.forward(tape, joined)?)
    }

    /// Feasibility probability in [0, 1].
    pub fn score(&self, x: &RfmInput) -> Result<f64, FeasibilityError> {
        let mut tape = Tape::new(&self.store);
        let z = self.logit(&mut tape, x)?;
        Ok(sigmoid(tape.value(z).item()))
    }

    /// Binary cross-entropy with logits, averaged over `batch`.
    pub fn batch_loss(&self, tape: &mut Tape, batch: &[(&RfmInput, bool)]) -> Result<Var, FeasibilityError> {
        let mut total: Option<Var> = None;
        for (x, label) in batch {
            let z = self.logit(tape, x)?;
            let signed = if *label { tape.neg(z) } else { z };
            let l = tape.softplus(signed);
            total = Some(match total {
                Some(t) => tape.add(t, l)?,
                None => l,
            });
        }
        let total = total.ok_or_else(|| FeasibilityError::Insufficient("empty batch".into()))?;
        Ok(tape.scale(total, 1.0 / batch.len() as f64))
    }

    pub fn to_json(&self) -> String {
        let params: serde_json::Value = serde_json::from_str(&self.store.to_json()).expect("store json");
        serde_json::to_string(&Checkpoint {
            version: 1,
            config: self.config.clone(),
            params,
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Rfm, FeasibilityError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| FeasibilityError::Format(e.to_string()))?;
        if ck.version != 1 {
            return Err(FeasibilityError::Format(format!("unsupported checkpoint version {}", ck.version)));
        }
        let mut rfm = Rfm::new(ck.config)?;
        rfm.store.load_json(&ck.params.to_string())?;
        Ok(rfm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfmReport {
    pub epoch_losses: Vec<f64>,
    pub holdout_auc: Option<f64>,
    pub train_examples: usize,
    pub holdout_examples: usize,
}

/// Area under the ROC curve; ties count one half.
pub fn auc(positive_scores: &[f64], negative_scores: &[f64]) -> Option<f64> {
    if positive_scores.is_empty() || negative_scores.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in positive_scores {
        for n in negative_scores {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (positive_scores.len() * negative_scores.len()) as f64)
}

/// Trains with Adam on a shuffled split and reports held-out AUC.
pub fn train_rfm(
    positives: Vec<RfmInput>,
    negatives: Vec<RfmInput>,
    config: RfmConfig,
) -> Result<(Rfm, RfmReport), FeasibilityError> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(FeasibilityError::Insufficient("need both positive and negative examples".into()));
    }
    let mut rfm = Rfm::new(config)?;
    let cfg = rfm.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut examples: Vec<(RfmInput, bool)> = positives
        .into_iter()
        .map(|x| (x, true))
        .chain(negatives.into_iter().map(|x| (x, false)))
        .collect();
    examples.shuffle(&mut rng);
    let n_hold = ((examples.len() as f64) * cfg.holdout).round() as usize;
    let held = examples.split_off(examples.len() - n_hold);
    let adam = Adam {
        lr: cfg.lr,
        ..Adam::default()
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&RfmInput, bool)> = chunk.iter().map(|&i| (&examples[i].0, examples[i].1)).collect();
            let grads = {
                let mut tape = Tape::new(&rfm.store);
                let loss = rfm.batch_loss(&mut tape, &batch)?;
                sum += tape.value(loss).item() * batch.len() as f64;
                tape.backward(loss)?.into_params()
            };
            rfm.store.adam_step(&grads, &adam)?;
        }
        let mean = sum / examples.len().max(1) as f64;
        log::info!("rfm epoch {epoch}: loss {mean:.4}");
        epoch_losses.push(mean);
    }
    let mut pos_scores = Vec::new();
    let mut neg_scores = Vec::new();
    for (x, label) in &held {
        let s = rfm.score(x)?;
        if *label {
            pos_scores.push(s);
        } else {
            neg_scores.push(s);
        }
    }
    let report = RfmReport {
        epoch_losses,
        holdout_auc: auc(&pos_scores, &neg_scores),
        train_examples: examples.len(),
        holdout_examples: held.len(),
    };
    Ok((rfm, report))
}

//! Forward policies: the learnable template-composition policy with its
//! graph encoders and score heads, and a tabular policy for small
//! enumerable environments.

mod nn;
mod tabular;

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::env::{Action, FlowEnv, RetroEnv, Stage, State};
use crate::molgraph::{MolGraph, NODE_FEATURES, RW_STEPS};
use crate::templates::{PatternGraph, PatternLibrary, Triple};

pub use nn::{Encoder, GraphInput, Linear, Mlp, TransformerLayer, PATTERN_EXTRA};
pub use tabular::TabularPolicy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("no legal actions (dead-end state)")]
    NoActions,
    #[error("action does not belong to this state: {0}")]
    BadAction(String),
    #[error("no log-flow entry for product {0}")]
    MissingLogFlow(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// A forward policy over an environment's legal actions.
pub trait FlowPolicy<E: FlowEnv> {
    /// Per-tape memo of shared sub-computations (for example an encoding).
    type Cache: Default;

    /// 1 x A log-probabilities of `actions` (the legal list of `s`) under
    /// a softmax of `alpha * score`.
    fn log_probs(
        &self,
        tape: &mut Tape,
        cache: &mut Self::Cache,
        s: &E::State,
        actions: &[E::Action],
        alpha: f64,
    ) -> Result<Var, PolicyError>;

    /// 1x1 learned log-flow of an initial state.
    fn log_flow(&self, tape: &mut Tape, s0: &E::State) -> Result<Var, PolicyError>;

    /// Parameters that hold log-flows; they get their own learning rate.
    fn log_flow_params(&self) -> Vec<ParamId> {
        Vec::new()
    }
}

/// Probabilities of a state's actions as plain numbers.
pub fn action_probs<E: FlowEnv, P: FlowPolicy<E>>(
    policy: &P,
    store: &ParamStore,
    s: &E::State,
    actions: &[E::Action],
    alpha: f64,
) -> Result<Vec<f64>, PolicyError> {
    let mut tape = Tape::new(store);
    let mut cache = P::Cache::default();
    let lp = policy.log_probs(&mut tape, &mut cache, s, actions, alpha)?;
    Ok(tape.value(lp).as_slice().iter().map(|x| x.exp()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub hidden_dim: usize,
    pub gnn1_layers: usize,
    pub gnn2_layers: usize,
    pub attention_heads: usize,
    pub rw_pe_steps: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden_dim: 200,
            gnn1_layers: 4,
            gnn2_layers: 3,
            attention_heads: 8,
            rw_pe_steps: RW_STEPS,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.hidden_dim == 0 || self.attention_heads == 0 {
            return Err(PolicyError::Config("hidden_dim and attention_heads must be positive".into()));
        }
        if self.hidden_dim % self.attention_heads != 0 {
            return Err(PolicyError::Config(format!(
                "hidden_dim {} is not divisible by attention_heads {}",
                self.hidden_dim, self.attention_heads
            )));
        }
        Ok(())
    }

    fn node_width(&self) -> usize {
        NODE_FEATURES - RW_STEPS + self.rw_pe_steps
    }
}

/// Shapes needed to rebuild a policy before loading a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub encoder: EncoderConfig,
    pub n_pps: usize,
    pub n_rps: usize,
    /// Training product keys in log-flow row order.
    pub flow_products: Vec<String>,
}

/// The template-composition policy.
pub struct RetroPolicy {
    shape: PolicyShape,
    gnn1: Encoder,
    gnn2: Encoder,
    mlp1: Mlp,
    mlp2: Mlp,
    mlp3: Mlp,
    e_pps: ParamId,
    e_rps: ParamId,
    e_p: ParamId,
    library: Arc<PatternLibrary>,
    pattern_inputs: Vec<GraphInput>,
    flow_index: HashMap<String, usize>,
}

/// Encodings computed once per tape.
#[derive(Default)]
pub struct RetroCache {
    product: Option<(String, Var)>,
    patterns: HashMap<usize, Var>,
}

impl RetroPolicy {
    /// Registers all parameters in `store`. Log-flow rows follow
    /// `flow_products`.
    pub fn new(
        encoder: EncoderConfig,
        library: Arc<PatternLibrary>,
        flow_products: Vec<String>,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<RetroPolicy, PolicyError> {
        encoder.validate()?;
        let d = encoder.hidden_dim;
        let width = encoder.node_width();
        let n_pps = library.pps.len();
        let n_rps = library.rps.len();
        let gnn1 = Encoder::new(store, "gnn1", width, d, encoder.gnn1_layers, encoder.attention_heads, rng);
        let gnn2 = Encoder::new(
            store,
            "gnn2",
            width + PATTERN_EXTRA,
            d,
            encoder.gnn2_layers,
            encoder.attention_heads,
            rng,
        );
        let mlp1 = Mlp::new(store, "mlp1", &[d, d, 1], rng);
        let mlp2 = Mlp::new(store, "mlp2", &[3 * d, d, n_rps + 1], rng);
        let mlp3 = Mlp::new(store, "mlp3", &[2 * d, d, 1], rng);
        let e_pps = store.add_uniform("e_pps", n_pps.max(1), d, d, rng);
        let e_rps = store.add_uniform("e_rps", n_rps.max(1), d, d, rng);
        let e_p = store.add_zeros("e_p", flow_products.len().max(1), 1);
        let pattern_inputs = library
            .rps
            .iter()
            .map(|p| GraphInput::pattern(p, encoder.rw_pe_steps))
            .collect();
        let flow_index = flow_products
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        Ok(RetroPolicy {
            shape: PolicyShape {
                encoder,
                n_pps,
                n_rps,
                flow_products,
            },
            gnn1,
            gnn2,
            mlp1,
            mlp2,
            mlp3,
            e_pps,
            e_rps,
            e_p,
            library,
            pattern_inputs,
            flow_index,
        })
    }

    pub fn shape(&self) -> &PolicyShape {
        &self.shape
    }

    pub fn log_flow_param(&self) -> ParamId {
        self.e_p
    }

    pub fn library(&self) -> &Arc<PatternLibrary> {
        &self.library
    }

    pub fn encode_product(&self, tape: &mut Tape, g: &MolGraph) -> Result<Var, PolicyError> {
        let input = GraphInput::molecule(g, self.shape.encoder.rw_pe_steps);
        Ok(self.gnn1.encode(tape, &input)?)
    }

    pub fn encode_pattern(&self, tape: &mut Tape, p: &PatternGraph) -> Result<Var, PolicyError> {
        let input = GraphInput::pattern(p, self.shape.encoder.rw_pe_steps);
        Ok(self.gnn2.encode(tape, &input)?)
    }

    fn product_embedding(&self, tape: &mut Tape, cache: &mut RetroCache, s: &State) -> Result<Var, PolicyError> {
        if let Some((key, v)) = &cache.product {
            if *key == s.product.key {
                return Ok(*v);
            }
        }
        let v = self.encode_product(tape, &s.product.graph)?;
        cache.product = Some((s.product.key.clone(), v));
        cache.patterns.clear();
        Ok(v)
    }

    fn pattern_embedding(&self, tape: &mut Tape, cache: &mut RetroCache, rp: usize) -> Result<Var, PolicyError> {
        if let Some(&v) = cache.patterns.get(&rp) {
            return Ok(v);
        }
        let v = self.gnn2.encode(tape, &self.pattern_inputs[rp])?;
        cache.patterns.insert(rp, v);
        Ok(v)
    }

    /// M x 1 scores, one per match, from summed matched-atom embeddings.
    pub fn score_phase1(&self, tape: &mut Tape, h: Var, matches: &[&[usize]]) -> Result<Var, PolicyError> {
        let mut flat = Vec::new();
        let mut owner = Vec::new();
        for (m, atoms) in matches.iter().enumerate() {
            flat.extend_from_slice(atoms);
            owner.extend(std::iter::repeat(m).take(atoms.len()));
        }
        let rows = tape.gather_rows(h, &flat)?;
        let pooled = tape.scatter_add_rows(rows, &owner, matches.len())?;
        Ok(self.mlp1.forward(tape, pooled)?)
    }

    /// 1 x (|RPS| + 1) scores; the last column is the advance action.
    pub fn score_phase2(
        &self,
        tape: &mut Tape,
        h: Var,
        match_atoms: &[usize],
        pp: usize,
        collected: &[usize],
    ) -> Result<Var, PolicyError> {
        let rows = tape.gather_rows(h, match_atoms)?;
        let pooled = tape.sum_rows(rows);
        let table = tape.param(self.e_pps);
        let pp_row = tape.gather_rows(table, &[pp])?;
        let rps = tape.param(self.e_rps);
        let r_sum = if collected.is_empty() {
            tape.leaf(Tensor::zeros(1, self.shape.encoder.hidden_dim))
        } else {
            let picked = tape.gather_rows(rps, collected)?;
            tape.sum_rows(picked)
        };
        let summary = tape.concat_cols(&[pooled, pp_row, r_sum])?;
        Ok(self.mlp2.forward(tape, summary)?)
    }

    /// C x 1 scores for candidate triples.
    pub fn score_phase3(
        &self,
        tape: &mut Tape,
        cache: &mut RetroCache,
        h: Var,
        match_atoms: &[usize],
        collected: &[usize],
        triples: &[Triple],
    ) -> Result<Var, PolicyError> {
        let mut blocks = Vec::with_capacity(collected.len());
        let mut offsets = Vec::with_capacity(collected.len());
        let mut offset = 0;
        for &rp in collected {
            blocks.push(self.pattern_embedding(tape, cache, rp)?);
            offsets.push(offset);
            offset += self.library.rps[rp].atom_count();
        }
        let stacked = tape.concat_rows(&blocks)?;
        let prod_idx: Vec<usize> = triples.iter().map(|t| match_atoms[t.0]).collect();
        let pat_idx: Vec<usize> = triples.iter().map(|t| offsets[t.1] + t.2).collect();
        let a = tape.gather_rows(h, &prod_idx)?;
        let b = tape.gather_rows(stacked, &pat_idx)?;
        let pair = tape.concat_cols(&[a, b])?;
        Ok(self.mlp3.forward(tape, pair)?)
    }
}

fn column_log_softmax(tape: &mut Tape, scores: Var, alpha: f64) -> Var {
    let row = tape.transpose(scores);
    tape.log_softmax_with_temperature(row, alpha)
}

impl FlowPolicy<RetroEnv> for RetroPolicy {
    type Cache = RetroCache;

    fn log_probs(
        &self,
        tape: &mut Tape,
        cache: &mut RetroCache,
        s: &State,
        actions: &[Action],
        alpha: f64,
    ) -> Result<Var, PolicyError> {
        if actions.is_empty() {
            return Err(PolicyError::NoActions);
        }
        let bad = |a: &Action| PolicyError::BadAction(format!("{a:?}"));
        let h = self.product_embedding(tape, cache, s)?;
        match &s.stage {
            Stage::Phase1 => {
                let mut atoms = Vec::with_capacity(actions.len());
                for a in actions {
                    match a {
                        Action::Match(i) if *i < s.product.matches.len() => {
                            atoms.push(s.product.matches[*i].atom_indices.as_slice())
                        }
                        _ => return Err(bad(a)),
                    }
                }
                let scores = self.score_phase1(tape, h, &atoms)?;
                Ok(column_log_softmax(tape, scores, alpha))
            }
            Stage::Phase2 { pick, collected } => {
                let m = &s.product.matches[*pick];
                let row = self.score_phase2(tape, h, &m.atom_indices, m.pattern_index, collected)?;
                let cols = actions
                    .iter()
                    .map(|a| match a {
                        Action::Reactant(r) if *r < self.shape.n_rps => Ok(*r),
                        Action::Advance => Ok(self.shape.n_rps),
                        _ => Err(bad(a)),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let column = tape.transpose(row);
                let picked = tape.gather_rows(column, &cols)?;
                Ok(column_log_softmax(tape, picked, alpha))
            }
            Stage::Phase3 { pick, collected, .. } => {
                let triples = actions
                    .iter()
                    .map(|a| match a {
                        Action::Map(t) => Ok(*t),
                        _ => Err(bad(a)),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let m = &s.product.matches[*pick];
                let scores = self.score_phase3(tape, cache, h, &m.atom_indices, collected, &triples)?;
                Ok(column_log_softmax(tape, scores, alpha))
            }
            Stage::Terminal { .. } => Err(PolicyError::NoActions),
        }
    }

    fn log_flow(&self, tape: &mut Tape, s0: &State) -> Result<Var, PolicyError> {
        let row = *self
            .flow_index
            .get(&s0.product.key)
            .ok_or_else(|| PolicyError::MissingLogFlow(s0.product.key.clone()))?;
        let table = tape.param(self.e_p);
        Ok(tape.pick(table, row, 0)?)
    }

    fn log_flow_params(&self) -> Vec<ParamId> {
        vec![self.e_p]
    }
}

use std::collections::HashMap;
use std::hash::Hash;

use super::{FlowPolicy, PolicyError};
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::env::FlowEnv;

/// One free logit per (state, action slot) and a single log-flow scalar.
/// Action slots follow the environment's legal-action order.
pub struct TabularPolicy<S> {
    index: HashMap<S, usize>,
    logits: ParamId,
    log_z: ParamId,
}

impl<S: Clone + Eq + Hash> TabularPolicy<S> {
    pub fn new(states: &[S], max_actions: usize, store: &mut ParamStore) -> TabularPolicy<S> {
        TabularPolicy {
            index: states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect(),
            logits: store.add_zeros("tabular.logits", states.len().max(1), max_actions.max(1)),
            log_z: store.add_zeros("tabular.log_z", 1, 1),
        }
    }

    pub fn log_z_param(&self) -> ParamId {
        self.log_z
    }

    pub fn logits_param(&self) -> ParamId {
        self.logits
    }
}

impl<E: FlowEnv> FlowPolicy<E> for TabularPolicy<E::State> {
    type Cache = ();

    fn log_probs(
        &self,
        tape: &mut Tape,
        _cache: &mut (),
        s: &E::State,
        actions: &[E::Action],
        alpha: f64,
    ) -> Result<Var, PolicyError> {
        if actions.is_empty() {
            return Err(PolicyError::NoActions);
        }
        let row = *self
            .index
            .get(s)
            .ok_or_else(|| PolicyError::BadAction("unknown state".into()))?;
        let table = tape.param(self.logits);
        let r = tape.gather_rows(table, &[row])?;
        let used = tape.slice_cols(r, 0, actions.len())?;
        Ok(tape.log_softmax_with_temperature(used, alpha))
    }

    fn log_flow(&self, tape: &mut Tape, _s0: &E::State) -> Result<Var, PolicyError> {
        Ok(tape.param(self.log_z))
    }

    fn log_flow_params(&self) -> Vec<ParamId> {
        vec![self.log_z]
    }
}

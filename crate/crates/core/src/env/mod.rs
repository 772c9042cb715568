//! Sequential construction environments: the generic interface used by the
//! trainer and sampler, the three-phase template composition MDP, and a small
//! enumerable environment for exact checks.

mod retro;
pub mod toy;

use std::hash::Hash;

use rand::Rng;

pub use retro::{Action, EnvConfig, Outcome, ProductInfo, RetroEnv, Stage, State};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("action is not legal in this state: {0}")]
    IllegalAction(String),
    #[error("terminal states have no actions")]
    Terminal,
    #[error("initial state has no parents")]
    Initial,
    #[error("template application failed: {0}")]
    Application(String),
    #[error("reaction cannot be expressed with the library: {0}")]
    NotInLibrary(String),
}

/// A DAG-structured environment with a uniform backward policy.
pub trait FlowEnv {
    type State: Clone + Eq + Hash;
    type Action: Clone + Eq + Hash + std::fmt::Debug;

    /// Legal actions in deterministic order. Empty for terminals and dead ends.
    fn actions(&self, s: &Self::State) -> Vec<Self::Action>;

    fn step(&self, s: &Self::State, a: &Self::Action) -> Result<Self::State, EnvError>;

    fn is_terminal(&self, s: &Self::State) -> bool;

    /// Every (parent, action) pair leading to `s`.
    fn parents(&self, s: &Self::State) -> Result<Vec<(Self::State, Self::Action)>, EnvError>;

    fn parent_count(&self, s: &Self::State) -> Result<usize, EnvError> {
        self.parents(s).map(|p| p.len())
    }
}

/// `s_0 a_0 s_1 ... a_{k-1} s_k` with `s_k` terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S, A> {
    pub states: Vec<S>,
    pub actions: Vec<A>,
    /// Position of each action in the legal action list of its state.
    pub action_indices: Vec<usize>,
    /// Forward policy log-probabilities as sampled; empty when unknown.
    pub log_pf: Vec<f64>,
    /// `-ln parent_count(s_{i+1})` per step.
    pub log_pb: Vec<f64>,
}

impl<S, A> Trajectory<S, A> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn terminal(&self) -> &S {
        self.states.last().expect("trajectory has states")
    }

    pub fn initial(&self) -> &S {
        &self.states[0]
    }
}

impl<S, A: std::fmt::Debug> Trajectory<S, A> {
    /// One action per line, for failure triage.
    pub fn debug_text(&self) -> String {
        self.actions
            .iter()
            .map(|a| format!("{a:?}\n"))
            .collect()
    }
}

/// Backward policy log-probabilities of a forward action sequence.
pub fn backward_log_probs<E: FlowEnv>(env: &E, states: &[E::State]) -> Result<Vec<f64>, EnvError> {
    states[1..]
        .iter()
        .map(|s| env.parent_count(s).map(|c| -(c as f64).ln()))
        .collect()
}

/// Samples a trajectory backward from `terminal` with the uniform backward
/// policy, stopping at a state without parents.
pub fn sample_backward<E: FlowEnv>(
    env: &E,
    terminal: &E::State,
    rng: &mut impl Rng,
) -> Result<Trajectory<E::State, E::Action>, EnvError> {
    let mut states = vec![terminal.clone()];
    let mut actions = Vec::new();
    let mut log_pb = Vec::new();
    loop {
        let cur = states.last().expect("non-empty");
        let parents = match env.parents(cur) {
            Ok(p) => p,
            Err(EnvError::Initial) => break,
            Err(e) => return Err(e),
        };
        log_pb.push(-(parents.len() as f64).ln());
        let (p, a) = parents[rng.gen_range(0..parents.len())].clone();
        states.push(p);
        actions.push(a);
    }
    states.reverse();
    actions.reverse();
    log_pb.reverse();
    let mut action_indices = Vec::with_capacity(actions.len());
    for (s, a) in states.iter().zip(&actions) {
        let legal = env.actions(s);
        let idx = legal
            .iter()
            .position(|x| x == a)
            .ok_or_else(|| EnvError::IllegalAction(format!("{a:?}")))?;
        action_indices.push(idx);
    }
    Ok(Trajectory {
        states,
        actions,
        action_indices,
        log_pf: Vec::new(),
        log_pb,
    })
}

//! Trajectory Balance training with an exponential reward, exploratory
//! forward sampling, backward sampling from data and a replay buffer.

mod replay;


use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AutodiffError, Gradients, ParamStore, Tape, Var};
use crate::env::{backward_log_probs, sample_backward, EnvError, FlowEnv, Trajectory};
use crate::policy::{FlowPolicy, PolicyError};

pub use replay::ReplayBuffer;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("loss became non-finite at iteration {0}")]
    Diverged(usize),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epsilon: f64,
    pub n_forward: usize,
    pub n_dataset: usize,
    pub n_replay: usize,
    pub lr: f64,
    /// Learning rate of the log-flow table.
    pub log_flow_lr: f64,
    pub iterations: usize,
    pub reward_beta: f64,
    pub seed: u64,
    pub max_reactants: usize,
    pub replay_capacity: usize,
    /// Minimum feasibility for replay admission.
    pub replay_threshold: f64,
    pub clip_norm: f64,
    /// Policy temperature while sampling for training.
    pub train_alpha: f64,
    /// Resampling attempts per forward trajectory before giving up.
    pub max_resamples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epsilon: 0.05,
            n_forward: 16,
            n_dataset: 96,
            n_replay: 16,
            lr: 5e-4,
            log_flow_lr: 0.05,
            iterations: 25_000,
            reward_beta: 12.0,
            seed: 0,
            max_reactants: 3,
            replay_capacity: 10_000,
            replay_threshold: 0.5,
            clip_norm: 10.0,
            train_alpha: 1.0,
            max_resamples: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.reward_beta.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("reward_beta must be positive");
        }
        if self.lr <= 0.0 || self.log_flow_lr <= 0.0 {
            return bad("learning rates must be positive");
        }
        if self.n_forward + self.n_dataset + self.n_replay == 0 {
            return bad("batch is empty");
        }
        Ok(())
    }
}

/// exp(beta * f).
pub fn reward(f: f64, beta: f64) -> f64 {
    (beta * f).exp()
}

/// `(log F + sum log P_F - log R - sum log P_B)^2` on the tape.
pub fn tb_loss(tape: &mut Tape, log_flow: Var, log_pf: &[Var], log_reward: f64, log_pb: &[f64]) -> Result<Var, AutodiffError> {
    let mut total = log_flow;
    for &lp in log_pf {
        total = tape.add(total, lp)?;
    }
    let offset = log_reward + log_pb.iter().sum::<f64>();
    let residual = tape.add_scalar(total, -offset);
    Ok(tape.square(residual))
}

/// Forward log-probabilities of every step of `traj` on one tape.
pub fn trajectory_log_pf<E: FlowEnv, P: FlowPolicy<E>>(
    env: &E,
    policy: &P,
    tape: &mut Tape,
    cache: &mut P::Cache,
    traj: &Trajectory<E::State, E::Action>,
    alpha: f64,
) -> Result<Vec<Var>, TrainError> {
    let mut out = Vec::with_capacity(traj.len());
    for (i, s) in traj.states[..traj.len()].iter().enumerate() {
        let actions = env.actions(s);
        let lp = policy.log_probs(tape, cache, s, &actions, alpha)?;
        out.push(tape.pick(lp, 0, traj.action_indices[i])?);
    }
    Ok(out)
}

/// Loss value and parameter gradients of one trajectory.
pub fn trajectory_gradients<E: FlowEnv, P: FlowPolicy<E>>(
    env: &E,
    policy: &P,
    store: &ParamStore,
    traj: &Trajectory<E::State, E::Action>,
    log_reward: f64,
    alpha: f64,
) -> Result<(f64, Gradients), TrainError> {
    let mut tape = Tape::new(store);
    let mut cache = P::Cache::default();
    let log_pf = trajectory_log_pf(env, policy, &mut tape, &mut cache, traj, alpha)?;
    let log_flow = policy.log_flow(&mut tape, traj.initial())?;
    let log_pb = if traj.log_pb.len() == traj.len() {
        traj.log_pb.clone()
    } else {
        backward_log_probs(env, &traj.states)?
    };
    let loss = tb_loss(&mut tape, log_flow, &log_pf, log_reward, &log_pb)?;
    let value = tape.value(loss).item();
    Ok((value, tape.backward(loss)?.into_params()))
}

/// Result of [`sample_forward`].
pub struct ForwardSample<S, A> {
    pub trajectory: Option<Trajectory<S, A>>,
    /// Dead ends hit before success (or before giving up).
    pub resamples: usize,
}

/// Rolls out from `s0`: with probability `epsilon` a uniform legal action,
/// otherwise one drawn from the policy. Cached log-probabilities are always
/// the policy's. Dead ends restart the rollout up to `max_resamples` times.
pub fn sample_forward<E: FlowEnv, P: FlowPolicy<E>>(
    env: &E,
    policy: &P,
    store: &ParamStore,
    s0: &E::State,
    epsilon: f64,
    alpha: f64,
    max_resamples: usize,
    rng: &mut impl Rng,
) -> Result<ForwardSample<E::State, E::Action>, TrainError> {
    let mut tape = Tape::new(store);
    let mut cache = P::Cache::default();
    let mut resamples = 0;
    'attempt: loop {
        let mut states = vec![s0.clone()];
        let mut actions = Vec::new();
        let mut action_indices = Vec::new();
        let mut log_pf = Vec::new();
        loop {
            let s = states.last().expect("non-empty");
            if env.is_terminal(s) {
                let log_pb = backward_log_probs(env, &states)?;
                return Ok(ForwardSample {
                    trajectory: Some(Trajectory {
                        states,
                        actions,
                        action_indices,
                        log_pf,
                        log_pb,
                    }),
                    resamples,
                });
            }
            let legal = env.actions(s);
            if legal.is_empty() {
                resamples += 1;
                if resamples > max_resamples {
                    return Ok(ForwardSample {
                        trajectory: None,
                        resamples,
                    });
                }
                continue 'attempt;
            }
            let lp = policy.log_probs(&mut tape, &mut cache, s, &legal, alpha)?;
            let logp = tape.value(lp).as_slice().to_vec();
            let idx = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..legal.len())
            } else {
                sample_categorical(&logp, rng)
            };
            let next = env.step(s, &legal[idx])?;
            log_pf.push(logp[idx]);
            action_indices.push(idx);
            actions.push(legal[idx].clone());
            states.push(next);
        }
    }
}

/// Draws an index from log-probabilities.
pub fn sample_categorical(log_probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Initial states for forward sampling and dataset terminals for backward
/// sampling.
pub struct TrainData<S> {
    pub starts: Vec<S>,
    pub dataset: Vec<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub loss: f64,
    pub mean_reward: f64,
    pub mean_log_reward: f64,
    pub buffer_size: usize,
    pub resample_count: usize,
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Runs `cfg.iterations` updates. `feasibility` maps a terminal to f in
/// [0, 1]; dataset terminals always get f = 1. `hook` sees every iteration.
pub fn train<E, P, F, H>(
    env: &E,
    policy: &P,
    store: &mut ParamStore,
    cfg: &TrainConfig,
    data: &TrainData<E::State>,
    feasibility: F,
    mut hook: H,
) -> Result<ReplayBuffer<E::State>, TrainError>
where
    E: FlowEnv,
    P: FlowPolicy<E>,
    F: Fn(&E::State) -> f64,
    H: FnMut(&IterationMetrics, &ParamStore),
{
    cfg.validate()?;
    for id in policy.log_flow_params() {
        store.set_lr(id, cfg.log_flow_lr);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let adam = Adam {
        lr: cfg.lr,
        ..Adam::default()
    };
    for iteration in 0..cfg.iterations {
        let mut batch: Vec<(Trajectory<E::State, E::Action>, f64)> = Vec::new();
        let mut resample_count = 0;
        if !data.starts.is_empty() {
            for _ in 0..cfg.n_forward {
                let s0 = &data.starts[rng.gen_range(0..data.starts.len())];
                let sample = sample_forward(env, policy, store, s0, cfg.epsilon, cfg.train_alpha, cfg.max_resamples, &mut rng)?;
                resample_count += sample.resamples;
                if let Some(t) = sample.trajectory {
                    let f = feasibility(t.terminal());
                    if f >= cfg.replay_threshold {
                        buffer.insert(t.terminal().clone());
                    }
                    batch.push((t, f));
                }
            }
        }
        if !data.dataset.is_empty() {
            for _ in 0..cfg.n_dataset {
                let term = &data.dataset[rng.gen_range(0..data.dataset.len())];
                batch.push((sample_backward(env, term, &mut rng)?, 1.0));
            }
        }
        let take = cfg.n_replay.min(buffer.len());
        if take > 0 {
            for i in sample_indices(&mut rng, buffer.len(), take).into_vec() {
                let term = buffer.get(i).clone();
                let f = feasibility(&term);
                batch.push((sample_backward(env, &term, &mut rng)?, f));
            }
        }
        if batch.is_empty() {
            continue;
        }
        let scale = 1.0 / batch.len() as f64;
        let mut grads = Gradients::zeros(store);
        let mut loss = 0.0;
        let mut reward_sum = 0.0;
        let mut log_reward_sum = 0.0;
        for (t, f) in &batch {
            let log_r = cfg.reward_beta * f;
            let (l, g) = trajectory_gradients(env, policy, store, t, log_r, cfg.train_alpha)?;
            loss += l * scale;
            reward_sum += log_r.exp() * scale;
            log_reward_sum += log_r * scale;
            grads.add_assign(&g);
        }
        if !loss.is_finite() {
            return Err(TrainError::Diverged(iteration));
        }
        grads.scale(scale);
        let grad_norm = grads.global_norm();
        let clipped = grads.clip_global_norm(cfg.clip_norm);
        if clipped {
            log::debug!("iteration {iteration}: gradient norm {grad_norm:.3} clipped to {}", cfg.clip_norm);
        }
        store.adam_step(&grads, &adam)?;
        hook(
            &IterationMetrics {
                iteration,
                loss,
                mean_reward: reward_sum,
                mean_log_reward: log_reward_sum,
                buffer_size: buffer.len(),
                resample_count,
                grad_norm,
                clipped,
            },
            store,
        );
    }
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn reward_values() {
        assert_eq!(reward(0.0, 12.0), 1.0);
        assert!((reward(1.0, 12.0) - 162_754.791_419).abs() < 1e-3);
    }

    #[test]
    fn balanced_flow_has_zero_loss() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let log_f = tape.leaf(Tensor::scalar(3.0_f64.ln()));
        let loss = tb_loss(&mut tape, log_f, &[], 3.0_f64.ln(), &[]).unwrap();
        assert_eq!(tape.value(loss).item(), 0.0);
    }

    #[test]
    fn doubling_reward_shifts_residual() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let log_f = tape.leaf(Tensor::scalar(0.3));
        let lp = tape.leaf(Tensor::scalar(-0.7));
        let a = tb_loss(&mut tape, log_f, &[lp], 1.1, &[-0.2]).unwrap();
        let b = tb_loss(&mut tape, log_f, &[lp], 1.1 + 2f64.ln(), &[-0.2]).unwrap();
        let ra = tape.value(a).item().sqrt() * (0.3_f64 - 0.7 - 1.1 + 0.2).signum();
        let rb = tape.value(b).item().sqrt() * (0.3_f64 - 0.7 - 1.1 - 2f64.ln() + 0.2).signum();
        assert!((rb - (ra - 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn categorical_follows_cumulative_mass() {
        let lp = [0.25f64.ln(), 0.75f64.ln()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hits = (0..4000).filter(|_| sample_categorical(&lp, &mut rng) == 1).count();
        assert!((hits as f64 / 4000.0 - 0.75).abs() < 0.03);
    }
}

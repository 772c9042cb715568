//! Multisets over `items` symbols of size at most `max_size`, built one
//! symbol at a time, with an explicit stop action. Small enough to enumerate.

use std::collections::BTreeSet;

use super::{EnvError, FlowEnv};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToyState {
    /// Sorted multiset.
    pub items: Vec<usize>,
    pub stopped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ToyAction {
    Add(usize),
    Stop,
}

#[derive(Clone, Debug)]
pub struct ToyEnv {
    pub items: usize,
    pub max_size: usize,
}

impl ToyEnv {
    pub fn new(items: usize, max_size: usize) -> ToyEnv {
        ToyEnv { items, max_size }
    }

    pub fn initial(&self) -> ToyState {
        ToyState {
            items: Vec::new(),
            stopped: false,
        }
    }

    /// Every non-terminal state, in sorted order.
    pub fn states(&self) -> Vec<ToyState> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![self.initial()];
        while let Some(s) = frontier.pop() {
            if !out.insert(s.clone()) {
                continue;
            }
            for a in self.actions(&s) {
                let t = self.step(&s, &a).expect("legal");
                if !t.stopped {
                    frontier.push(t);
                }
            }
        }
        out.into_iter().collect()
    }

    /// Every terminal state, in sorted order.
    pub fn terminals(&self) -> Vec<ToyState> {
        self.states()
            .into_iter()
            .map(|s| ToyState {
                items: s.items,
                stopped: true,
            })
            .collect()
    }
}

impl FlowEnv for ToyEnv {
    type State = ToyState;
    type Action = ToyAction;

    fn actions(&self, s: &ToyState) -> Vec<ToyAction> {
        if s.stopped {
            return Vec::new();
        }
        let mut out = Vec::new();
        if s.items.len() < self.max_size {
            out.extend((0..self.items).map(ToyAction::Add));
        }
        out.push(ToyAction::Stop);
        out
    }

    fn step(&self, s: &ToyState, a: &ToyAction) -> Result<ToyState, EnvError> {
        if s.stopped {
            return Err(EnvError::Terminal);
        }
        match *a {
            ToyAction::Stop => Ok(ToyState {
                items: s.items.clone(),
                stopped: true,
            }),
            ToyAction::Add(i) if i < self.items && s.items.len() < self.max_size => {
                let mut items = s.items.clone();
                let at = items.partition_point(|&x| x <= i);
                items.insert(at, i);
                Ok(ToyState {
                    items,
                    stopped: false,
                })
            }
            _ => Err(EnvError::IllegalAction(format!("{a:?}"))),
        }
    }

    fn is_terminal(&self, s: &ToyState) -> bool {
        s.stopped
    }

    fn parents(&self, s: &ToyState) -> Result<Vec<(ToyState, ToyAction)>, EnvError> {
        if s.stopped {
            return Ok(vec![(
                ToyState {
                    items: s.items.clone(),
                    stopped: false,
                },
                ToyAction::Stop,
            )]);
        }
        if s.items.is_empty() {
            return Err(EnvError::Initial);
        }
        let mut distinct = s.items.clone();
        distinct.dedup();
        Ok(distinct
            .into_iter()
            .map(|i| {
                let mut items = s.items.clone();
                let at = items.iter().position(|&x| x == i).expect("present");
                items.remove(at);
                (
                    ToyState {
                        items,
                        stopped: false,
                    },
                    ToyAction::Add(i),
                )
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_count_is_multiset_count() {
        // Multisets of size <= 3 over 3 symbols: 1 + 3 + 6 + 10.
        assert_eq!(ToyEnv::new(3, 3).terminals().len(), 20);
    }

    #[test]
    fn parent_count_matches_forward_enumeration() {
        let env = ToyEnv::new(3, 3);
        let states = env.states();
        for target in states.iter().chain(env.terminals().iter()) {
            let mut forward = 0;
            for s in &states {
                for a in env.actions(s) {
                    if &env.step(s, &a).unwrap() == target {
                        forward += 1;
                    }
                }
            }
            match env.parent_count(target) {
                Ok(c) => assert_eq!(c, forward, "{target:?}"),
                Err(_) => assert_eq!(forward, 0),
            }
        }
    }
}

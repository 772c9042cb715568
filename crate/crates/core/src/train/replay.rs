use std::collections::{HashSet, VecDeque};
use std::hash::Hash;

/// Bounded FIFO of distinct terminal states.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    items: VecDeque<S>,
    seen: HashSet<S>,
}

impl<S: Clone + Eq + Hash> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::new(),
            seen: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Returns false for duplicates. Evicts the oldest entry when full.
    pub fn insert(&mut self, s: S) -> bool {
        if self.capacity == 0 || self.seen.contains(&s) {
            return false;
        }
        if self.items.len() == self.capacity {
            if let Some(old) = self.items.pop_front() {
                self.seen.remove(&old);
            }
        }
        self.seen.insert(s.clone());
        self.items.push_back(s);
        true
    }

    pub fn get(&self, i: usize) -> &S {
        &self.items[i]
    }

    pub fn contains(&self, s: &S) -> bool {
        self.seen.contains(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_and_eviction() {
        let mut b = ReplayBuffer::new(2);
        assert!(b.insert(1));
        assert!(!b.insert(1));
        assert!(b.insert(2));
        assert!(b.insert(3));
        assert_eq!(b.len(), 2);
        assert!(!b.contains(&1));
        assert!(b.contains(&3));
    }
}

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action_scores: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO experience store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    storage: Vec<Transition>,
    /// Slot the next insert overwrites once the buffer is full.
    head: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be >= 1"));
        }
        Ok(Self {
            capacity,
            obs_dim,
            act_dim,
            storage: Vec::new(),
            head: 0,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn total_inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim
            || t.next_obs.len() != self.obs_dim
            || t.action_scores.len() != self.act_dim
        {
            return Err(Error::usage(format!(
                "transition dims ({}, {}, {}) do not match buffer ({}, {})",
                t.obs.len(),
                t.action_scores.len(),
                t.next_obs.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
        Ok(())
    }

    /// Transitions from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer)
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }

    /// Uniform indices, drawn with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        if self.storage.is_empty() {
            return Vec::new();
        }
        (0..batch).map(|_| rng.random_range(0..self.storage.len())).collect()
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Transition> {
        self.sample_indices(batch, rng)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn tr(tag: f64) -> Transition {
        Transition {
            obs: vec![tag; 2],
            action_scores: vec![0.5],
            reward: tag,
            next_obs: vec![tag; 2],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(5, 2, 1).unwrap();
        for k in 0..8 {
            b.push(tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 5);
        let kept: Vec<f64> = b.iter_fifo().map(|t| t.reward).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn sampling_covers_every_slot() {
        let mut b = ReplayBuffer::new(10, 2, 1).unwrap();
        for k in 0..10 {
            b.push(tr(k as f64)).unwrap();
        }
        let mut r = rng::stream(4, 4, 4);
        let mut seen = [false; 10];
        for i in b.sample_indices(10_000, &mut r) {
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn rejects_wrong_dims() {
        let mut b = ReplayBuffer::new(3, 3, 1).unwrap();
        assert!(b.push(tr(1.0)).is_err());
        assert!(ReplayBuffer::new(0, 1, 1).is_err());
    }
}

//! Fixed-capacity FIFO replay memory.

use rand::seq::index;

use crate::seed::StreamRng;

/// One environment step. Populations are referenced by bank flow index and
/// step, which stay fixed while one Q-function is trained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// Bank flow the episode follows.
    pub flow: usize,
    /// Step `n`; the population is flow step `n`, the next one step `n + 1`.
    pub step: usize,
    /// No continuation value after this step.
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
    rng: StreamRng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rng: StreamRng) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            rng,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (a, b) = self.items.split_at(self.head);
        b.iter().chain(a)
    }

    /// Up to `size` distinct entries, uniformly without replacement.
    pub fn sample(&mut self, size: usize) -> Vec<Transition> {
        let size = size.min(self.items.len());
        index::sample(&mut self.rng, self.items.len(), size)
            .into_iter()
            .map(|i| self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn t(state: usize) -> Transition {
        Transition {
            state,
            action: 0,
            reward: 0.0,
            next_state: 0,
            flow: 0,
            step: 0,
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3, StreamRng::seed_from_u64(0));
        for s in 0..5 {
            b.push(t(s));
            assert!(b.len() <= 3);
        }
        let order: Vec<usize> = b.iter().map(|t| t.state).collect();
        assert_eq!(order, vec![2, 3, 4]);
    }

    #[test]
    fn samples_without_replacement() {
        let mut b = ReplayBuffer::new(10, StreamRng::seed_from_u64(1));
        for s in 0..10 {
            b.push(t(s));
        }
        for _ in 0..50 {
            let mut s: Vec<usize> = b.sample(10).iter().map(|t| t.state).collect();
            s.sort();
            assert_eq!(s, (0..10).collect::<Vec<_>>());
        }
        assert_eq!(b.sample(20).len(), 10);
    }

    #[test]
    fn sampling_is_seeded() {
        let fill = |seed| {
            let mut b = ReplayBuffer::new(8, StreamRng::seed_from_u64(seed));
            for s in 0..8 {
                b.push(t(s));
            }
            b.sample(3)
        };
        assert_eq!(fill(4), fill(4));
    }
}

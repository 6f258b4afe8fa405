use rand::Rng;

use crate::env::{ACT_DIM, OBS_DIM};

/// One stored interaction; `u` is the normalized action in `[-1, 1]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub x: [f64; OBS_DIM],
    pub u: [f64; ACT_DIM],
    pub r: f64,
    pub x_next: [f64; OBS_DIM],
    pub d: f64,
}

impl Transition {
    pub fn is_valid(&self) -> bool {
        (self.d == 0.0 || self.d == 1.0)
            && self.r.is_finite()
            && self.x.iter().chain(&self.u).chain(&self.x_next).all(|v| v.is_finite())
    }
}

/// Fixed-capacity ring store; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

/// Struct-of-arrays minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub n: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub x_next: Vec<f64>,
    pub d: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let mut b = Batch { n: ts.len(), ..Default::default() };
        for t in ts {
            b.x.extend_from_slice(&t.x);
            b.u.extend_from_slice(&t.u);
            b.r.push(t.r);
            b.x_next.extend_from_slice(&t.x_next);
            b.d.push(t.d);
        }
        b
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 20)), capacity, cursor: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
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

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform draw with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Batch {
        let idx = self.sample_indices(rng, n);
        let ts: Vec<Transition> = idx.iter().map(|&i| self.items[i]).collect();
        Batch::from_transitions(&ts)
    }
}

//! Bounded sample stores for rehearsal strategies.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample, TensorDataset};
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferPolicy {
    /// Per-class quotas of `capacity / classes_seen` (the remainder goes to
    /// the lowest class ids), reservoir sampling inside each class.
    #[default]
    ClassBalanced,
    /// Plain reservoir sampling over all patterns.
    Reservoir,
}

/// Replay memory.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    policy: BufferPolicy,
    per_class: BTreeMap<usize, Vec<Sample>>,
    flat: Vec<Sample>,
    seen_per_class: BTreeMap<usize, u64>,
    total_seen: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, policy: BufferPolicy) -> Self {
        ReplayBuffer {
            capacity,
            policy,
            per_class: BTreeMap::new(),
            flat: Vec::new(),
            seen_per_class: BTreeMap::new(),
            total_seen: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        match self.policy {
            BufferPolicy::ClassBalanced => self.per_class.values().map(Vec::len).sum(),
            BufferPolicy::Reservoir => self.flat.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_seen(&self) -> u64 {
        self.total_seen
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for s in self.samples() {
            *counts.entry(s.y).or_insert(0) += 1;
        }
        counts
    }

    /// Stored samples in class order (class-balanced) or slot order.
    pub fn samples(&self) -> Vec<&Sample> {
        match self.policy {
            BufferPolicy::ClassBalanced => self.per_class.values().flatten().collect(),
            BufferPolicy::Reservoir => self.flat.iter().collect(),
        }
    }

    fn quotas(&self) -> BTreeMap<usize, usize> {
        let n = self.seen_per_class.len();
        if n == 0 {
            return BTreeMap::new();
        }
        let (base, rem) = (self.capacity / n, self.capacity % n);
        self.seen_per_class
            .keys()
            .enumerate()
            .map(|(rank, &c)| (c, base + usize::from(rank < rem)))
            .collect()
    }

    /// Offers every pattern of `ds` to the buffer. Payloads are loaded only
    /// for patterns that get stored.
    pub fn insert_dataset(&mut self, ds: &dyn Dataset, rng: &mut ChaCha8Rng) -> Result<()> {
        match self.policy {
            BufferPolicy::ClassBalanced => self.insert_balanced(ds, rng),
            BufferPolicy::Reservoir => self.insert_reservoir(ds, rng),
        }
    }

    fn insert_reservoir(&mut self, ds: &dyn Dataset, rng: &mut ChaCha8Rng) -> Result<()> {
        for i in 0..ds.len() {
            self.total_seen += 1;
            if self.flat.len() < self.capacity {
                self.flat.push(ds.get(i)?);
            } else {
                let j = rng.random_range(0..self.total_seen);
                if (j as usize) < self.capacity {
                    self.flat[j as usize] = ds.get(i)?;
                }
            }
        }
        Ok(())
    }

    fn insert_balanced(&mut self, ds: &dyn Dataset, rng: &mut ChaCha8Rng) -> Result<()> {
        let targets: Vec<usize> = (0..ds.len()).map(|i| ds.target(i)).collect::<Result<_>>()?;
        for &y in &targets {
            self.seen_per_class.entry(y).or_insert(0);
        }
        let quotas = self.quotas();
        for (c, slots) in self.per_class.iter_mut() {
            let q = quotas[c];
            while slots.len() > q {
                let victim = rng.random_range(0..slots.len());
                slots.remove(victim);
            }
        }
        for (i, &y) in targets.iter().enumerate() {
            self.total_seen += 1;
            let seen = self.seen_per_class.get_mut(&y).expect("registered above");
            *seen += 1;
            let seen = *seen;
            let q = quotas[&y];
            let slots = self.per_class.entry(y).or_default();
            if slots.len() < q {
                slots.push(ds.get(i)?);
            } else {
                let j = rng.random_range(0..seen);
                if (j as usize) < q {
                    slots[j as usize] = ds.get(i)?;
                }
            }
        }
        Ok(())
    }

    /// Draws `k` distinct stored samples.
    pub fn draw(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
        let all = self.samples();
        let k = k.min(all.len());
        index::sample(rng, all.len(), k)
            .into_iter()
            .map(|i| all[i].clone())
            .collect()
    }
}

/// Greedy class-balanced sampler: a new pattern is stored while the buffer
/// has room; once full, a pattern of a class below `capacity / classes_seen`
/// evicts a random pattern of the currently largest class.
#[derive(Clone, Debug)]
pub struct GreedyBalancedBuffer {
    capacity: usize,
    per_class: BTreeMap<usize, Vec<Sample>>,
    classes_seen: BTreeSet<usize>,
}

impl GreedyBalancedBuffer {
    pub fn new(capacity: usize) -> Self {
        GreedyBalancedBuffer {
            capacity,
            per_class: BTreeMap::new(),
            classes_seen: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        self.per_class
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&c, v)| (c, v.len()))
            .collect()
    }

    pub fn insert_dataset(&mut self, ds: &dyn Dataset, rng: &mut ChaCha8Rng) -> Result<()> {
        for i in 0..ds.len() {
            let y = ds.target(i)?;
            self.classes_seen.insert(y);
            if self.len() < self.capacity {
                self.per_class.entry(y).or_default().push(ds.get(i)?);
                continue;
            }
            let cap_per_class = self.capacity / self.classes_seen.len();
            let count = self.per_class.get(&y).map_or(0, Vec::len);
            if count >= cap_per_class {
                continue;
            }
            // Largest class; ties go to the lowest class id.
            let (&largest, _) = self
                .per_class
                .iter()
                .rev()
                .max_by_key(|(_, v)| v.len())
                .expect("buffer is full, so non-empty");
            let victims = self.per_class.get_mut(&largest).expect("exists");
            let v = rng.random_range(0..victims.len());
            victims.remove(v);
            self.per_class.entry(y).or_default().push(ds.get(i)?);
        }
        Ok(())
    }

    pub fn to_dataset(&self) -> Result<TensorDataset> {
        let samples: Vec<Sample> = self.per_class.values().flatten().cloned().collect();
        TensorDataset::from_samples(&samples)
    }
}

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::models::MlpModel;

/// Reset/result half of the metric protocol; `update` signatures differ
/// per metric.
pub trait Metric {
    type Output;

    /// Returns the metric to its construction-time state.
    fn reset(&mut self);

    /// Current value; never mutates state.
    fn result(&self) -> Self::Output;
}

fn check_lengths(preds: &[usize], targets: &[usize]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::Length {
            expected: targets.len(),
            actual: preds.len(),
        });
    }
    Ok(())
}

/// Pooled top-1 accuracy; 0 when empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Accuracy {
    correct: u64,
    total: u64,
}

impl Accuracy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, preds: &[usize], targets: &[usize]) -> Result<()> {
        check_lengths(preds, targets)?;
        self.correct += preds.iter().zip(targets).filter(|(p, t)| p == t).count() as u64;
        self.total += targets.len() as u64;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

impl Metric for Accuracy {
    type Output = f64;

    fn reset(&mut self) {
        *self = Self::default();
    }

    fn result(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Sample-weighted mean loss; 0 when empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossMetric {
    weighted_sum: f64,
    count: u64,
}

impl LossMetric {
    pub fn new() -> Self {
        Self::default()
    }

    /// `loss` is the mean over a batch of `batch_size` patterns.
    pub fn update(&mut self, loss: f64, batch_size: usize) -> Result<()> {
        if batch_size == 0 {
            return Err(Error::invalid("loss update needs a positive batch size"));
        }
        self.weighted_sum += loss * batch_size as f64;
        self.count += batch_size as u64;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

impl Metric for LossMetric {
    type Output = f64;

    fn reset(&mut self) {
        *self = Self::default();
    }

    fn result(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.weighted_sum / self.count as f64
        }
    }
}

/// Accuracy right after training on an experience minus its latest
/// accuracy. Negative values (backward transfer) are kept.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Forgetting {
    initial: BTreeMap<usize, f64>,
    latest: BTreeMap<usize, f64>,
}

impl Forgetting {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, experience: usize, accuracy: f64, initial: bool) -> Result<()> {
        if initial {
            if self.initial.contains_key(&experience) {
                return Err(Error::State(format!(
                    "initial accuracy of experience {experience} already recorded"
                )));
            }
            self.initial.insert(experience, accuracy);
        } else {
            if !self.initial.contains_key(&experience) {
                return Err(Error::State(format!(
                    "experience {experience} has no initial accuracy yet"
                )));
            }
            self.latest.insert(experience, accuracy);
        }
        Ok(())
    }

    pub fn has_initial(&self, experience: usize) -> bool {
        self.initial.contains_key(&experience)
    }

    /// Forgetting of a single experience, when both values exist.
    pub fn get(&self, experience: usize) -> Option<f64> {
        Some(self.initial.get(&experience)? - self.latest.get(&experience)?)
    }
}

impl Metric for Forgetting {
    type Output = BTreeMap<usize, f64>;

    fn reset(&mut self) {
        *self = Self::default();
    }

    fn result(&self) -> BTreeMap<usize, f64> {
        self.latest
            .iter()
            .filter_map(|(&e, latest)| Some((e, self.initial.get(&e)? - latest)))
            .collect()
    }
}

/// Square count matrix, `[target][prediction]`, growing to the largest
/// index seen.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, preds: &[usize], targets: &[usize]) -> Result<()> {
        check_lengths(preds, targets)?;
        for (&p, &t) in preds.iter().zip(targets) {
            let need = p.max(t) + 1;
            if need > self.counts.len() {
                for row in &mut self.counts {
                    row.resize(need, 0);
                }
                self.counts.resize(need, vec![0; need]);
            }
            self.counts[t][p] += 1;
        }
        Ok(())
    }
}

impl Metric for ConfusionMatrix {
    type Output = Vec<Vec<u64>>;

    fn reset(&mut self) {
        self.counts.clear();
    }

    fn result(&self) -> Vec<Vec<u64>> {
        self.counts.clone()
    }
}

/// Summed wall-clock duration of timed windows, in seconds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timing {
    total: Duration,
}

impl Timing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update_window(&mut self, start: Instant, end: Instant) {
        self.total += end.saturating_duration_since(start);
    }
}

impl Metric for Timing {
    type Output = f64;

    fn reset(&mut self) {
        self.total = Duration::ZERO;
    }

    fn result(&self) -> f64 {
        self.total.as_secs_f64()
    }
}

/// Multiply-accumulate operations of one forward pass for a pattern of
/// `task`: sum of `in * out` over dense layers.
pub fn mac_metric(model: &MlpModel, task: usize) -> u64 {
    model.mac_count(task)
}

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::autograd::assign_flat_grads;
use crate::data::{Batch, Sample};
use crate::error::{Error, Result};
use crate::seed::derive_rng;
use crate::training::{batch_gradients, Plugin, StrategyState};

/// Projects `g` so that it does not increase the loss on the reference
/// gradient: when `g . g_ref < 0`, returns
/// `g - (g . g_ref / g_ref . g_ref) g_ref`; otherwise `g` unchanged.
pub fn project(g: &[f64], g_ref: &[f64]) -> Vec<f64> {
    let dot: f64 = g.iter().zip(g_ref).map(|(a, b)| a * b).sum();
    let norm: f64 = g_ref.iter().map(|b| b * b).sum();
    if dot >= 0.0 || norm == 0.0 {
        return g.to_vec();
    }
    let k = dot / norm;
    g.iter().zip(g_ref).map(|(a, b)| a - k * b).collect()
}

/// Averaged gradient episodic memory.
#[derive(Debug)]
pub struct AgemPlugin {
    patterns_per_experience: usize,
    sample_size: usize,
    memory: Vec<Sample>,
    rng: Option<ChaCha8Rng>,
}

impl AgemPlugin {
    pub fn new(patterns_per_experience: usize, sample_size: usize) -> Result<Self> {
        if patterns_per_experience == 0 || sample_size == 0 {
            return Err(Error::invalid(
                "agem patterns_per_experience and sample_size must be positive",
            ));
        }
        Ok(AgemPlugin {
            patterns_per_experience,
            sample_size,
            memory: Vec::new(),
            rng: None,
        })
    }

    pub fn memory(&self) -> &[Sample] {
        &self.memory
    }
}

impl Plugin for AgemPlugin {
    fn name(&self) -> &str {
        "agem"
    }

    fn after_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        if self.memory.is_empty() {
            return Ok(());
        }
        let rng = self
            .rng
            .get_or_insert_with(|| derive_rng(state.config.seed, "agem/draw"));
        let k = self.sample_size.min(self.memory.len());
        let picked: Vec<Sample> = index::sample(rng, self.memory.len(), k)
            .into_iter()
            .map(|i| self.memory[i].clone())
            .collect();
        let reference = batch_gradients(&state.model, &Batch::from_samples(&picked)?)?;

        let params = state.model.params();
        let mut g = Vec::new();
        let mut g_ref = Vec::new();
        for p in &params {
            g.extend_from_slice(p.grad().data());
            match reference.get(p.id()) {
                Some(r) => g_ref.extend_from_slice(r.data()),
                None => g_ref.extend(std::iter::repeat_n(0.0, p.len())),
            }
        }
        let projected = project(&g, &g_ref);
        assign_flat_grads(&mut state.model.params_mut(), &projected)
    }

    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        let Some(exp) = &state.experience else {
            return Ok(());
        };
        let mut rng = derive_rng(state.config.seed, &format!("agem/memory/{}", exp.index));
        let n = exp.len();
        let k = self.patterns_per_experience.min(n);
        for i in index::sample(&mut rng, n, k) {
            self.memory.push(exp.dataset.get(i)?);
        }
        Ok(())
    }
}

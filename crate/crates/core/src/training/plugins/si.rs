use super::{padded, param_grads, param_values, quadratic_penalty, ParamVecs};
use crate::error::{Error, Result};
use crate::training::{Plugin, StrategyState};

/// Adds `-g_i * (after_i - before_i)` to each `omega_i`.
pub fn path_integral_step(omega: &mut [f64], grad: &[f64], before: &[f64], after: &[f64]) {
    for (((w, g), b), a) in omega.iter_mut().zip(grad).zip(before).zip(after) {
        *w += -g * (a - b);
    }
}

/// `big_omega_i += omega_i / ((end_i - start_i)^2 + xi)`.
pub fn consolidate_importance(
    big_omega: &mut [f64],
    omega: &[f64],
    start: &[f64],
    end: &[f64],
    xi: f64,
) {
    for (((o, w), s), e) in big_omega.iter_mut().zip(omega).zip(start).zip(end) {
        let d = e - s;
        *o += w / (d * d + xi);
    }
}

/// Synaptic intelligence: path-integral importance weights and the penalty
/// `c * sum_j Omega_j (theta_j - theta*_j)^2`.
#[derive(Debug)]
pub struct SiPlugin {
    c: f64,
    xi: f64,
    omega: ParamVecs,
    big_omega: ParamVecs,
    anchor: ParamVecs,
    start: ParamVecs,
    before_step: ParamVecs,
}

impl SiPlugin {
    pub fn new(c: f64, xi: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!(
                "si strength c must be >= 0, got {c}"
            )));
        }
        if !(xi > 0.0) {
            return Err(Error::invalid(format!(
                "si damping xi must be > 0, got {xi}"
            )));
        }
        Ok(SiPlugin {
            c,
            xi,
            omega: ParamVecs::new(),
            big_omega: ParamVecs::new(),
            anchor: ParamVecs::new(),
            start: ParamVecs::new(),
            before_step: ParamVecs::new(),
        })
    }

    /// Consolidated importance per parameter.
    pub fn importance(&self) -> &ParamVecs {
        &self.big_omega
    }

    /// Running path integral of the current experience.
    pub fn path_integral(&self) -> &ParamVecs {
        &self.omega
    }
}

impl Plugin for SiPlugin {
    fn name(&self) -> &str {
        "si"
    }

    fn before_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        self.start = param_values(state);
        for (id, v) in &self.start {
            let w = self.omega.entry(*id).or_default();
            *w = padded(w, v.len());
        }
        Ok(())
    }

    fn before_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        if self.c == 0.0 || self.big_omega.is_empty() {
            return Ok(());
        }
        if let Some(p) = quadratic_penalty(state, &self.anchor, &self.big_omega)? {
            let term = state.tape.scale(p, self.c);
            state.add_to_loss(term)?;
        }
        Ok(())
    }

    fn after_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        self.before_step = param_values(state);
        Ok(())
    }

    fn after_update(&mut self, state: &mut StrategyState) -> Result<()> {
        let grads = param_grads(state);
        for p in state.model.params() {
            let (Some(g), Some(before)) = (grads.get(&p.id()), self.before_step.get(&p.id()))
            else {
                continue;
            };
            let w = self.omega.entry(p.id()).or_default();
            if w.len() < g.len() {
                *w = padded(w, g.len());
            }
            path_integral_step(w, g, before, p.value().data());
        }
        Ok(())
    }

    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        let end = param_values(state);
        for (id, e) in &end {
            let s = padded(self.start.get(id).map_or(&[][..], |v| v), e.len());
            let w = padded(self.omega.get(id).map_or(&[][..], |v| v), e.len());
            let o = self.big_omega.entry(*id).or_default();
            *o = padded(o, e.len());
            consolidate_importance(o, &w, &s, e, self.xi);
        }
        self.anchor = end;
        for w in self.omega.values_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(())
    }
}

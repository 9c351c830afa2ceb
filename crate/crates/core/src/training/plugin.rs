use super::{Hook, StrategyState};
use crate::error::Result;

/// Callback object attached to a strategy. Every handler defaults to a
/// no-op; handlers may change the minibatch (`before_training_iteration`),
/// the loss (`before_backward`), gradients (`after_backward`) or the
/// training data (`before_training_exp`).
#[allow(unused_variables)]
pub trait Plugin: std::fmt::Debug {
    fn name(&self) -> &str;

    fn before_training(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn before_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn before_training_epoch(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn before_training_iteration(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_forward(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn before_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_update(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_training_iteration(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_training_epoch(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_training(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn before_eval(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn before_eval_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_eval_forward(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_eval_iteration(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_eval_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
    fn after_eval(&mut self, state: &mut StrategyState) -> Result<()> {
        Ok(())
    }
}

pub(crate) fn dispatch(
    plugin: &mut dyn Plugin,
    hook: Hook,
    state: &mut StrategyState,
) -> Result<()> {
    match hook {
        Hook::BeforeTraining => plugin.before_training(state),
        Hook::BeforeTrainingExp => plugin.before_training_exp(state),
        Hook::BeforeTrainingEpoch => plugin.before_training_epoch(state),
        Hook::BeforeTrainingIteration => plugin.before_training_iteration(state),
        Hook::AfterForward => plugin.after_forward(state),
        Hook::BeforeBackward => plugin.before_backward(state),
        Hook::AfterBackward => plugin.after_backward(state),
        Hook::AfterUpdate => plugin.after_update(state),
        Hook::AfterTrainingIteration => plugin.after_training_iteration(state),
        Hook::AfterTrainingEpoch => plugin.after_training_epoch(state),
        Hook::AfterTrainingExp => plugin.after_training_exp(state),
        Hook::AfterTraining => plugin.after_training(state),
        Hook::BeforeEval => plugin.before_eval(state),
        Hook::BeforeEvalExp => plugin.before_eval_exp(state),
        Hook::AfterEvalForward => plugin.after_eval_forward(state),
        Hook::AfterEvalIteration => plugin.after_eval_iteration(state),
        Hook::AfterEvalExp => plugin.after_eval_exp(state),
        Hook::AfterEval => plugin.after_eval(state),
    }
}

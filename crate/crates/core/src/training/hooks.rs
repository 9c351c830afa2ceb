use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[serde(rename = "train")]
    Training,
    Eval,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Training => "train",
            Phase::Eval => "eval",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Points of the training and evaluation loops where plugins, metrics and
/// loggers are called.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hook {
    BeforeTraining,
    BeforeTrainingExp,
    BeforeTrainingEpoch,
    BeforeTrainingIteration,
    AfterForward,
    BeforeBackward,
    AfterBackward,
    AfterUpdate,
    AfterTrainingIteration,
    AfterTrainingEpoch,
    AfterTrainingExp,
    AfterTraining,
    BeforeEval,
    BeforeEvalExp,
    AfterEvalForward,
    AfterEvalIteration,
    AfterEvalExp,
    AfterEval,
}

impl Hook {
    pub fn name(self) -> &'static str {
        match self {
            Hook::BeforeTraining => "before_training",
            Hook::BeforeTrainingExp => "before_training_exp",
            Hook::BeforeTrainingEpoch => "before_training_epoch",
            Hook::BeforeTrainingIteration => "before_training_iteration",
            Hook::AfterForward => "after_forward",
            Hook::BeforeBackward => "before_backward",
            Hook::AfterBackward => "after_backward",
            Hook::AfterUpdate => "after_update",
            Hook::AfterTrainingIteration => "after_training_iteration",
            Hook::AfterTrainingEpoch => "after_training_epoch",
            Hook::AfterTrainingExp => "after_training_exp",
            Hook::AfterTraining => "after_training",
            Hook::BeforeEval => "before_eval",
            Hook::BeforeEvalExp => "before_eval_exp",
            Hook::AfterEvalForward => "after_eval_forward",
            Hook::AfterEvalIteration => "after_eval_iteration",
            Hook::AfterEvalExp => "after_eval_exp",
            Hook::AfterEval => "after_eval",
        }
    }
}

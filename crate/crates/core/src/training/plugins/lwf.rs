use std::collections::BTreeMap;

use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::models::{Classifier, MlpModel};
use crate::training::{Plugin, StrategyState};

/// Learning without forgetting: distills a frozen copy of the previous
/// model into the current one, over the output units the copy knew.
#[derive(Debug)]
pub struct LwfPlugin {
    alpha: f64,
    temperature: f64,
    teacher: Option<MlpModel>,
}

impl LwfPlugin {
    pub fn new(alpha: f64, temperature: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!(
                "lwf alpha must be >= 0, got {alpha}"
            )));
        }
        if !(temperature > 0.0) {
            return Err(Error::invalid(format!(
                "lwf temperature must be > 0, got {temperature}"
            )));
        }
        Ok(LwfPlugin {
            alpha,
            temperature,
            teacher: None,
        })
    }

    pub fn teacher(&self) -> Option<&MlpModel> {
        self.teacher.as_ref()
    }
}

fn gather(x: &Tensor, rows: &[usize]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(rows.len() * x.cols());
    for &r in rows {
        data.extend_from_slice(x.row(r));
    }
    Tensor::matrix(rows.len(), x.cols(), data)
}

impl Plugin for LwfPlugin {
    fn name(&self) -> &str {
        "lwf"
    }

    fn before_backward(&mut self, state: &mut StrategyState) -> Result<()> {
        let Some(teacher) = &self.teacher else {
            return Ok(());
        };
        let Some(out) = state.mb_output else {
            return Ok(());
        };
        if self.alpha == 0.0 {
            return Ok(());
        }
        let m = state.mb.len();
        // Row groups the teacher has outputs for, with the teacher's width.
        let groups: Vec<(Vec<usize>, usize)> = match teacher.classifier() {
            Classifier::Incremental(_) => vec![((0..m).collect(), teacher.output_width(0))],
            Classifier::MultiHead(_) => {
                let known = teacher.head_tasks();
                let mut by_task: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (i, &t) in state.mb.t.iter().enumerate() {
                    if known.contains(&t) {
                        by_task.entry(t).or_default().push(i);
                    }
                }
                by_task
                    .into_iter()
                    .map(|(t, rows)| (rows, teacher.output_width(t)))
                    .collect()
            }
        };
        for (rows, width) in groups {
            if rows.is_empty() || width == 0 {
                continue;
            }
            let x = gather(&state.mb.x, &rows)?;
            let tasks: Vec<usize> = rows.iter().map(|&r| state.mb.t[r]).collect();
            let teacher_logits = teacher.predict_logits(&x, &tasks)?;
            let student = if rows.len() == m {
                out
            } else {
                state.tape.gather_rows(out, &rows)?
            };
            let student = state.tape.slice_columns(student, width)?;
            let kd = state
                .tape
                .kd_divergence(student, &teacher_logits, self.temperature)?;
            let term = state
                .tape
                .scale(kd, self.alpha * rows.len() as f64 / m as f64);
            state.add_to_loss(term)?;
        }
        Ok(())
    }

    fn after_training_exp(&mut self, state: &mut StrategyState) -> Result<()> {
        self.teacher = Some(state.model.clone());
        Ok(())
    }
}

//! Built-in strategy plugins.

mod agem;
mod cumulative;
mod cwr_star;
mod ewc;
mod gdumb;
mod lwf;
mod replay;
mod si;

use std::collections::BTreeMap;

pub use agem::{project, AgemPlugin};
pub use cumulative::CumulativePlugin;
pub use cwr_star::{ConsolidatedUnit, CwrStarPlugin};
pub use ewc::{EwcMode, EwcPlugin};
pub use gdumb::GDumbPlugin;
pub use lwf::LwfPlugin;
pub use replay::ReplayPlugin;
pub use si::{consolidate_importance, path_integral_step, SiPlugin};

use crate::autograd::{ParamId, Var};
use crate::error::Result;
use crate::training::StrategyState;

/// Per-parameter flat vectors keyed by parameter id.
pub(crate) type ParamVecs = BTreeMap<ParamId, Vec<f64>>;

pub(crate) fn param_values(state: &StrategyState) -> ParamVecs {
    state
        .model
        .params()
        .into_iter()
        .map(|p| (p.id(), p.value().data().to_vec()))
        .collect()
}

pub(crate) fn param_grads(state: &StrategyState) -> ParamVecs {
    state
        .model
        .params()
        .into_iter()
        .map(|p| (p.id(), p.grad().data().to_vec()))
        .collect()
}

/// `sum_p sum_i weights[p][i] * (theta[p][i] - anchor[p][i])^2` on the
/// current tape, over parameters present in both maps. Returns `None` when
/// no parameter is anchored.
pub(crate) fn quadratic_penalty(
    state: &mut StrategyState,
    anchor: &ParamVecs,
    weights: &ParamVecs,
) -> Result<Option<Var>> {
    let mut total: Option<Var> = None;
    for p in state.model.params() {
        let (Some(a), Some(w)) = (anchor.get(&p.id()), weights.get(&p.id())) else {
            continue;
        };
        let v = state.tape.param(p);
        let term = state.tape.weighted_sq_dist(v, a, w)?;
        total = Some(match total {
            Some(t) => state.tape.add(t, term)?,
            None => term,
        });
    }
    Ok(total)
}

/// Zero-extends `v` to `len` entries.
pub(crate) fn padded(v: &[f64], len: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    if out.len() < len {
        out.resize(len, 0.0);
    }
    out
}

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Identifier of a trainable parameter, unique within a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub u32);

/// Trainable tensor with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    id: ParamId,
    value: Tensor,
    grad: Tensor,
}

impl Parameter {
    pub fn new(id: ParamId, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter { id, value, grad }
    }

    pub fn id(&self) -> ParamId {
        self.id
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut Tensor {
        &mut self.grad
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }

    /// Adds `delta` into the gradient buffer.
    pub fn accumulate_grad(&mut self, delta: &Tensor) -> Result<()> {
        if delta.shape() != self.grad.shape() {
            return Err(Error::Shape {
                op: "accumulate_grad",
                lhs: self.grad.shape().to_vec(),
                rhs: delta.shape().to_vec(),
            });
        }
        for (g, d) in self.grad.data_mut().iter_mut().zip(delta.data()) {
            *g += d;
        }
        Ok(())
    }

    /// Appends zero rows to value and gradient.
    pub fn grow_rows(&mut self, rows: usize) {
        self.value.grow_rows(rows);
        self.grad.grow_rows(rows);
    }
}

fn sorted_order(ids: impl Iterator<Item = ParamId>) -> Vec<usize> {
    let mut order: Vec<(ParamId, usize)> = ids.enumerate().map(|(i, id)| (id, i)).collect();
    order.sort();
    order.into_iter().map(|(_, i)| i).collect()
}

/// Concatenates all gradients in ascending parameter-id order.
pub fn flat_grads(params: &[&Parameter]) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.iter().map(|p| p.len()).sum());
    for i in sorted_order(params.iter().map(|p| p.id)) {
        out.extend_from_slice(params[i].grad.data());
    }
    out
}

/// Exact inverse of [`flat_grads`].
pub fn assign_flat_grads(params: &mut [&mut Parameter], flat: &[f64]) -> Result<()> {
    let total: usize = params.iter().map(|p| p.len()).sum();
    if total != flat.len() {
        return Err(Error::Length {
            expected: total,
            actual: flat.len(),
        });
    }
    let mut offset = 0;
    for i in sorted_order(params.iter().map(|p| p.id)) {
        let n = params[i].len();
        params[i]
            .grad
            .data_mut()
            .copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
    Ok(())
}

/// Concatenates all values in ascending parameter-id order.
pub fn flat_values(params: &[&Parameter]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in sorted_order(params.iter().map(|p| p.id)) {
        out.extend_from_slice(params[i].value.data());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_order_follows_ids() {
        let mut a = Parameter::new(ParamId(1), Tensor::zeros(&[2]));
        let mut b = Parameter::new(ParamId(0), Tensor::zeros(&[3]));
        a.accumulate_grad(&Tensor::vector(vec![4.0, 5.0])).unwrap();
        b.accumulate_grad(&Tensor::vector(vec![1.0, 2.0, 3.0]))
            .unwrap();
        let flat = flat_grads(&[&a, &b]);
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn assign_rejects_wrong_length() {
        let mut a = Parameter::new(ParamId(0), Tensor::zeros(&[2]));
        assert!(matches!(
            assign_flat_grads(&mut [&mut a], &[1.0]),
            Err(Error::Length {
                expected: 2,
                actual: 1
            })
        ));
    }

    proptest! {
        #[test]
        fn flat_round_trip_is_bitwise(
            sizes in prop::collection::vec(1usize..6, 1..5),
            seed in any::<u64>(),
        ) {
            let mut params: Vec<Parameter> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let vals = (0..n).map(|j| ((seed ^ (i * 31 + j) as u64) as f64).sin()).collect();
                    let mut p = Parameter::new(ParamId((sizes.len() - i) as u32), Tensor::zeros(&[n]));
                    p.accumulate_grad(&Tensor::vector(vals)).unwrap();
                    p
                })
                .collect();
            let before: Vec<Vec<u64>> = params.iter().map(|p| p.grad().data().iter().map(|v| v.to_bits()).collect()).collect();
            let flat = flat_grads(&params.iter().collect::<Vec<_>>());
            let mut refs: Vec<&mut Parameter> = params.iter_mut().collect();
            assign_flat_grads(&mut refs, &flat).unwrap();
            let after: Vec<Vec<u64>> = params.iter().map(|p| p.grad().data().iter().map(|v| v.to_bits()).collect()).collect();
            prop_assert_eq!(before, after);
        }
    }
}

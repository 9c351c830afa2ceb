//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] is built fresh for every forward pass. Each primitive appends a
//! node holding its output value; [`Tape::backward`] walks the nodes in
//! reverse and returns the gradients of every parameter leaf. All reductions
//! run in a fixed sequential order, so results are bitwise reproducible.

use std::collections::BTreeMap;

use super::tensor::{log_softmax_rows, matmul_raw, transpose_raw};
use super::{ParamId, Parameter, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Relu(Var),
    Add(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        log_probs: Vec<f64>,
    },
    KdDivergence {
        student: Var,
        teacher_probs: Vec<f64>,
        student_log_probs: Vec<f64>,
        temperature: f64,
    },
    WeightedSqDist {
        input: Var,
        anchor: Vec<f64>,
        weights: Vec<f64>,
    },
    GatherRows {
        input: Var,
        rows: Vec<usize>,
    },
    SliceColumns {
        input: Var,
        n: usize,
    },
    AssembleRows {
        parts: Vec<(Var, Vec<usize>)>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients of parameter leaves, keyed by parameter id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients(BTreeMap<ParamId, Tensor>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.0.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Tensor)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adds every gradient into the matching parameter's buffer.
    pub fn accumulate_into<'a>(
        &self,
        params: impl IntoIterator<Item = &'a mut Parameter>,
    ) -> Result<()> {
        for p in params {
            if let Some(g) = self.0.get(&p.id()) {
                p.accumulate_grad(g)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: BTreeMap<ParamId, Var>,
    leaf_ids: BTreeMap<usize, ParamId>,
}

fn shape_err(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    }
}

fn check_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::Shape {
            op,
            lhs: t.shape().to_vec(),
            rhs: vec![0, 0],
        });
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant input that does not receive gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf for a trainable parameter. The same parameter always maps to the
    /// same leaf within one tape.
    pub fn param(&mut self, p: &Parameter) -> Var {
        if let Some(&v) = self.leaves.get(&p.id()) {
            return v;
        }
        let v = self.push(p.value().clone(), Op::Leaf, true);
        self.leaves.insert(p.id(), v);
        self.leaf_ids.insert(v.0, p.id());
        v
    }

    /// Leaf already registered for `id`, if any.
    pub fn param_var(&self, id: ParamId) -> Option<Var> {
        self.leaves.get(&id).copied()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        check_matrix("matmul", av)?;
        check_matrix("matmul", bv)?;
        let (m, k, k2, n) = (av.shape()[0], av.shape()[1], bv.shape()[0], bv.shape()[1]);
        if k != k2 {
            return Err(shape_err("matmul", av, bv));
        }
        let out = Tensor::matrix(m, n, matmul_raw(av.data(), bv.data(), m, k, n))?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(out, Op::Matmul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        check_matrix("transpose", av)?;
        let (r, c) = (av.shape()[0], av.shape()[1]);
        let out = Tensor::matrix(c, r, transpose_raw(av.data(), r, c))?;
        let rg = self.requires_grad(a);
        Ok(self.push(out, Op::Transpose(a), rg))
    }

    /// Adds the vector `b` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        check_matrix("add_bias", xv)?;
        let (m, n) = (xv.shape()[0], xv.shape()[1]);
        if bv.shape() != [n] {
            return Err(shape_err("add_bias", xv, bv));
        }
        let mut data = xv.data().to_vec();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += bv.data()[j];
            }
        }
        let out = Tensor::matrix(m, n, data)?;
        let rg = self.requires_grad(x) || self.requires_grad(b);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let data = xv
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { 0.0 })
            .collect();
        let out = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let rg = self.requires_grad(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|x| x * factor).collect();
        let out = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.requires_grad(a);
        self.push(out, Op::Scale(a, factor), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let mut acc = 0.0;
        for v in self.value(a).data() {
            acc += v;
        }
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(acc), Op::Sum(a), rg)
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        check_matrix("cross_entropy", lv)?;
        let (m, c) = (lv.shape()[0], lv.shape()[1]);
        if targets.len() != m {
            return Err(Error::Length {
                expected: m,
                actual: targets.len(),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(Error::Index {
                what: "target class",
                index: bad,
                bound: c,
            });
        }
        let log_probs = log_softmax_rows(lv.data(), m, c, 1.0);
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            total -= log_probs[i * c + t];
        }
        let loss = if m == 0 { 0.0 } else { total / m as f64 };
        let rg = self.requires_grad(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                log_probs,
            },
            rg,
        ))
    }

    /// Distillation loss: mean over rows of
    /// `KL(softmax(teacher/T) || softmax(student/T)) * T^2`.
    /// The teacher is treated as a constant.
    pub fn kd_divergence(
        &mut self,
        student: Var,
        teacher: &Tensor,
        temperature: f64,
    ) -> Result<Var> {
        if !(temperature > 0.0) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let sv = self.value(student);
        check_matrix("kd_divergence", sv)?;
        if sv.shape() != teacher.shape() {
            return Err(shape_err("kd_divergence", sv, teacher));
        }
        let (m, c) = (sv.shape()[0], sv.shape()[1]);
        let student_log_probs = log_softmax_rows(sv.data(), m, c, temperature);
        let teacher_log_probs = log_softmax_rows(teacher.data(), m, c, temperature);
        let teacher_probs: Vec<f64> = teacher_log_probs.iter().map(|l| l.exp()).collect();
        let mut total = 0.0;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..c {
                let k = i * c + j;
                if teacher_probs[k] > 0.0 {
                    row += teacher_probs[k] * (teacher_log_probs[k] - student_log_probs[k]);
                }
            }
            total += row;
        }
        let loss = if m == 0 {
            0.0
        } else {
            total / m as f64 * temperature * temperature
        };
        let rg = self.requires_grad(student);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::KdDivergence {
                student,
                teacher_probs,
                student_log_probs,
                temperature,
            },
            rg,
        ))
    }

    /// `sum_i weights[i] * (x[i] - anchor[i])^2` over the first
    /// `anchor.len()` elements of `x` (row-major). Elements beyond the anchor
    /// are not penalized, which covers parameters that grew since the
    /// anchor was taken.
    pub fn weighted_sq_dist(&mut self, x: Var, anchor: &[f64], weights: &[f64]) -> Result<Var> {
        let xv = self.value(x);
        if anchor.len() != weights.len() || anchor.len() > xv.len() {
            return Err(Error::Length {
                expected: xv.len().min(anchor.len()),
                actual: weights.len().max(anchor.len()),
            });
        }
        let mut acc = 0.0;
        for ((v, a), w) in xv.data().iter().zip(anchor).zip(weights) {
            let d = v - a;
            acc += w * d * d;
        }
        let rg = self.requires_grad(x);
        Ok(self.push(
            Tensor::scalar(acc),
            Op::WeightedSqDist {
                input: x,
                anchor: anchor.to_vec(),
                weights: weights.to_vec(),
            },
            rg,
        ))
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        check_matrix("gather_rows", xv)?;
        let (m, c) = (xv.shape()[0], xv.shape()[1]);
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            if r >= m {
                return Err(Error::Index {
                    what: "row",
                    index: r,
                    bound: m,
                });
            }
            data.extend_from_slice(xv.row(r));
        }
        let out = Tensor::matrix(rows.len(), c, data)?;
        let rg = self.requires_grad(x);
        Ok(self.push(
            out,
            Op::GatherRows {
                input: x,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// Keeps the first `n` columns.
    pub fn slice_columns(&mut self, x: Var, n: usize) -> Result<Var> {
        let xv = self.value(x);
        check_matrix("slice_columns", xv)?;
        let (m, c) = (xv.shape()[0], xv.shape()[1]);
        if n > c {
            return Err(Error::Index {
                what: "column",
                index: n,
                bound: c,
            });
        }
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            data.extend_from_slice(&xv.row(i)[..n]);
        }
        let out = Tensor::matrix(m, n, data)?;
        let rg = self.requires_grad(x);
        Ok(self.push(out, Op::SliceColumns { input: x, n }, rg))
    }

    /// Scatters the rows of each part into an `rows x width` matrix. Part `k`
    /// row `i` lands at output row `parts[k].1[i]`; columns beyond a part's
    /// width and rows no part covers hold `pad`.
    pub fn assemble_rows(
        &mut self,
        parts: Vec<(Var, Vec<usize>)>,
        rows: usize,
        width: usize,
        pad: f64,
    ) -> Result<Var> {
        let mut data = vec![pad; rows * width];
        let mut rg = false;
        for (v, idx) in &parts {
            let pv = self.value(*v);
            check_matrix("assemble_rows", pv)?;
            let (pm, pc) = (pv.shape()[0], pv.shape()[1]);
            if pm != idx.len() || pc > width {
                return Err(Error::Shape {
                    op: "assemble_rows",
                    lhs: pv.shape().to_vec(),
                    rhs: vec![idx.len(), width],
                });
            }
            for (i, &r) in idx.iter().enumerate() {
                if r >= rows {
                    return Err(Error::Index {
                        what: "row",
                        index: r,
                        bound: rows,
                    });
                }
                data[r * width..r * width + pc].copy_from_slice(pv.row(i));
            }
            rg |= self.requires_grad(*v);
        }
        let out = Tensor::matrix(rows, width, data)?;
        Ok(self.push(out, Op::AssembleRows { parts }, rg))
    }

    /// Reverse-mode pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::Rank {
                op: "backward",
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let mut out = BTreeMap::new();
        for (&node, &id) in &self.leaf_ids {
            if node > loss.0 {
                continue;
            }
            if let Some(g) = grads[node].take() {
                let shape = self.nodes[node].value.shape().to_vec();
                out.insert(id, Tensor::new(shape, g)?);
            }
        }
        Ok(Gradients(out))
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contribution: Vec<f64>) {
        if !self.requires_grad(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contribution) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.requires_grad(*a) {
                    let bt = transpose_raw(bv.data(), k, n);
                    self.accumulate(grads, *a, matmul_raw(g, &bt, m, n, k));
                }
                if self.requires_grad(*b) {
                    let at = transpose_raw(av.data(), m, k);
                    self.accumulate(grads, *b, matmul_raw(&at, g, k, m, n));
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (out.shape()[0], out.shape()[1]);
                self.accumulate(grads, *a, transpose_raw(g, r, c));
            }
            Op::AddBias(x, b) => {
                let (m, n) = (out.shape()[0], out.shape()[1]);
                self.accumulate(grads, *x, g.to_vec());
                if self.requires_grad(*b) {
                    let mut db = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            db[j] += g[i * n + j];
                        }
                    }
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let dx = xv
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| if v > 0.0 { gi } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, dx);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Scale(a, f) => {
                self.accumulate(grads, *a, g.iter().map(|v| v * f).collect());
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, vec![g[0]; n]);
            }
            Op::CrossEntropy {
                logits,
                targets,
                log_probs,
            } => {
                let lv = self.value(*logits);
                let (m, c) = (lv.shape()[0], lv.shape()[1]);
                let scale = if m == 0 { 0.0 } else { g[0] / m as f64 };
                let mut d: Vec<f64> = log_probs.iter().map(|l| l.exp() * scale).collect();
                for (i, &t) in targets.iter().enumerate() {
                    d[i * c + t] -= scale;
                }
                self.accumulate(grads, *logits, d);
            }
            Op::KdDivergence {
                student,
                teacher_probs,
                student_log_probs,
                temperature,
            } => {
                let m = self.value(*student).rows();
                let scale = if m == 0 {
                    0.0
                } else {
                    g[0] * temperature / m as f64
                };
                let d = student_log_probs
                    .iter()
                    .zip(teacher_probs)
                    .map(|(ls, pt)| (ls.exp() - pt) * scale)
                    .collect();
                self.accumulate(grads, *student, d);
            }
            Op::WeightedSqDist {
                input,
                anchor,
                weights,
            } => {
                let xv = self.value(*input);
                let mut d = vec![0.0; xv.len()];
                for (i, (a, w)) in anchor.iter().zip(weights).enumerate() {
                    d[i] = 2.0 * w * (xv.data()[i] - a) * g[0];
                }
                self.accumulate(grads, *input, d);
            }
            Op::GatherRows { input, rows } => {
                let xv = self.value(*input);
                let c = xv.cols();
                let mut d = vec![0.0; xv.len()];
                for (i, &r) in rows.iter().enumerate() {
                    for j in 0..c {
                        d[r * c + j] += g[i * c + j];
                    }
                }
                self.accumulate(grads, *input, d);
            }
            Op::SliceColumns { input, n } => {
                let xv = self.value(*input);
                let (m, c) = (xv.shape()[0], xv.shape()[1]);
                let mut d = vec![0.0; m * c];
                for i in 0..m {
                    d[i * c..i * c + n].copy_from_slice(&g[i * n..(i + 1) * n]);
                }
                self.accumulate(grads, *input, d);
            }
            Op::AssembleRows { parts } => {
                let width = out.shape()[1];
                for (v, idx) in parts {
                    if !self.requires_grad(*v) {
                        continue;
                    }
                    let pc = self.value(*v).shape()[1];
                    let mut d = Vec::with_capacity(idx.len() * pc);
                    for &r in idx {
                        d.extend_from_slice(&g[r * width..r * width + pc]);
                    }
                    self.accumulate(grads, *v, d);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::ParamId;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_cases() {
        let mut tape = Tape::new();
        let a = tape.constant(m(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let i = tape.constant(Tensor::identity(2));
        let c = tape.matmul(a, i).unwrap();
        assert_eq!(tape.value(c), &m(&[vec![1.0, 2.0], vec![3.0, 4.0]]));

        let col = tape.constant(m(&[vec![5.0], vec![7.0]]));
        let c = tape.matmul(i, col).unwrap();
        assert_eq!(tape.value(c).data(), &[5.0, 7.0]);
    }

    #[test]
    fn matmul_reports_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        match tape.matmul(a, b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn relu_and_bias_forward() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![-1.0, 0.0, 2.0]]).unwrap());
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

        let z = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = tape.add_bias(z, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);

        let bad = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.add_bias(z, bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn relu_subgradient_is_zero_at_and_below_zero() {
        let p = Parameter::new(ParamId(0), Tensor::vector(vec![-1.0, 2.0, 0.0]));
        let mut tape = Tape::new();
        let x = tape.param(&p);
        let r = tape.relu(x);
        let s = tape.sum(r);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn cross_entropy_uniform_and_stable() {
        let mut tape = Tape::new();
        let u = tape.constant(Tensor::zeros(&[3, 10]));
        let l = tape.cross_entropy(u, &[0, 4, 9]).unwrap();
        assert!((tape.value(l).item().unwrap() - 10f64.ln()).abs() < 1e-15);

        let big = tape.constant(m(&[vec![1000.0, 0.0]]));
        let l = tape.cross_entropy(big, &[0]).unwrap();
        let v = tape.value(l).item().unwrap();
        assert!(v.is_finite() && v.abs() < 1e-12);

        assert!(matches!(
            tape.cross_entropy(big, &[2]),
            Err(Error::Index {
                index: 2,
                bound: 2,
                ..
            })
        ));
    }

    #[test]
    fn kd_of_identical_logits_is_zero() {
        let mut tape = Tape::new();
        let logits = m(&[vec![0.3, -1.2, 2.0], vec![0.0, 0.0, 0.0]]);
        let s = tape.constant(logits.clone());
        let l = tape.kd_divergence(s, &logits, 2.0).unwrap();
        assert!(tape.value(l).item().unwrap().abs() < 1e-15);

        let z = tape.constant(Tensor::zeros(&[1, 2]));
        let l = tape.kd_divergence(z, &Tensor::zeros(&[1, 2]), 1.0).unwrap();
        assert_eq!(tape.value(l).item().unwrap(), 0.0);

        assert!(tape.kd_divergence(z, &Tensor::zeros(&[1, 3]), 1.0).is_err());
    }

    #[test]
    fn backward_analytic_cases() {
        let p = Parameter::new(ParamId(3), m(&[vec![1.0, -2.0], vec![0.5, 4.0]]));
        let mut tape = Tape::new();
        let v = tape.param(&p);
        let s = tape.sum(v);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(ParamId(3)).unwrap().data(), &[1.0; 4]);

        let mut tape = Tape::new();
        let v = tape.param(&p);
        let sq = tape.weighted_sq_dist(v, &[0.0; 4], &[1.0; 4]).unwrap();
        let half = tape.scale(sq, 0.5);
        let g = tape.backward(half).unwrap();
        assert_eq!(g.get(ParamId(3)).unwrap(), p.value());
    }

    #[test]
    fn backward_requires_scalar() {
        let p = Parameter::new(ParamId(0), Tensor::zeros(&[2]));
        let mut tape = Tape::new();
        let v = tape.param(&p);
        assert!(matches!(tape.backward(v), Err(Error::Rank { .. })));
    }

    #[test]
    fn param_leaf_is_shared() {
        let p = Parameter::new(ParamId(0), Tensor::vector(vec![2.0]));
        let mut tape = Tape::new();
        let a = tape.param(&p);
        let b = tape.param(&p);
        assert_eq!(a, b);
        let s = tape.add(a, b).unwrap();
        let s = tape.sum(s);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[2.0]);
    }

    #[test]
    fn gather_slice_assemble_route_gradients() {
        let p = Parameter::new(
            ParamId(0),
            m(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]),
        );
        let mut tape = Tape::new();
        let v = tape.param(&p);
        let g2 = tape.gather_rows(v, &[2, 0, 2]).unwrap();
        assert_eq!(tape.value(g2).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let s1 = tape.slice_columns(g2, 1).unwrap();
        assert_eq!(tape.value(s1).data(), &[5.0, 1.0, 5.0]);
        let asm = tape
            .assemble_rows(vec![(s1, vec![0, 1, 3])], 4, 2, -7.0)
            .unwrap();
        assert_eq!(
            tape.value(asm).data(),
            &[5.0, -7.0, 1.0, -7.0, -7.0, -7.0, 5.0, -7.0]
        );
        let s = tape.sum(asm);
        let g = tape.backward(s).unwrap();
        assert_eq!(
            g.get(ParamId(0)).unwrap().data(),
            &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]
        );
    }
}

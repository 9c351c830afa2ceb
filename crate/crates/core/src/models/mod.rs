//! Feed-forward model builders with class-incremental and multi-head
//! output layers.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{ParamId, Parameter, Tape, Tensor, Var};
use crate::benchmarks::Experience;
use crate::error::{Error, Result};
use crate::seed::derive_rng;

/// Logit value for units that do not exist for a row's head.
pub const MASKED_LOGIT: f64 = -1e30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// One output layer that grows as new classes appear.
    Incremental,
    /// One independent output layer per task label.
    MultiHead,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub n_initial_classes: usize,
    pub head: HeadKind,
    pub init_seed: u64,
}

/// Dense layer `y = x W^T + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    fn init(
        ids: (ParamId, ParamId),
        fan_in: usize,
        fan_out: usize,
        seed: u64,
        label: &str,
    ) -> Self {
        Dense {
            weight: Parameter::new(ids.0, uniform_weights(fan_in, fan_out, seed, label)),
            bias: Parameter::new(ids.1, Tensor::zeros(&[fan_out])),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.value().shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.value().shape()[0]
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let wt = tape.transpose(w)?;
        let z = tape.matmul(x, wt)?;
        let b = tape.param(&self.bias);
        tape.add_bias(z, b)
    }

    /// Appends zero-initialized output units.
    pub fn grow_outputs(&mut self, out: usize) {
        self.weight.grow_rows(out);
        self.bias.grow_rows(out);
    }

    fn params(&self) -> [&Parameter; 2] {
        [&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

fn uniform_weights(fan_in: usize, fan_out: usize, seed: u64, label: &str) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut rng = derive_rng(seed, label);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::matrix(fan_out, fan_in, data).expect("sized by construction")
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncrementalClassifier {
    pub layer: Dense,
}

impl IncrementalClassifier {
    pub fn active_units(&self) -> usize {
        self.layer.out_features()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiHeadClassifier {
    heads: BTreeMap<usize, (Dense, usize)>,
}

impl MultiHeadClassifier {
    pub fn head(&self, task: usize) -> Option<&Dense> {
        self.heads.get(&task).map(|(d, _)| d)
    }

    pub fn tasks(&self) -> impl Iterator<Item = usize> + '_ {
        self.heads.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier {
    Incremental(IncrementalClassifier),
    MultiHead(MultiHeadClassifier),
}

/// Multi-layer perceptron with ReLU between hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    config: MlpConfig,
    hidden: Vec<Dense>,
    classifier: Classifier,
    next_id: u32,
}

fn head_label(task: usize) -> String {
    format!("init/head/{task}")
}

/// Flat parameter values keyed by parameter id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub params: BTreeMap<u32, SnapshotEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl MlpModel {
    /// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn from
    /// `init_seed`; biases zero.
    pub fn build(config: MlpConfig) -> Result<Self> {
        if config.input_dim == 0
            || config.n_initial_classes == 0
            || config.hidden_sizes.contains(&0)
        {
            return Err(Error::invalid(
                "model dimensions (input, hidden sizes, initial classes) must be positive",
            ));
        }
        let mut next_id = 0u32;
        let mut ids = || {
            next_id += 2;
            (ParamId(next_id - 2), ParamId(next_id - 1))
        };
        let mut hidden = Vec::with_capacity(config.hidden_sizes.len());
        let mut fan_in = config.input_dim;
        for (k, &h) in config.hidden_sizes.iter().enumerate() {
            hidden.push(Dense::init(
                ids(),
                fan_in,
                h,
                config.init_seed,
                &format!("init/layer/{k}"),
            ));
            fan_in = h;
        }
        let classifier = match config.head {
            HeadKind::Incremental => Classifier::Incremental(IncrementalClassifier {
                layer: Dense::init(
                    ids(),
                    fan_in,
                    config.n_initial_classes,
                    config.init_seed,
                    "init/classifier",
                ),
            }),
            HeadKind::MultiHead => {
                let head = Dense::init(
                    ids(),
                    fan_in,
                    config.n_initial_classes,
                    config.init_seed,
                    &head_label(0),
                );
                Classifier::MultiHead(MultiHeadClassifier {
                    heads: BTreeMap::from([(0, (head, config.n_initial_classes))]),
                })
            }
        };
        Ok(MlpModel {
            config,
            hidden,
            classifier,
            next_id,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn hidden_layers(&self) -> &[Dense] {
        &self.hidden
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    /// The growing output layer, when the model has one.
    pub fn incremental_layer_mut(&mut self) -> Option<&mut Dense> {
        match &mut self.classifier {
            Classifier::Incremental(c) => Some(&mut c.layer),
            Classifier::MultiHead(_) => None,
        }
    }

    fn classifier_in(&self) -> usize {
        self.hidden
            .last()
            .map_or(self.config.input_dim, Dense::out_features)
    }

    /// Output width for a row of task `task`.
    pub fn output_width(&self, task: usize) -> usize {
        match &self.classifier {
            Classifier::Incremental(c) => c.active_units(),
            Classifier::MultiHead(m) => m.head(task).map_or(0, Dense::out_features),
        }
    }

    /// Parameters in ascending id order.
    pub fn params(&self) -> Vec<&Parameter> {
        let mut out: Vec<&Parameter> = self.hidden.iter().flat_map(Dense::params).collect();
        match &self.classifier {
            Classifier::Incremental(c) => out.extend(c.layer.params()),
            Classifier::MultiHead(m) => out.extend(m.heads.values().flat_map(|(d, _)| d.params())),
        }
        out.sort_by_key(|p| p.id());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out: Vec<&mut Parameter> =
            self.hidden.iter_mut().flat_map(Dense::params_mut).collect();
        match &mut self.classifier {
            Classifier::Incremental(c) => out.extend(c.layer.params_mut()),
            Classifier::MultiHead(m) => {
                out.extend(m.heads.values_mut().flat_map(|(d, _)| d.params_mut()))
            }
        }
        out.sort_by_key(|p| p.id());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Hidden representation followed by the classifier. Rows of a
    /// multi-head model are grouped by task; narrower heads are padded with
    /// [`MASKED_LOGIT`], and rows whose task has no head get a single zero
    /// logit.
    pub fn forward(&self, tape: &mut Tape, x: &Tensor, tasks: &[usize]) -> Result<Var> {
        if x.shape().len() != 2 || x.shape()[1] != self.config.input_dim {
            return Err(Error::Shape {
                op: "model forward",
                lhs: x.shape().to_vec(),
                rhs: vec![x.rows(), self.config.input_dim],
            });
        }
        let m = x.rows();
        let mut h = tape.constant(x.clone());
        for layer in &self.hidden {
            let z = layer.forward(tape, h)?;
            h = tape.relu(z);
        }
        match &self.classifier {
            Classifier::Incremental(c) => c.layer.forward(tape, h),
            Classifier::MultiHead(heads) => {
                if tasks.len() != m {
                    return Err(Error::Length {
                        expected: m,
                        actual: tasks.len(),
                    });
                }
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (i, &t) in tasks.iter().enumerate() {
                    groups.entry(t).or_default().push(i);
                }
                if groups.len() == 1 {
                    let t = tasks[0];
                    if let Some(head) = heads.head(t) {
                        return head.forward(tape, h);
                    }
                }
                let mut parts = Vec::with_capacity(groups.len());
                let mut width = 1;
                for (t, rows) in groups {
                    let part = match heads.head(t) {
                        Some(head) => {
                            let hg = tape.gather_rows(h, &rows)?;
                            head.forward(tape, hg)?
                        }
                        None => tape.constant(Tensor::zeros(&[rows.len(), 1])),
                    };
                    width = width.max(tape.value(part).cols());
                    parts.push((part, rows));
                }
                tape.assemble_rows(parts, m, width, MASKED_LOGIT)
            }
        }
    }

    /// Forward pass on a throwaway tape.
    pub fn predict_logits(&self, x: &Tensor, tasks: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, x, tasks)?;
        Ok(tape.value(out).clone())
    }

    /// Grows the classifier for the classes of `exp`. Existing weights are
    /// never modified; new incremental units start at zero, new heads are
    /// freshly initialized from the init seed.
    pub fn adapt_to_experience(&mut self, exp: &Experience) -> Result<()> {
        let ds = exp.dataset.as_ref();
        match &mut self.classifier {
            Classifier::Incremental(c) => {
                if let Some(&max) = exp.classes_in_this_experience.last() {
                    c.layer.grow_outputs(max + 1);
                }
            }
            Classifier::MultiHead(heads) => {
                let mut per_task: BTreeMap<usize, usize> = BTreeMap::new();
                for i in 0..ds.len() {
                    let (t, y) = (ds.task_label(i)?, ds.target(i)?);
                    let w = per_task.entry(t).or_insert(0);
                    *w = (*w).max(y + 1);
                }
                let fan_in = self
                    .hidden
                    .last()
                    .map_or(self.config.input_dim, Dense::out_features);
                for (t, width) in per_task {
                    match heads.heads.get_mut(&t) {
                        Some((head, _)) => head.grow_outputs(width),
                        None => {
                            let ids = (ParamId(self.next_id), ParamId(self.next_id + 1));
                            self.next_id += 2;
                            let head = Dense::init(
                                ids,
                                fan_in,
                                width,
                                self.config.init_seed,
                                &head_label(t),
                            );
                            heads.heads.insert(t, (head, width));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Restores every parameter to its freshly built value, keeping the
    /// current output widths (grown units back to zero) and parameter ids.
    pub fn reset_parameters(&mut self) {
        let seed = self.config.init_seed;
        let mut fan_in = self.config.input_dim;
        for (k, layer) in self.hidden.iter_mut().enumerate() {
            let out = layer.out_features();
            *layer.weight.value_mut() =
                uniform_weights(fan_in, out, seed, &format!("init/layer/{k}"));
            *layer.bias.value_mut() = Tensor::zeros(&[out]);
            fan_in = out;
        }
        let reinit = |layer: &mut Dense, initial: usize, label: &str| {
            let width = layer.out_features();
            let mut w = uniform_weights(fan_in, initial, seed, label);
            w.grow_rows(width);
            *layer.weight.value_mut() = w;
            *layer.bias.value_mut() = Tensor::zeros(&[width]);
        };
        match &mut self.classifier {
            Classifier::Incremental(c) => reinit(
                &mut c.layer,
                self.config.n_initial_classes,
                "init/classifier",
            ),
            Classifier::MultiHead(m) => {
                for (t, (head, created)) in m.heads.iter_mut() {
                    reinit(head, *created, &head_label(*t));
                }
            }
        }
        self.zero_grad();
    }

    /// Dense multiply-accumulate count of one forward pass for a row of
    /// `task` (biases and activations excluded).
    pub fn mac_count(&self, task: usize) -> u64 {
        let hidden: u64 = self
            .hidden
            .iter()
            .map(|l| (l.in_features() * l.out_features()) as u64)
            .sum();
        hidden + (self.classifier_in() * self.output_width(task)) as u64
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            params: self
                .params()
                .into_iter()
                .map(|p| {
                    (
                        p.id().0,
                        SnapshotEntry {
                            shape: p.value().shape().to_vec(),
                            values: p.value().data().to_vec(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Task labels with a dedicated head (empty for single-head models).
    pub fn head_tasks(&self) -> BTreeSet<usize> {
        match &self.classifier {
            Classifier::Incremental(_) => BTreeSet::new(),
            Classifier::MultiHead(m) => m.tasks().collect(),
        }
    }
}

/// Convenience wrapper over [`MlpModel::build`].
pub fn build_mlp(
    input_dim: usize,
    hidden_sizes: &[usize],
    n_initial_classes: usize,
    head: HeadKind,
    init_seed: u64,
) -> Result<MlpModel> {
    MlpModel::build(MlpConfig {
        input_dim,
        hidden_sizes: hidden_sizes.to_vec(),
        n_initial_classes,
        head,
        init_seed,
    })
}

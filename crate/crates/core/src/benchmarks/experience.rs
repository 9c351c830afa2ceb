use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Index, Range};

use serde::{Deserialize, Serialize};

use crate::data::{classes_of, task_labels_of, DatasetRef};
use crate::error::Result;

pub const TRAIN_STREAM: &str = "train";
pub const TEST_STREAM: &str = "test";

/// One element of a stream: a dataset view plus task labels and position
/// metadata.
#[derive(Clone, Debug)]
pub struct Experience {
    pub dataset: DatasetRef,
    pub index: usize,
    pub origin_stream: String,
    pub task_labels: BTreeSet<usize>,
    pub classes_in_this_experience: BTreeSet<usize>,
    /// Union of classes up to and including this experience; only filled on
    /// the train stream.
    pub classes_seen_so_far: BTreeSet<usize>,
    /// Indices into the source dataset, when the experience is a plain view
    /// of it.
    pub source_indices: Option<Vec<usize>>,
}

impl Experience {
    /// Reads class and task metadata from `dataset` (no payloads).
    pub fn new(dataset: DatasetRef, index: usize, origin_stream: &str) -> Result<Self> {
        let classes = classes_of(dataset.as_ref())?;
        let tasks = task_labels_of(dataset.as_ref())?;
        Ok(Experience {
            dataset,
            index,
            origin_stream: origin_stream.to_string(),
            task_labels: tasks,
            classes_in_this_experience: classes,
            classes_seen_so_far: BTreeSet::new(),
            source_indices: None,
        })
    }

    pub fn with_source_indices(mut self, indices: Vec<usize>) -> Self {
        self.source_indices = Some(indices);
        self
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    /// Smallest task label, used where a single label is needed.
    pub fn task_label(&self) -> usize {
        self.task_labels.first().copied().unwrap_or(0)
    }
}

/// Ordered, indexable sequence of experiences.
#[derive(Clone, Debug)]
pub struct Stream {
    pub name: String,
    experiences: Vec<Experience>,
}

impl Stream {
    /// Re-indexes the experiences by position and, for the train stream,
    /// fills `classes_seen_so_far`.
    pub fn new(name: &str, mut experiences: Vec<Experience>) -> Self {
        let mut seen = BTreeSet::new();
        for (i, e) in experiences.iter_mut().enumerate() {
            e.index = i;
            e.origin_stream = name.to_string();
            if name == TRAIN_STREAM {
                seen.extend(e.classes_in_this_experience.iter().copied());
                e.classes_seen_so_far = seen.clone();
            }
        }
        Stream {
            name: name.to_string(),
            experiences,
        }
    }

    pub fn len(&self) -> usize {
        self.experiences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiences.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.experiences.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Experience> {
        self.experiences.iter()
    }

    pub fn slice(&self, range: Range<usize>) -> &[Experience] {
        &self.experiences[range]
    }

    pub fn experiences(&self) -> &[Experience] {
        &self.experiences
    }
}

impl Index<usize> for Stream {
    type Output = Experience;

    fn index(&self, i: usize) -> &Experience {
        &self.experiences[i]
    }
}

impl<'a> IntoIterator for &'a Stream {
    type Item = &'a Experience;
    type IntoIter = std::slice::Iter<'a, Experience>;

    fn into_iter(self) -> Self::IntoIter {
        self.experiences.iter()
    }
}

/// How an instance was generated; stored with results for reproducibility.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecipeMetadata {
    pub generator: String,
    pub seed: Option<u64>,
    pub n_experiences: usize,
    pub class_order: Option<Vec<usize>>,
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug)]
pub struct BenchmarkInstance {
    pub train_stream: Stream,
    pub test_stream: Stream,
    pub recipe: RecipeMetadata,
}

impl BenchmarkInstance {
    pub fn n_experiences(&self) -> usize {
        self.train_stream.len()
    }

    pub fn summary(&self) -> BenchmarkSummary {
        let rows = |s: &Stream| {
            s.iter()
                .map(|e| ExperienceSummary {
                    stream: s.name.clone(),
                    index: e.index,
                    size: e.len(),
                    classes: e.classes_in_this_experience.iter().copied().collect(),
                    task_labels: e.task_labels.iter().copied().collect(),
                })
                .collect::<Vec<_>>()
        };
        BenchmarkSummary {
            recipe: self.recipe.clone(),
            train: rows(&self.train_stream),
            test: rows(&self.test_stream),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperienceSummary {
    pub stream: String,
    pub index: usize,
    pub size: usize,
    pub classes: Vec<usize>,
    pub task_labels: Vec<usize>,
}

/// Recipe plus per-experience sizes, classes and task labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub recipe: RecipeMetadata,
    pub train: Vec<ExperienceSummary>,
    pub test: Vec<ExperienceSummary>,
}

//! Datasets, lazy views, batching and external data formats.

mod batch;
mod dataset;
mod filelist;
mod idx;
mod synthetic;

pub use batch::{collate, Batch, BatchIterator};
pub use dataset::{
    classes_of, concat, subset, targets_of, task_labels_of, with_transform, ConcatDataset, Dataset,
    DatasetRef, Sample, SubsetView, TensorDataset, TransformFn, TransformedDataset,
};
pub use filelist::{parse_filelist, FileListDataset, FileRecord};
pub use idx::{decode_idx, encode_idx, idx_dataset, parse_idx, IdxArray};
pub use synthetic::{make_synthetic_classification, make_synthetic_split, SyntheticSpec};

//! Benchmark generators: datasets in, train/test streams of experiences out.
//!
//! Nothing here depends on training; instances are immutable and every
//! experience is a lazy view that only touches its own patterns.

mod experience;
mod generators;

pub use experience::{
    BenchmarkInstance, BenchmarkSummary, Experience, ExperienceSummary, RecipeMetadata, Stream,
    TEST_STREAM, TRAIN_STREAM,
};
pub use generators::{
    benchmark_from_datasets, experience_permutation, nc_benchmark, ni_benchmark,
    permutation_benchmark, rotate_image, rotation_benchmark, NcOptions,
};

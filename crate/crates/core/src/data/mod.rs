//! Synthetic Gaussian-mixture benchmark, 2-D corruptions and CSV I/O.

mod corrupt;
mod csvio;
mod synth;

pub use corrupt::{corrupt, CorruptionKind, CorruptionSpec};
pub use csvio::{
    load_benchmark, read_split, save_benchmark, split_from_csv, split_to_csv, write_split,
};
pub use synth::{
    make_benchmark, make_default_benchmark, sample_mixture, Benchmark, BenchmarkConfig,
    DatasetSplit, GaussianSpec, SplitRole,
};

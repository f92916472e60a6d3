//! Shared fixtures for the benchmarks.

use pqr_core::separation::{count_features, select_top_k};
use pqr_core::synth::ClickStream;
use pqr_core::{LabeledInstance, PqrIndexMap};

pub const DIM: u32 = 10_000;

/// Click-style stream with `d = 10^4` and about 15 active features.
pub fn click_stream(instances: usize) -> Vec<LabeledInstance> {
    ClickStream {
        instances,
        dim: DIM,
        seed: 7,
        ..Default::default()
    }
    .generate()
}

/// Index map using the `k` most frequent features of `data`.
pub fn top_k_map(data: &[LabeledInstance], k: usize) -> PqrIndexMap {
    let counts = count_features(data.iter().cloned().map(Ok)).expect("in-memory stream");
    PqrIndexMap::new(select_top_k(&counts, k, DIM).expect("k <= d"))
}

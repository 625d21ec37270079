//! Shared fixtures for the criterion benchmarks.

use sfcast_core::data::{NormStats, Provenance, WindowedDataset};
use sfcast_core::{make_windows, synthesize_series, Tensor};

/// A seeded synthetic dataset windowed at the standard 60-step geometry.
pub fn bench_dataset(length: usize) -> WindowedDataset {
    let series = synthesize_series(length, 7, 1.0);
    let values = series.values();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    let stats = NormStats {
        mean,
        std: var.sqrt(),
    };
    make_windows(
        &stats.apply_slice(&values),
        60,
        1,
        stats,
        Provenance::synthetic(),
    )
    .expect("series long enough")
}

/// A deterministic `[batch, 60, 1]` input tensor.
pub fn bench_batch(batch: usize) -> Tensor {
    let data: Vec<f64> = (0..batch * 60)
        .map(|i| ((i as f64) * 0.113).sin())
        .collect();
    Tensor::new(vec![batch, 60, 1], data).expect("valid tensor")
}

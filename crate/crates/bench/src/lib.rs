//! Shared setup for the criterion benchmarks.

use corv::nmf::{generate_synthetic, RatingsDataset};

/// Desk-scale ratings matrix used by the step benchmarks.
pub fn bench_dataset() -> RatingsDataset {
    generate_synthetic(200, 100, 5, 1.0, 1.0, 2024).expect("synthetic data")
}

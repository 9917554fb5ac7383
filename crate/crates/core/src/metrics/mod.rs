//! Reconstruction error, Fréchet distance over pluggable features, and
//! training-cost measurement.

mod cost;
mod embed;
mod frechet;

pub use cost::{
    bench_step, count_flops, median, BenchReport, GanMode, DEFAULT_TRIALS, DEFAULT_WARMUP,
};
pub use embed::{embed_for_fid, Extractor};
pub use frechet::{fit_gaussian, frechet_distance, psd_sqrt, GaussianStats};

use crate::numerics::{Real, Tensor};
use crate::Result;

/// Mean squared elementwise difference.
pub fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.expect_same_shape(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x.as_f64() - y.as_f64()).powi(2))
        .sum();
    Ok(sum / a.numel() as f64)
}

/// [`mse`] after mapping both tensors from `[-1, 1]` to `[0, 1]` pixel space.
pub fn reconstruction_mse<T: Real>(x: &Tensor<T>, x_hat: &Tensor<T>) -> Result<f64> {
    Ok(mse(x, x_hat)? / 4.0)
}

/// Fréchet distance between two image sets under `extractor`.
pub fn frechet_between(a: &Tensor<f32>, b: &Tensor<f32>, extractor: &Extractor) -> Result<f64> {
    let fa = fit_gaussian(&embed_for_fid(a, extractor)?)?;
    let fb = fit_gaussian(&embed_for_fid(b, extractor)?)?;
    frechet_distance(&fa, &fb)
}

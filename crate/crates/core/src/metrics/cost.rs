use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::networks::{architecture, forward_macs, input_shape, ArchPlan, NetworkKind};
use crate::numerics::{parallel, probe};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanMode {
    /// Generator and critic on full-resolution images.
    ImageGan,
    /// Generator and critic on latent codes.
    CodeGan,
}

impl GanMode {
    pub fn networks(self) -> (NetworkKind, NetworkKind) {
        match self {
            GanMode::ImageGan => (NetworkKind::ImageGenerator, NetworkKind::ImageCritic),
            GanMode::CodeGan => (NetworkKind::CodeGenerator, NetworkKind::CodeCritic),
        }
    }
}

/// Multiply-accumulates of one forward pass of the generator plus one of the
/// critic, per sample.
pub fn count_flops(plan: &ArchPlan, mode: GanMode) -> Result<u64> {
    plan.validate()?;
    let (g, c) = mode.networks();
    let macs = |k| forward_macs(&architecture(k, plan), &input_shape(k, plan));
    Ok(macs(g)? + macs(c)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config_hash: String,
    pub median_ms: f64,
    pub step_ms: Vec<f64>,
    pub flops: u64,
    /// Largest number of tensor elements alive at once during the timed steps.
    pub peak_elements: usize,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "config_hash={} median_ms={:.3} flops={} peak_elements={} trials={}",
            self.config_hash,
            self.median_ms,
            self.flops,
            self.peak_elements,
            self.step_ms.len()
        )
    }
}

pub const DEFAULT_WARMUP: usize = 5;
pub const DEFAULT_TRIALS: usize = 20;

/// Times `trials` calls of `step` after `warmup` untimed ones.
///
/// Runs with the parallel kernels enabled; callers must not run other work
/// in the process meanwhile.
pub fn bench_step<F>(
    mut step: F,
    warmup: usize,
    trials: usize,
    flops: u64,
    config_hash: &str,
) -> Result<BenchReport>
where
    F: FnMut() -> Result<()>,
{
    if trials < 3 {
        return Err(Error::Invalid(format!(
            "bench needs at least 3 trials, got {trials}"
        )));
    }
    let was_sequential = parallel::is_sequential();
    parallel::set_sequential(false);
    let mut run = || -> Result<(Vec<f64>, usize)> {
        for _ in 0..warmup {
            step()?;
        }
        probe::reset();
        let mut times = Vec::with_capacity(trials);
        for _ in 0..trials {
            let t0 = Instant::now();
            step()?;
            times.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        Ok((times, probe::snapshot().peak_elements))
    };
    let result = run();
    parallel::set_sequential(was_sequential);
    let (step_ms, peak_elements) = result?;
    Ok(BenchReport {
        config_hash: config_hash.to_string(),
        median_ms: median(&step_ms),
        step_ms,
        flops,
        peak_elements,
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

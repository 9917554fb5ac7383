//! Per-thread allocation and shape instrumentation.
//!
//! Every [`Tensor`](super::Tensor) constructed or cloned on a thread is counted
//! here. Training code never reads the probe; tests and benchmarks use it to
//! assert peak memory and the largest spatial extent a step materialized.

use std::cell::Cell;

thread_local! {
    static LIVE: Cell<usize> = const { Cell::new(0) };
    static PEAK: Cell<usize> = const { Cell::new(0) };
    static MAX_SPATIAL: Cell<usize> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeReport {
    /// Tensor elements alive right now.
    pub live_elements: usize,
    /// High-water mark of live elements since the last [`reset`].
    pub peak_elements: usize,
    /// Largest height or width of any rank-4 tensor created since the last [`reset`].
    pub max_spatial: usize,
}

pub(crate) fn on_alloc(shape: &[usize], numel: usize) {
    LIVE.with(|live| {
        let now = live.get() + numel;
        live.set(now);
        PEAK.with(|p| p.set(p.get().max(now)));
    });
    if shape.len() == 4 {
        MAX_SPATIAL.with(|m| m.set(m.get().max(shape[2]).max(shape[3])));
    }
}

pub(crate) fn on_free(numel: usize) {
    LIVE.with(|live| live.set(live.get().saturating_sub(numel)));
}

/// Restart peak and spatial tracking from the current live set.
pub fn reset() {
    let live = LIVE.with(Cell::get);
    PEAK.with(|p| p.set(live));
    MAX_SPATIAL.with(|m| m.set(0));
}

pub fn snapshot() -> ProbeReport {
    ProbeReport {
        live_elements: LIVE.with(Cell::get),
        peak_elements: PEAK.with(Cell::get),
        max_spatial: MAX_SPATIAL.with(Cell::get),
    }
}

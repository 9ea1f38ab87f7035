//! Work counters for tests and the bench CLI: executed matmul tiles, complex
//! transform invocations by length, and workspace accounting.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::dft::Direction;

/// Thread-safe work counters. Pass one through `ConvOptions::stats` to
/// instrument a run; counters owned by different runs never interfere.
#[derive(Debug, Default)]
pub struct StatsCollector {
    tiles_total: AtomicU64,
    tiles_core: AtomicU64,
    peak_task_workspace: AtomicU64,
    workspace_total: AtomicU64,
    transforms: Mutex<BTreeMap<(bool, usize), u64>>,
}

/// Point-in-time copy of a collector's counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsSnapshot {
    /// Microkernel tile invocations across all matrix multiplies.
    pub tiles_total: u64,
    /// Tile invocations in the innermost (core) matmuls only.
    pub tiles_core: u64,
    /// Largest per-task workspace allocation, bytes.
    pub peak_task_workspace: u64,
    /// Sum of all workspace allocations, bytes.
    pub workspace_total: u64,
    /// Forward complex transforms by length.
    pub forward_transforms: Vec<(usize, u64)>,
    /// Inverse complex transforms by length.
    pub inverse_transforms: Vec<(usize, u64)>,
}

impl StatsSnapshot {
    pub fn forward_count(&self, len: usize) -> u64 {
        self.forward_transforms
            .iter()
            .find(|(l, _)| *l == len)
            .map(|(_, c)| *c)
            .unwrap_or(0)
    }

    pub fn inverse_count(&self, len: usize) -> u64 {
        self.inverse_transforms
            .iter()
            .find(|(l, _)| *l == len)
            .map(|(_, c)| *c)
            .unwrap_or(0)
    }
}

impl StatsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub(crate) fn record_tiles(&self, count: u64, core: bool) {
        self.tiles_total.fetch_add(count, Ordering::Relaxed);
        if core {
            self.tiles_core.fetch_add(count, Ordering::Relaxed);
        }
    }

    pub(crate) fn record_transform(&self, direction: Direction, len: usize) {
        let mut map = self.transforms.lock().unwrap();
        *map.entry((direction == Direction::Forward, len)).or_insert(0) += 1;
    }

    pub(crate) fn record_workspace(&self, bytes: u64) {
        self.workspace_total.fetch_add(bytes, Ordering::Relaxed);
        self.peak_task_workspace.fetch_max(bytes, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let map = self.transforms.lock().unwrap();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        for (&(is_fwd, len), &count) in map.iter() {
            if is_fwd {
                forward.push((len, count));
            } else {
                inverse.push((len, count));
            }
        }
        StatsSnapshot {
            tiles_total: self.tiles_total.load(Ordering::Relaxed),
            tiles_core: self.tiles_core.load(Ordering::Relaxed),
            peak_task_workspace: self.peak_task_workspace.load(Ordering::Relaxed),
            workspace_total: self.workspace_total.load(Ordering::Relaxed),
            forward_transforms: forward,
            inverse_transforms: inverse,
        }
    }
}

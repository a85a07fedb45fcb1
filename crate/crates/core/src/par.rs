//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the [`ExecMode::Parallel`] path runs
//! on the rayon global pool. Without it, both modes take the sequential path,
//! so callers never need their own `cfg` switches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a data-parallel loop should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    /// True when this mode will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Apply `f(row_index, row)` to every `width`-sized row of `data`.
pub fn for_each_row<F>(mode: ExecMode, data: &mut [u8], width: usize, f: F)
where
    F: Fn(usize, &mut [u8]) + Send + Sync,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
        return;
    }
    let _ = mode;
    data.chunks_mut(width).enumerate().for_each(|(y, row)| f(y, row));
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_indices<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Stable sort by key.
pub fn sort_by_key<T, K, F>(mode: ExecMode, items: &mut [T], key: F)
where
    T: Send,
    K: Ord,
    F: Fn(&T) -> K + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        items.par_sort_by_key(key);
        return;
    }
    let _ = mode;
    items.sort_by_key(key);
}

//! Execution strategy for data-parallel loops.
//!
//! Every parallel loop in the crate goes through [`map_collect`] or
//! [`chunked_sum`]. Results are always collected in input order and reduced
//! sequentially over a fixed chunking, so the parallel and sequential paths
//! produce bit-identical output regardless of the thread count.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Whether the parallel backend is compiled in and requested.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Size the global worker pool. Only the first call takes effect; without
/// the `parallel` feature this is a no-op.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Map `f` over `items`, preserving order.
pub fn map_collect<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Split `items` into at most `chunks` contiguous groups, fold each group
/// sequentially with `fold`, then merge the group results in order.
///
/// The group boundaries depend only on `items.len()` and `chunks`.
pub fn chunked_sum<T, A, F, M>(exec: Exec, items: &[T], chunks: usize, fold: F, merge: M) -> Option<A>
where
    T: Sync,
    A: Send,
    F: Fn(&[T]) -> A + Sync + Send,
    M: Fn(A, A) -> A,
{
    if items.is_empty() {
        return None;
    }
    let chunks = chunks.clamp(1, items.len());
    let size = items.len().div_ceil(chunks);
    let groups: Vec<&[T]> = items.chunks(size).collect();
    let partials = map_collect(exec, &groups, |_, g| fold(g));
    partials.into_iter().reduce(merge)
}

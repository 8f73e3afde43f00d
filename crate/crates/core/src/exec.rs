//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate is an indexed map whose items are computed
//! independently and collected in index order, so the output is identical for
//! [`Exec::Sequential`], [`Exec::Parallel`], and any rayon pool size. Without
//! the `parallel` feature, `Parallel` runs sequentially.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
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
    /// Whether this policy actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Evaluates `f(0), ..., f(n - 1)` and collects the results in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Overwrites `out[i] = f(i)` for every index.
    pub fn fill<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }

    /// Sum of `f(i)` over `0..n`, reduced in fixed-size chunks whose partial
    /// sums are added left to right. The grouping depends only on `n`.
    pub fn chunked_sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        const CHUNK: usize = 2048;
        let chunks = n.div_ceil(CHUNK);
        let partials = self.map(chunks, |c| {
            let end = ((c + 1) * CHUNK).min(n);
            (c * CHUNK..end).map(&f).sum::<f64>()
        });
        partials.into_iter().sum()
    }
}

/// Caps the global worker pool at `workers` threads. Must run before the
/// first parallel loop; without the `parallel` feature this is a no-op.
pub fn configure_workers(workers: usize) -> crate::Result<()> {
    if workers == 0 {
        return Err(crate::Error::param("worker count must be positive"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| crate::Error::param(format!("cannot configure workers: {e}")))?;
    Ok(())
}

//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! work items on the rayon pool. Without it, or with
//! [`Execution::Sequential`], items run in index order on the calling thread.
//! Results are always returned in index order, and every work item draws its
//! randomness from its own derived stream, so both modes give identical
//! output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether this mode actually fans out in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0), .., f(n - 1)` and returns the results in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Execution::map`] but short-circuits on the first error (by index
    /// order in sequential mode; the reported error may differ in parallel
    /// mode when several items fail).
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f(chunk_index, chunk)` to consecutive chunks of `out`.
    pub fn for_each_chunk_mut<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Rows per RNG block in label-level operations (randomized response, label
/// resampling). Fixed so outputs do not depend on the thread count.
pub const BLOCK: usize = 4096;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i * i) % 7;
        assert_eq!(Execution::Parallel.map(1000, f), Execution::Sequential.map(1000, f));
        let mut a = vec![0usize; 10_000];
        let mut b = vec![0usize; 10_000];
        Execution::Parallel.for_each_chunk_mut(&mut a, 97, |i, c| c.iter_mut().for_each(|x| *x = i));
        Execution::Sequential.for_each_chunk_mut(&mut b, 97, |i, c| c.iter_mut().for_each(|x| *x = i));
        assert_eq!(a, b);
    }

    #[test]
    fn try_map_reports_error() {
        let r: Result<Vec<usize>, usize> = Execution::Sequential.try_map(10, |i| if i == 4 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(4));
    }
}

//! Execution policy for per-path work.
//!
//! Every Monte-Carlo routine in the crate is a map over path indices whose
//! random stream depends only on `(seed, index)`, so results are identical
//! under either policy and for any thread count. With the `parallel` feature
//! disabled, [`Exec::Parallel`] degrades to the sequential loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Rayon data parallelism; `threads: None` uses the global pool.
    Parallel { threads: Option<usize> },
}

impl Default for Exec {
    fn default() -> Self {
        Exec::Parallel { threads: None }
    }
}

impl Exec {
    /// `Some(1)` selects the sequential engine.
    pub fn with_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Exec::Sequential,
            Some(0) | None => Exec::Parallel { threads: None },
            t => Exec::Parallel { threads: t },
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Exec::Parallel { .. })
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel { threads } => with_pool(*threads, || (0..n).into_par_iter().map(f).collect()),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel { .. } => (0..n).map(f).collect(),
        }
    }

    pub fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel { threads } => with_pool(*threads, || (0..n).into_par_iter().map(f).collect()),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel { .. } => (0..n).map(f).collect(),
        }
    }
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(threads: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        },
        None => op(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt();
        let a = Exec::Sequential.map(1000, f);
        let b = Exec::Parallel { threads: Some(3) }.map(1000, f);
        let c = Exec::default().map(1000, f);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn thread_count_mapping() {
        assert_eq!(Exec::with_threads(Some(1)), Exec::Sequential);
        assert_eq!(Exec::with_threads(None), Exec::Parallel { threads: None });
        assert_eq!(Exec::with_threads(Some(4)), Exec::Parallel { threads: Some(4) });
    }
}

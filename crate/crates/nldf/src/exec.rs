//! Execution strategy for embarrassingly parallel sample loops.
//!
//! The `parallel` feature (on by default) backs [`ExecMode::Parallel`] with a
//! rayon work-stealing pool; without it the variant is unavailable and
//! everything runs sequentially. Results are identical in both modes because
//! every sample owns its RNG stream and the outputs are collected in index
//! order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
}

impl ExecMode {
    /// Applies `f` to each index in `0..n`, collecting results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
            ExecMode::Sequential => (0..n).map(f).collect(),
        }
    }
}

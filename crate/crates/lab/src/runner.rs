//! Worker pool with a determinism contract: every item is computed from
//! its own explicit inputs (seeds travel in the items, never in thread
//! state) and results come back in input order, so artifacts are
//! byte-identical for any worker count.

use crate::error::{Error, Result};
use rayon::prelude::*;

pub struct Pool {
    inner: rayon::ThreadPool,
    workers: usize,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        let inner = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        Ok(Pool { inner, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Order-preserving parallel map.
    pub fn map<I, O, F>(&self, items: &[I], f: F) -> Vec<O>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> O + Sync,
    {
        self.inner.install(|| items.par_iter().map(&f).collect())
    }

    /// Order-preserving parallel map that stops on the first error.
    pub fn try_map<I, O, F>(&self, items: &[I], f: F) -> Result<Vec<O>>
    where
        I: Sync,
        O: Send,
        F: Fn(&I) -> Result<O> + Sync,
    {
        self.inner
            .install(|| items.par_iter().map(&f).collect::<Result<Vec<O>>>())
    }
}

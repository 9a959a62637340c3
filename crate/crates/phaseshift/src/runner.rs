//! Thread-pool execution of independent search slots.

use phaseshift_core::SlotRunner;
use rayon::prelude::*;

/// Runs slots on a dedicated rayon pool; results come back in slot order, so
/// the worker count never changes them.
pub struct PoolRunner {
    pool: rayon::ThreadPool,
}

impl PoolRunner {
    /// `None` or `Some(0)` picks the number of available cores.
    pub fn new(workers: Option<usize>) -> anyhow::Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers.filter(|&n| n > 0) {
            builder = builder.num_threads(n);
        }
        Ok(PoolRunner {
            pool: builder.build()?,
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl SlotRunner for PoolRunner {
    fn run<T, F>(&self, slots: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        self.pool
            .install(|| (0..slots).into_par_iter().map(&task).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let r = PoolRunner::new(Some(3)).unwrap();
        assert_eq!(r.workers(), 3);
        assert_eq!(
            r.run(100, |i| i * i),
            (0..100).map(|i| i * i).collect::<Vec<_>>()
        );
    }
}

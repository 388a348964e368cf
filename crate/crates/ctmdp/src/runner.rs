use ctmdp_core::simulate::Runner;
use ctmdp_core::Result;
use rayon::prelude::*;

/// Replications on a rayon pool. Results come back in replication order and
/// every replication owns its random stream, so output does not depend on
/// the thread count.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: Option<usize>) -> std::result::Result<Self, String> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err("--threads must be at least 1".into());
            }
            b = b.num_threads(t);
        }
        b.build().map(|pool| Parallel { pool }).map_err(|e| e.to_string())
    }
}

impl Runner for Parallel {
    fn run<T, F>(&self, reps: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.pool.install(|| (0..reps).into_par_iter().map(f).collect())
    }
}

//! Replication fan-out with a sequential fallback.
//!
//! With the `parallel` feature (default) replications run on the rayon pool;
//! without it they run in order on the calling thread. Output order is the
//! replication order either way.

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_replications<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replications_sequential(n, f)
    }
}

/// Always-sequential variant, used as the baseline in benches.
pub fn map_replications_sequential<T, F>(n: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n).map(f).collect()
}

/// Fallible fan-out; the first error in index order wins.
pub fn try_map_replications<T, E, F>(n: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    map_replications(n, f).into_iter().collect()
}

/// Runs `op` with at most `threads` workers (`0` keeps the global pool).
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to build worker pool");
            return pool.install(op);
        }
        op()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}

/// Number of workers `map_replications` will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_replications(1000, |i| i * i);
        assert_eq!(v, map_replications_sequential(1000, |i| i * i));
        let w = with_threads(3, || map_replications(10, |i| i + 1));
        assert_eq!(w, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<u64>, u64> =
            try_map_replications(100, |i| if i % 7 == 6 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(6));
    }
}

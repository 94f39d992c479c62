//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with [`Exec::Sequential`], everything runs on the calling
//! thread. Results are identical either way: maps preserve input order and
//! reductions only use associative, commutative operations (min/max).

/// Environment variable holding the worker count for sweeps and grids.
pub const WORKERS_ENV: &str = "DOBSIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Map over `0..len` and fold the results with an associative `combine`.
pub fn map_reduce<R, F, C>(exec: Exec, len: usize, identity: R, f: F, combine: C) -> R
where
    R: Send + Sync + Clone,
    F: Fn(usize) -> R + Sync + Send,
    C: Fn(R, R) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).reduce(|| identity.clone(), &combine)
        }
        _ => (0..len).map(f).fold(identity, combine),
    }
}

/// Runs `op` inside a pool sized by [`WORKERS_ENV`] when it is set.
pub fn with_configured_pool<R: Send>(op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        if let Some(n) = workers {
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => return pool.install(op),
                Err(err) => log::warn!("could not build a {n}-thread pool: {err}"),
            }
        }
    }
    op()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(Exec::Sequential, &items, |x| x * x);
        let par = map(Exec::Parallel, &items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
    }

    #[test]
    fn reductions_agree() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let seq = map_reduce(Exec::Sequential, 10_000, f64::NEG_INFINITY, f, f64::max);
        let par = map_reduce(Exec::Parallel, 10_000, f64::NEG_INFINITY, f, f64::max);
        assert_eq!(seq, par);
    }
}

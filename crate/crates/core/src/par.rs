//! Trial-level parallelism. Results always come back in index order, so
//! every reduction is identical for any thread count.

use crate::error::Result;

/// How independent trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Whether the crate was built with the `parallel` feature.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// `(0..n).map(f)`, spread over the rayon pool when `exec` is
/// [`Execution::Parallel`] and the feature is enabled.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`], stopping at the first error in index order.
pub fn try_map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

/// Runs `f` on a dedicated pool of `threads` workers; `None` keeps the
/// global pool. Without the `parallel` feature `f` simply runs inline.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        #[cfg(feature = "parallel")]
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| crate::error::Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(Execution::Sequential, 100, |i| i * i);
        let par = map_indexed(Execution::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<usize>> = try_map_indexed(Execution::Parallel, 10, |i| {
            if i == 3 {
                Err(crate::error::Error::InvalidArgument("three".into()))
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }

    #[test]
    fn dedicated_pool() {
        let v = with_threads(Some(2), || map_indexed(Execution::Parallel, 5, |i| i + 1)).unwrap();
        assert_eq!(v, vec![1, 2, 3, 4, 5]);
    }
}

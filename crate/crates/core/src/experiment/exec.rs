//! Trial execution: serial, or fanned out over a rayon pool.
//!
//! Results always come back in index order, so aggregation is identical
//! either way.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// `None` uses every available core.
    #[default]
    Parallel,
    ParallelWith(usize),
}

impl Execution {
    /// `Some(1)` is serial, `Some(n)` caps the pool, `None` uses all cores.
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Execution::Serial,
            Some(n) => Execution::ParallelWith(n),
            None => Execution::Parallel,
        }
    }
}

pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<Option<rayon::ThreadPool>>,
}

impl Executor {
    pub fn new(execution: Execution) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let pool = match execution {
                Execution::Serial => None,
                Execution::Parallel => Some(None),
                Execution::ParallelWith(0) => {
                    return Err(Error::config("workers must be at least 1"))
                }
                Execution::ParallelWith(n) => Some(Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| Error::config(format!("thread pool: {e}")))?,
                )),
            };
            Ok(Executor { pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            if execution == Execution::ParallelWith(0) {
                return Err(Error::config("workers must be at least 1"));
            }
            Ok(Executor {})
        }
    }

    pub fn serial() -> Self {
        Executor {
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// `f(0), f(1), ..., f(n - 1)` in order. Stops at the first error.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            match &self.pool {
                None => (0..n).map(f).collect(),
                Some(None) => (0..n).into_par_iter().map(f).collect(),
                Some(Some(pool)) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n).map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let f = |i: usize| Ok((i as f64).sqrt().sin());
        let a = Executor::serial().map(1000, f).unwrap();
        let b = Executor::new(Execution::Parallel)
            .unwrap()
            .map(1000, f)
            .unwrap();
        let c = Executor::new(Execution::ParallelWith(3))
            .unwrap()
            .map(1000, f)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn errors_propagate() {
        let r = Executor::new(Execution::Parallel).unwrap().map(100, |i| {
            if i == 57 {
                Err(Error::EmptyStream)
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
        assert!(Executor::new(Execution::ParallelWith(0)).is_err());
    }

    #[test]
    fn worker_mapping() {
        assert_eq!(Execution::from_workers(Some(1)), Execution::Serial);
        assert_eq!(Execution::from_workers(None), Execution::Parallel);
        assert_eq!(Execution::from_workers(Some(4)), Execution::ParallelWith(4));
    }
}

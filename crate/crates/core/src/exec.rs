//! Execution strategy for the data-parallel loops (batch sessions, dictionary scans).
//!
//! With the `parallel` feature disabled every strategy runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Execution {
    Sequential,
    /// Run on a rayon pool. `max_threads: None` uses the global pool.
    #[default]
    Parallel,
    Bounded {
        max_threads: usize,
    },
}

impl Execution {
    /// Strategy for a parallelism limit as given on the command line or in a config file.
    pub fn from_limit(limit: Option<usize>) -> Self {
        match limit {
            None => Execution::Parallel,
            Some(0) | Some(1) => Execution::Sequential,
            Some(n) => Execution::Bounded { max_threads: n },
        }
    }

    /// Maps `f` over `items`, preserving input order in the output.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.into_iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Execution::Bounded { max_threads } => {
                use rayon::prelude::*;
                match rayon::ThreadPoolBuilder::new().num_threads(max_threads.max(1)).build() {
                    Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
                    Err(e) => {
                        log::warn!("could not build thread pool ({e}); running sequentially");
                        items.into_iter().map(f).collect()
                    }
                }
            }
            #[cfg(not(feature = "parallel"))]
            _ => items.into_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_strategies_preserve_order() {
        let input: Vec<u32> = (0..500).collect();
        let expected: Vec<u32> = input.iter().map(|x| x * 3).collect();
        for exec in [Execution::Sequential, Execution::Parallel, Execution::Bounded { max_threads: 3 }] {
            assert_eq!(exec.map(input.clone(), |x| x * 3), expected);
        }
    }

    #[test]
    fn limit_mapping() {
        assert_eq!(Execution::from_limit(Some(1)), Execution::Sequential);
        assert_eq!(Execution::from_limit(None), Execution::Parallel);
        assert_eq!(Execution::from_limit(Some(4)), Execution::Bounded { max_threads: 4 });
    }
}

//! Data-parallel helpers with a sequential fallback.
//!
//! Every hot loop in the crate (Monte Carlo samples, bound sampling, optimizer
//! restarts) is an indexed map followed by a commutative reduction. The
//! helpers here run that shape either on the rayon pool or on the calling
//! thread. Results never depend on the choice: each index derives its own
//! random stream, and the reductions are integer counts or ordered collects.
//!
//! Without the `parallel` feature, [`Execution::Parallel`] silently runs
//! sequentially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer applied to `master + index * golden`; a pure function
/// of its inputs, so derived seeds do not depend on scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How an indexed workload is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `0..n` with per-worker scratch state and reduces the results.
pub fn map_reduce<S, T, I, M, Id, R>(
    exec: Execution,
    n: usize,
    init: I,
    map: M,
    identity: Id,
    reduce: R,
) -> T
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    M: Fn(&mut S, usize) -> T + Sync + Send,
    Id: Fn() -> T + Sync + Send,
    R: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map_init(&init, |s, i| map(s, i))
            .reduce(&identity, &reduce);
    }
    let _ = exec;
    let mut scratch = init();
    (0..n).fold(identity(), |acc, i| reduce(acc, map(&mut scratch, i)))
}

/// Maps `0..n` with per-worker scratch state, keeping index order.
pub fn map_collect<S, T, I, M>(exec: Execution, n: usize, init: I, map: M) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    M: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map_init(&init, |s, i| map(s, i))
            .collect();
    }
    let _ = exec;
    let mut scratch = init();
    (0..n).map(|i| map(&mut scratch, i)).collect()
}

/// Runs `f` inside a pool limited to `workers` threads (if given).
///
/// Falls back to the global pool when the pool cannot be built.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(w) = workers {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn modes_agree_on_sum() {
        let run = |exec| map_reduce(exec, 1000, || (), |_, i| (i * i) as u64, || 0u64, |a, b| a + b);
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
        assert_eq!(run(Execution::Sequential), (0..1000u64).map(|i| i * i).sum::<u64>());
    }

    #[test]
    fn collect_keeps_order() {
        let v = map_collect(Execution::Parallel, 257, || 0usize, |calls, i| {
            *calls += 1;
            i * 3
        });
        assert_eq!(v, (0..257).map(|i| i * 3).collect::<Vec<_>>());
    }

    #[test]
    fn worker_limit_does_not_change_results() {
        let f = || map_reduce(Execution::Parallel, 500, || (), |_, i| i as u64 % 7, || 0, |a, b| a + b);
        assert_eq!(with_workers(Some(1), f), with_workers(Some(3), f));
    }
}

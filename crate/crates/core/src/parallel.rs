//! Thread-pool control for the engines.
//!
//! Engines use rayon internally. Results never depend on the pool size: work
//! is split into fixed shards and reduced in shard order.

use rayon::ThreadPoolBuilder;

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(err) => {
            log::warn!("could not build a {threads}-thread pool ({err}); using the global pool");
            f()
        }
    }
}

//! Replica-parallel map with an order-preserving gather.
//!
//! Results come back indexed by replica, so any reduction done afterwards in
//! index order is independent of the thread count.

use rayon::prelude::*;

pub fn map_indexed<T, F>(threads: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if threads <= 1 || count < 2 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

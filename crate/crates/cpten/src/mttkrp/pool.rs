//! A scoped work-queue over block indices.
//!
//! Kernels see the iteration space as a league of independent blocks.
//! Workers pull block indices from a shared counter until the queue drains,
//! so uneven block costs balance automatically. With one thread the blocks
//! run inline in ascending order, which makes single-threaded runs
//! bit-reproducible and a convenient reference for tests.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

/// Runs `worker(block)` for every `block in 0..blocks` on up to `threads`
/// workers. `make_worker` is called once per worker thread so each can hold
/// private scratch state.
pub(crate) fn run_league<F, W>(threads: usize, blocks: usize, make_worker: F)
where
    F: Fn() -> W + Sync,
    W: FnMut(usize),
{
    let threads = threads.max(1);
    if threads == 1 || blocks <= 1 {
        let mut worker = make_worker();
        for block in 0..blocks {
            worker(block);
        }
        return;
    }
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..threads.min(blocks) {
            scope.spawn(|| {
                let mut worker = make_worker();
                loop {
                    let block = next.fetch_add(1, Ordering::Relaxed);
                    if block >= blocks {
                        break;
                    }
                    worker(block);
                }
            });
        }
    });
}

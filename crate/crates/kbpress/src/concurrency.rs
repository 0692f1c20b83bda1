//! Process-wide worker-thread budget and an order-preserving parallel map.
//!
//! Scoring candidate rules is pure, so sibling candidates can be graded on
//! separate threads; results come back in input order, which keeps every
//! selection deterministic regardless of completion order.

use std::sync::OnceLock;

static THREADS: OnceLock<usize> = OnceLock::new();

/// Fixes the worker-thread budget for this process. Later calls are ignored.
pub fn set_threads(n: usize) {
    let _ = THREADS.set(n.max(1));
}

/// The configured budget, defaulting to the available parallelism.
pub fn threads() -> usize {
    *THREADS.get_or_init(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

/// Applies `f` to every item, possibly in parallel, preserving input order.
pub fn parallel_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = threads().min(items.len());
    if workers <= 1 || items.len() < 32 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let mut out: Vec<Vec<U>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|slice| scope.spawn(|| slice.iter().map(&f).collect::<Vec<U>>()))
            .collect();
        out = handles.into_iter().map(|h| h.join().unwrap()).collect();
    });
    out.into_iter().flatten().collect()
}

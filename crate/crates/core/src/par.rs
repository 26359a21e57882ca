use rayon::prelude::*;

/// Maps `f` over `items` on at most `parallelism` threads, keeping input order.
pub(crate) fn map_ordered<T, R, F>(parallelism: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if parallelism <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
    {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(e) => {
            tracing::warn!(error = %e, "thread pool unavailable, running serially");
            items.iter().map(f).collect()
        }
    }
}

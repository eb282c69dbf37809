//! Batch application. Results are identical for any worker count because
//! every sample draws from its own keyed streams.

use crate::error::Result;
use crate::image::{NormalizedTensor, Patch};
use crate::pipeline::{apply, AuditRecord, PipelineSpec};

/// Maps `f` over `items`, keeping input order. With the `parallel` feature
/// this runs on a pool of `workers` threads (`0` = one per core); otherwise,
/// or with `workers == 1`, it runs on the calling thread.
pub fn map_samples<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers != 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}

pub fn apply_batch_sequential(
    spec: &PipelineSpec,
    samples: &[(u64, &Patch)],
    epoch: u64,
) -> Result<Vec<(NormalizedTensor, AuditRecord)>> {
    samples
        .iter()
        .map(|&(id, patch)| apply(spec, patch, epoch, id))
        .collect()
}

/// `samples` pairs each patch with its sample id.
pub fn apply_batch(
    spec: &PipelineSpec,
    samples: &[(u64, &Patch)],
    epoch: u64,
    workers: usize,
) -> Result<Vec<(NormalizedTensor, AuditRecord)>> {
    map_samples(samples, workers, |&(id, patch)| apply(spec, patch, epoch, id))
        .into_iter()
        .collect()
}

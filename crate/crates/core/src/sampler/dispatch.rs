use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::denoiser::{BatchError, DenoiseError, DenoiseRequest, Denoiser};
use crate::tensor::Canvas;

/// Runs `requests` through `denoiser` with at most `max_inflight` calls
/// outstanding, returning outputs in request order regardless of the order
/// in which calls complete. On failure the lowest failing index is reported.
pub fn dispatch_ordered<D: Denoiser + ?Sized>(
    denoiser: &D,
    requests: &[DenoiseRequest<'_>],
    max_inflight: usize,
) -> Result<Vec<Canvas>, BatchError> {
    let workers = max_inflight.max(1).min(requests.len());
    if workers <= 1 {
        return requests
            .iter()
            .enumerate()
            .map(|(index, r)| denoiser.denoise(r).map_err(|source| BatchError { index, source }))
            .collect();
    }

    let slots: Vec<Mutex<Option<Result<Canvas, DenoiseError>>>> = requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(request) = requests.get(i) else {
                    break;
                };
                let out = denoiser.denoise(request);
                if out.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });

    let mut outputs = Vec::with_capacity(requests.len());
    let mut first_skipped = None;
    for (index, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(c)) => outputs.push(c),
            Some(Err(source)) => return Err(BatchError { index, source }),
            None => {
                first_skipped.get_or_insert(index);
            }
        }
    }
    // Unreachable unless a worker stopped early, which only happens after an
    // error has been stored.
    match first_skipped {
        None => Ok(outputs),
        Some(index) => Err(BatchError {
            index,
            source: DenoiseError::Config("request skipped after an earlier failure".into()),
        }),
    }
}

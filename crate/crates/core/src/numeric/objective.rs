//! Scalar objectives over a flat parameter vector, and the order-fixed
//! parallel reduction every batched loss uses.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{ensure_all_finite, ensure_finite, Result};

/// Rows per reduction chunk. Fixed so that summation order never depends on
/// the number of worker threads.
pub const ROW_CHUNK: usize = 256;

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    /// Name reported in numerical errors.
    fn name(&self) -> &str;

    fn value(&self, params: &[f64]) -> Result<f64>;

    /// Analytic reverse-accumulation gradient.
    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Gradient of `objective` at `params`, rejecting non-finite results.
pub fn grad<O: Objective + ?Sized>(objective: &O, params: &[f64]) -> Result<Vec<f64>> {
    let (value, g) = objective.value_and_grad(params)?;
    ensure_finite(objective.name(), value)?;
    ensure_all_finite(objective.name(), &g)?;
    Ok(g)
}

/// Sums `(value, gradient)` contributions over row chunks of `0..n_rows`.
/// Chunks may run on any number of threads; the reduction is always in chunk
/// order, so the result is bit-identical for every pool size.
pub fn chunked_value_and_grad<F>(n_rows: usize, dim: usize, f: F) -> Result<(f64, Vec<f64>)>
where
    F: Fn(Range<usize>) -> Result<(f64, Vec<f64>)> + Sync,
{
    let n_chunks = n_rows.div_ceil(ROW_CHUNK);
    let parts: Vec<Result<(f64, Vec<f64>)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n_rows)))
        .collect();
    let mut value = 0.0;
    let mut total = vec![0.0; dim];
    for part in parts {
        let (v, g) = part?;
        value += v;
        for (t, x) in total.iter_mut().zip(&g) {
            *t += x;
        }
    }
    Ok((value, total))
}

/// Maps row chunks in parallel and concatenates the outputs in order.
pub fn chunked_map<T, F>(n_rows: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> Vec<T> + Sync,
{
    let n_chunks = n_rows.div_ceil(ROW_CHUNK);
    let parts: Vec<Vec<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n_rows)))
        .collect();
    parts.into_iter().flatten().collect()
}

/// Runs `f` on a dedicated pool of `threads` workers (`None` = rayon default).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        None => f(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
    }
}

//! Mean absolute error, the completeness regression loss.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// MAE over a prediction/target pair, plus the gradient w.r.t. the
/// predictions. The subgradient at an exact tie is 0.
pub fn mae_loss<T: Real>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::usage(format!(
            "mae_loss needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = real::<T>(pred.len() as f64);
    let inv_n = T::one() / n;
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let diff = p - t;
        total += diff.abs();
        grad.push(if diff > T::zero() {
            inv_n
        } else if diff < T::zero() {
            -inv_n
        } else {
            T::zero()
        });
    }
    Ok((total / n, grad))
}

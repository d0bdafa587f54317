//! Causal Gaussian smoothing.
//!
//! The filter is one-sided: each output uses only the current and past
//! values, so streaming inference can apply it frame by frame without
//! look-ahead. Kernel weights follow `exp(-j^2 / (2 sigma^2))` for lags
//! `j = 0..=radius` and are renormalized over the taps that actually exist
//! near the start of the sequence.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Unnormalized one-sided kernel, index = lag.
pub fn gaussian_kernel<T: Real>(sigma: T, radius: usize) -> Result<Vec<T>> {
    if sigma <= T::zero() {
        return Err(Error::usage(format!("smoothing sigma must be > 0, got {sigma}")));
    }
    let two = real::<T>(2.0);
    Ok((0..=radius)
        .map(|j| {
            let j = real::<T>(j as f64);
            (-(j * j) / (two * sigma * sigma)).exp()
        })
        .collect())
}

/// One smoothed value from the most recent window, newest value first.
/// `window` holds at most `kernel.len()` values.
#[inline]
pub(crate) fn smooth_one<T: Real>(kernel: &[T], window_newest_first: &[T]) -> T {
    let mut acc = T::zero();
    let mut weight_sum = T::zero();
    for (w, v) in kernel.iter().zip(window_newest_first) {
        acc += *w * *v;
        weight_sum += *w;
    }
    acc / weight_sum
}

/// Smooth a whole sequence causally.
pub fn gaussian_smooth<T: Real>(seq: &[T], sigma: T, radius: usize) -> Result<Vec<T>> {
    if seq.is_empty() {
        return Err(Error::usage("cannot smooth an empty sequence"));
    }
    let kernel = gaussian_kernel(sigma, radius)?;
    let mut window = Vec::with_capacity(radius + 1);
    let mut out = Vec::with_capacity(seq.len());
    for (i, &v) in seq.iter().enumerate() {
        // window[j] = seq[i - j], newest first, capped at radius + 1 taps.
        window.insert(0, v);
        if window.len() > radius + 1 {
            window.pop();
        }
        debug_assert_eq!(window.len(), (i + 1).min(radius + 1));
        out.push(smooth_one(&kernel, &window));
    }
    Ok(out)
}

/// Backward pass: distribute `d_out` onto the raw sequence through the
/// same per-index normalization used by the forward pass.
pub fn gaussian_smooth_backward<T: Real>(
    d_out: &[T],
    sigma: T,
    radius: usize,
) -> Result<Vec<T>> {
    let kernel = gaussian_kernel(sigma, radius)?;
    let n = d_out.len();
    // Precompute the normalizer for every output index.
    let mut d_in = vec![T::zero(); n];
    for i in 0..n {
        let taps = (i + 1).min(radius + 1);
        let mut weight_sum = T::zero();
        for w in kernel.iter().take(taps) {
            weight_sum += *w;
        }
        for j in 0..taps {
            d_in[i - j] += kernel[j] / weight_sum * d_out[i];
        }
    }
    Ok(d_in)
}

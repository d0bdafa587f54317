//! Inverted dropout, deterministic per seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

fn check_rate<T: Real>(rate: T) -> Result<f64> {
    let rate = rate.to_f64().unwrap_or(f64::NAN);
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::usage(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(rate)
}

/// Keep mask for `len` elements: `true` keeps the element.
pub fn dropout_mask<T: Real>(len: usize, rate: T, seed: u64) -> Result<Vec<bool>> {
    let rate = check_rate(rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len).map(|_| rng.random::<f64>() >= rate).collect())
}

/// Apply a precomputed mask in place, scaling survivors by `1/(1-rate)`.
pub fn apply_mask<T: Real>(values: &mut [T], mask: &[bool], rate: T) {
    let keep = T::one() - rate;
    for (v, &m) in values.iter_mut().zip(mask) {
        *v = if m { *v / keep } else { T::zero() };
    }
}

/// Standalone op: train mode zeroes each element with probability `rate`
/// and rescales survivors; eval mode is the identity.
pub fn dropout_apply<T: Real>(
    input: &Tensor<T>,
    rate: T,
    mode: DropoutMode,
    seed: u64,
) -> Result<Tensor<T>> {
    check_rate(rate)?;
    match mode {
        DropoutMode::Eval => Ok(input.clone()),
        DropoutMode::Train => {
            if rate == T::zero() {
                return Ok(input.clone());
            }
            let mask = dropout_mask(input.len(), rate, seed)?;
            let mut out = input.clone();
            apply_mask(out.data_mut(), &mask, rate);
            Ok(out)
        }
    }
}

/// Derive a per-site seed for dropout from the run seed and position
/// counters, so masks are reproducible and independent across sites.
pub fn site_seed(run_seed: u64, epoch: usize, trace_index: usize, site: usize) -> u64 {
    let mut x = run_seed
        ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trace_index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (site as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

//! Activation functions and their derivatives.
//!
//! The output neuron of the progress regressor uses the rectified
//! hyperbolic tangent, `rtanh(x) = max(0, tanh(x))`, which maps the reals
//! onto `[0, 1)` so the regression value can be read as a completeness
//! fraction. Hidden layers use ReLU; sigmoid is kept for the output-neuron
//! comparison harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Rtanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(&self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Rtanh => {
                let t = x.tanh();
                if t > T::zero() {
                    // tanh rounds to exactly 1.0 for large x; keep the
                    // completeness range half-open.
                    t.min(largest_below_one())
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => sigmoid_raw(x).min(largest_below_one()),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation input.
    #[inline]
    pub fn grad<T: Real>(&self, x: T) -> T {
        match self {
            Activation::Relu => {
                // Subgradient at 0: right limit, matching rtanh below.
                if x >= T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Rtanh => {
                if x >= T::zero() {
                    let t = x.tanh();
                    T::one() - t * t
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid_raw(x);
                s * (T::one() - s)
            }
            Activation::Identity => T::one(),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Activation::Relu => "relu",
            Activation::Rtanh => "rtanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        };
        f.write_str(name)
    }
}

#[inline]
fn sigmoid_raw<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Largest representable value strictly below 1.
#[inline]
fn largest_below_one<T: Real>() -> T {
    T::one() - T::epsilon() / (T::one() + T::one())
}

fn check_finite<T: Real>(x: T, op: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric(format!("{op} received non-finite input {x:?}")))
    }
}

/// Rectified hyperbolic tangent, `max(0, tanh(x))`, with range `[0, 1)`.
#[inline]
pub fn rtanh<T: Real>(x: T) -> Result<T> {
    check_finite(x, "rtanh")?;
    Ok(Activation::Rtanh.apply(x))
}

/// Derivative of `rtanh`: `1 - tanh(x)^2` for `x >= 0`, else 0.
///
/// At the kink (x = 0) the right limit is used, so the gradient there is 1.
#[inline]
pub fn rtanh_grad<T: Real>(x: T) -> Result<T> {
    check_finite(x, "rtanh_grad")?;
    Ok(Activation::Rtanh.grad(x))
}

/// Logistic sigmoid, kept alongside `rtanh` for the activation comparison.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> Result<T> {
    check_finite(x, "sigmoid")?;
    Ok(sigmoid_raw(x))
}

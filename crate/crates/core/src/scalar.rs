//! Scalar abstraction shared by the estimation code.
//!
//! Estimators, nuisance fits and clustering are written once against
//! [`Scalar`] and instantiated for `f64` (the default used by the CLI and the
//! simulation harness) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Default absolute tolerance on the sup-norm of the logistic score.
    const SCORE_TOL: f64;
    /// Relative threshold on |R_jj| below which a QR column counts as dependent.
    const RANK_TOL: f64;

    /// Converts an `f64` literal; every supported type can represent it approximately.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const SCORE_TOL: f64 = 1e-8;
    const RANK_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const SCORE_TOL: f64 = 1e-3;
    const RANK_TOL: f64 = 1e-5;
}

/// Numerically stable logistic function.
#[inline]
pub fn expit<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// log(1 + exp(x)) without overflow.
#[inline]
pub(crate) fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

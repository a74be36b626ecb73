//! Scalar abstraction shared by the numeric modules.
//!
//! Physics code is written against [`Real`] so it runs in `f32` or `f64`.
//! Budget arithmetic only needs field operations and is written against
//! [`Exact`], which is also implemented by [`num_rational::Rational64`] so
//! the published mission totals can be checked without rounding.

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal. Only used with values representable in the type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count fits scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field scalar for bookkeeping arithmetic (data budgets).
pub trait Exact: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    fn from_int(n: i64) -> Self;

    /// `num / den` computed in the scalar's own arithmetic.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn to_f64_lossy(&self) -> f64;
}

impl Exact for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Exact for f32 {
    fn from_int(n: i64) -> Self {
        n as f32
    }

    fn to_f64_lossy(&self) -> f64 {
        f64::from(*self)
    }
}

impl Exact for Rational64 {
    fn from_int(n: i64) -> Self {
        Rational64::from_integer(n)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Pearson correlation of two equal-length series. Returns 0 for constant input.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

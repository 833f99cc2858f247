//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the numerical core is generic over (`f32` or `f64`).
pub trait Scalar: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Relative tolerance used when comparing scale values and breakpoints.
    ///
    /// `1e-12` for `f64`; types with less precision fall back to a multiple of
    /// their machine epsilon.
    fn rel_tol() -> Self {
        let floor = Self::epsilon() * lit::<Self>(64.0);
        lit::<Self>(1e-12).max(floor)
    }

    /// Absolute floor for [`Scalar::rel_tol`] comparisons near zero.
    fn abs_floor() -> Self {
        Self::from_f64(1e-300).filter(|v| *v > Self::zero()).unwrap_or_else(Self::min_positive_value)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

/// Equality up to `rel_tol` with the `abs_floor` absolute floor.
#[inline]
pub fn approx_eq<T: Scalar>(a: T, b: T) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= (T::rel_tol() * scale).max(T::abs_floor())
}

/// `a < b` beyond tolerance.
#[inline]
pub fn definitely_less<T: Scalar>(a: T, b: T) -> bool {
    a < b && !approx_eq(a, b)
}

/// Pairwise (cascade) summation, deterministic for a fixed input order.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n if n <= 8 => xs.iter().fold(T::zero(), |acc, &x| acc + x),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `n!` as a scalar (saturates to infinity).
pub fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * lit::<T>(k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_relative() {
        assert!(approx_eq(1.0e6_f64, 1.0e6 + 1e-7));
        assert!(!approx_eq(1.0_f64, 1.0 + 1e-9));
        assert!(approx_eq(0.0_f64, 1e-301));
        assert!(!approx_eq(f64::INFINITY, 1e308));
        assert!(approx_eq(f64::INFINITY, f64::INFINITY));
    }

    #[test]
    fn f32_tolerance_floor() {
        assert!(f32::rel_tol() > 1e-6);
        assert!(approx_eq(1.0_f32, 1.0 + 1e-6));
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
        assert_eq!(factorial::<f64>(5), 120.0);
    }
}

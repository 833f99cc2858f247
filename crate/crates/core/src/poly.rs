//! Dense polynomials in a local variable, coefficients in ascending order.

use crate::scalar::{lit, Scalar};

/// Horner evaluation.
pub fn eval<T: Scalar>(c: &[T], t: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &a| acc * t + a)
}

pub fn deriv<T: Scalar>(c: &[T]) -> Vec<T> {
    c.iter().enumerate().skip(1).map(|(k, &a)| a * lit::<T>(k as f64)).collect()
}

/// Antiderivative vanishing at `t = 0`.
pub fn integrate<T: Scalar>(c: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(T::zero());
    out.extend(c.iter().enumerate().map(|(k, &a)| a / lit::<T>((k + 1) as f64)));
    out
}

pub fn mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n).map(|k| a.get(k).copied().unwrap_or_else(T::zero) + b.get(k).copied().unwrap_or_else(T::zero)).collect()
}

pub fn scale<T: Scalar>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// Coefficients of `t ↦ p(shift + factor·t)`.
pub fn compose_affine<T: Scalar>(p: &[T], shift: T, factor: T) -> Vec<T> {
    let lin = [shift, factor];
    let mut out: Vec<T> = Vec::new();
    for &a in p.iter().rev() {
        out = mul(&out, &lin);
        if out.is_empty() {
            out.push(a);
        } else {
            out[0] = out[0] + a;
        }
    }
    out
}

/// Integral of `p` over `[a, b]`.
pub fn definite<T: Scalar>(p: &[T], a: T, b: T) -> T {
    let q = integrate(p);
    eval(&q, b) - eval(&q, a)
}

/// Drops trailing coefficients whose contribution on `[0, h]` is below `tol`
/// times the largest contribution.
pub fn trim<T: Scalar>(c: &mut Vec<T>, h: T, tol: T) {
    let mut hk = T::one();
    let contrib: Vec<T> = c
        .iter()
        .map(|&a| {
            let v = (a * hk).abs();
            hk = hk * h;
            v
        })
        .collect();
    let peak = contrib.iter().fold(T::zero(), |m, &v| m.max(v));
    while c.len() > 1 && contrib[c.len() - 1] <= tol * peak {
        c.pop();
    }
}

/// Upper bound of `|p|` on `[0, h]` from the coefficients.
pub fn abs_bound<T: Scalar>(c: &[T], h: T) -> T {
    let mut hk = T::one();
    let mut s = T::zero();
    for &a in c {
        s = s + a.abs() * hk;
        hk = hk * h;
    }
    s
}

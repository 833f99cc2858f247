//! Feller classification of the ends of the image interval.
//!
//! Verdicts come from closed-form antiderivatives (polynomial and power
//! densities) and closed-form geometric sums, so divergence is decided
//! analytically rather than by watching a float overflow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Density, DensityPiece, GeometricAtoms, SpeedMeasure};
use crate::pair::QuasiPair;
use crate::poly;
use crate::scalar::{approx_eq, lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("inconclusive verdict for {which}: finite by analysis but not representable ({value})")]
    Inconclusive { which: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Regular,
    Exit,
    Entrance,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Refinement {
    Reflecting,
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryClass<T> {
    pub kind: BoundaryKind,
    pub refinement: Option<Refinement>,
    pub instantaneous: Option<bool>,
    pub sigma_hat: T,
    pub lambda_hat: T,
}

impl<T: Scalar> BoundaryClass<T> {
    pub fn is_regular(&self) -> bool {
        self.kind == BoundaryKind::Regular
    }

    pub fn is_reflecting(&self) -> bool {
        self.refinement == Some(Refinement::Reflecting)
    }
}

/// Extended value with an analytic divergence flag.
#[derive(Debug, Clone, Copy)]
struct Ext<T> {
    value: T,
    divergent: bool,
}

impl<T: Scalar> Ext<T> {
    fn zero() -> Self {
        Self { value: T::zero(), divergent: false }
    }

    fn inf() -> Self {
        Self { value: T::infinity(), divergent: true }
    }

    fn finite(value: T) -> Self {
        Self { value, divergent: false }
    }

    fn add(self, o: Self) -> Self {
        if self.divergent || o.divergent {
            Self::inf()
        } else {
            Self::finite(self.value + o.value)
        }
    }
}

/// `∫ (w0 + w1·x) p(x) dx` over `[a, b] ∩ piece`; the weight is assumed
/// nonnegative there.
fn piece_weighted<T: Scalar>(p: &DensityPiece<T>, w0: T, w1: T, a: T, b: T) -> Ext<T> {
    let lo = a.max(p.x0);
    let hi = b.min(p.x1);
    if !(hi > lo) || p.is_zero() {
        return Ext::zero();
    }
    match &p.density {
        Density::Poly(c) => {
            if !lo.is_finite() || !hi.is_finite() {
                return if w0 == T::zero() && w1 == T::zero() { Ext::zero() } else { Ext::inf() };
            }
            let o = p.origin();
            let weighted = poly::mul(c, &[w0 + w1 * o, w1]);
            Ext::finite(poly::definite(&weighted, lo - o, hi - o))
        }
        Density::Power { coeff, center, exponent } => {
            let sgn = if lo >= *center { T::one() } else { -T::one() };
            let (t0, t1) = {
                let x = (lo - *center).abs();
                let y = (hi - *center).abs();
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            };
            let mut a0 = w0 + w1 * *center;
            let a1 = w1 * sgn;
            if a0.abs() <= lit::<T>(1e-12) * (w0.abs() + (w1 * *center).abs()) {
                a0 = T::zero();
            }
            let p0 = *exponent;
            let p1 = *exponent + T::one();
            let zero = T::zero();
            // Near t = 0 the t^p term dominates, near ∞ the t^{p+1} term.
            let at_zero =
                if a0 != zero { t0 == zero && p0 + T::one() <= zero } else { a1 != zero && t0 == zero && p1 + T::one() <= zero };
            let at_inf = if a1 != zero {
                !t1.is_finite() && p1 + T::one() >= zero
            } else {
                a0 != zero && !t1.is_finite() && p0 + T::one() >= zero
            };
            if at_zero || at_inf {
                return Ext::inf();
            }
            let i0 = if a0 == zero { zero } else { a0 * crate::measure::power_integral(p0, t0, t1) };
            let i1 = if a1 == zero { zero } else { a1 * crate::measure::power_integral(p1, t0, t1) };
            Ext::finite(*coeff * (i0 + i1))
        }
    }
}

/// `Σ_{k ≥ k0} z^k`.
fn geo_tail<T: Scalar>(z: T, k0: u64) -> Ext<T> {
    if z >= T::one() {
        Ext::inf()
    } else {
        Ext::finite(z.powf(lit(k0 as f64)) / (T::one() - z))
    }
}

/// `Σ (w0 + w1·x_k) mass_k` over sequence atoms inside the region.
fn sequence_weighted<T: Scalar>(s: &GeometricAtoms<T>, w0: T, w1: T, a: T, a_closed: bool, b: T, b_closed: bool) -> Ext<T> {
    let Some(k0) = s.first_index_after(a, a_closed) else {
        return Ext::zero();
    };
    let k1 = if b.is_finite() && !(approx_eq(b, s.limit()) && !b_closed) {
        match s.first_index_after(b, !b_closed) {
            Some(k) if k <= k0 => return Ext::zero(),
            Some(k) => Some(k - 1),
            None => None,
        }
    } else {
        None
    };
    if let Some(k1) = k1 {
        let mut acc = T::zero();
        for k in k0..=k1 {
            acc = acc + (w0 + w1 * s.position(k)) * s.mass_at(k);
        }
        return Ext::finite(acc);
    }
    let (rho, q) = (s.mass_ratio, s.ratio);
    if q == T::one() {
        let a0 = w0 + w1 * s.start;
        let a1 = w1 * s.gap;
        if rho >= T::one() {
            return if a0 == T::zero() && a1 == T::zero() { Ext::zero() } else { Ext::inf() };
        }
        let k = lit::<T>(k0 as f64);
        let rk = rho.powf(k);
        let s0 = rk / (T::one() - rho);
        let s1 = rk * (k * (T::one() - rho) + rho) / ((T::one() - rho) * (T::one() - rho));
        return Ext::finite(s.mass * (a0 * s0 + a1 * s1));
    }
    // x_k = P - Q q^k
    let qq = s.gap / (T::one() - q);
    let pp = s.start + qq;
    let mut a0 = w0 + w1 * pp;
    if a0.abs() <= lit::<T>(1e-12) * (w0.abs() + (w1 * pp).abs()) {
        a0 = T::zero();
    }
    let a1 = -w1 * qq;
    let t0 = if a0 == T::zero() { Ext::zero() } else { geo_tail(rho, k0) };
    let t1 = if a1 == T::zero() { Ext::zero() } else { geo_tail(rho * q, k0) };
    if t0.divergent || t1.divergent {
        return Ext::inf();
    }
    Ext::finite(s.mass * (a0 * t0.value + a1 * t1.value))
}

/// `∫ (w0 + w1·x) m(dx)` over the region with the given end closedness.
fn weighted<T: Scalar>(m: &SpeedMeasure<T>, w0: T, w1: T, a: T, a_closed: bool, b: T, b_closed: bool) -> Ext<T> {
    let mut acc = Ext::zero();
    for at in m.atoms() {
        let lo = if a_closed { at.x >= a || approx_eq(at.x, a) } else { at.x > a && !approx_eq(at.x, a) };
        let hi = if b_closed { at.x <= b || approx_eq(at.x, b) } else { at.x < b && !approx_eq(at.x, b) };
        if lo && hi {
            acc = acc.add(Ext::finite((w0 + w1 * at.x) * at.mass));
        }
    }
    for p in m.densities() {
        acc = acc.add(piece_weighted(p, w0, w1, a, b));
    }
    for s in m.sequences() {
        acc = acc.add(sequence_weighted(s, w0, w1, a, a_closed, b, b_closed));
    }
    acc
}

fn certify<T: Scalar>(which: &'static str, e: Ext<T>) -> Result<T, BoundaryError> {
    if e.divergent {
        Ok(T::infinity())
    } else if e.value.is_finite() {
        Ok(e.value)
    } else {
        Err(BoundaryError::Inconclusive { which, value: e.value.to_f64().unwrap_or(f64::NAN) })
    }
}

/// `(σ̂, λ̂)` of the right end `r̂` of `m̂`, measured from the base `ê`.
pub fn sigma_lambda_right<T: Scalar>(m: &SpeedMeasure<T>, base: T) -> Result<(T, T), BoundaryError> {
    let r = m.interval.right;
    let sigma = if r.is_finite() {
        certify("sigma", weighted(m, r, -T::one(), base, false, r, false))?
    } else if m.mass_in(base, false, r, false) > T::zero() {
        T::infinity()
    } else {
        T::zero()
    };
    let lambda = certify("lambda", weighted(m, -base, T::one(), base, false, r, m.interval.right_included))?;
    Ok((sigma, lambda))
}

/// `(σ̂, λ̂)` of the left end `l̂`, by mirroring about the base.
pub fn sigma_lambda_left<T: Scalar>(m: &SpeedMeasure<T>, base: T) -> Result<(T, T), BoundaryError> {
    let l = m.interval.left;
    let sigma = if l.is_finite() {
        certify("sigma", weighted(m, -l, T::one(), l, false, base, false))?
    } else if m.mass_in(l, false, base, false) > T::zero() {
        T::infinity()
    } else {
        T::zero()
    };
    let lambda = certify("lambda", weighted(m, base, -T::one(), l, m.interval.left_included, base, false))?;
    Ok((sigma, lambda))
}

fn verdict<T: Scalar>(sigma: T, lambda: T, included: bool, end_atom: T) -> BoundaryClass<T> {
    let kind = match (sigma.is_finite(), lambda.is_finite()) {
        (true, true) => BoundaryKind::Regular,
        (true, false) => BoundaryKind::Exit,
        (false, true) => BoundaryKind::Entrance,
        (false, false) => BoundaryKind::Natural,
    };
    let (refinement, instantaneous) = if kind == BoundaryKind::Regular {
        if included {
            (Some(Refinement::Reflecting), Some(end_atom == T::zero()))
        } else {
            (Some(Refinement::Absorbing), None)
        }
    } else {
        (None, None)
    };
    BoundaryClass { kind, refinement, instantaneous, sigma_hat: sigma, lambda_hat: lambda }
}

/// Classification of the right end of the image problem.
pub fn classify_measure_right<T: Scalar>(m: &SpeedMeasure<T>, base: T) -> Result<BoundaryClass<T>, BoundaryError> {
    let (s, l) = sigma_lambda_right(m, base)?;
    let atom = if m.interval.right.is_finite() { m.atom_at(m.interval.right) } else { T::zero() };
    Ok(verdict(s, l, m.interval.right_included && m.interval.right.is_finite(), atom))
}

/// Classification of the left end of the image problem.
pub fn classify_measure_left<T: Scalar>(m: &SpeedMeasure<T>, base: T) -> Result<BoundaryClass<T>, BoundaryError> {
    let (s, l) = sigma_lambda_left(m, base)?;
    let atom = if m.interval.left.is_finite() { m.atom_at(m.interval.left) } else { T::zero() };
    Ok(verdict(s, l, m.interval.left_included && m.interval.left.is_finite(), atom))
}

/// `(σ̂(r̂), λ̂(r̂))` for a pair.
pub fn sigma_lambda<T: Scalar>(pair: &QuasiPair<T>) -> Result<(T, T), BoundaryError> {
    sigma_lambda_right(pair.image_measure(), pair.base_image())
}

/// Classification of `r` with respect to the pair (that of `r̂` for `m̂`).
pub fn classify<T: Scalar>(pair: &QuasiPair<T>) -> Result<BoundaryClass<T>, BoundaryError> {
    classify_measure_right(pair.image_measure(), pair.base_image())
}

/// Classification of the left end of a pair.
pub fn classify_left<T: Scalar>(pair: &QuasiPair<T>) -> Result<BoundaryClass<T>, BoundaryError> {
    classify_measure_left(pair.image_measure(), pair.base_image())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, Interval};

    type M = SpeedMeasure<f64>;

    #[test]
    fn lebesgue_half_line_is_natural() {
        let m = M::lebesgue(Interval::from_zero(f64::INFINITY, false), 0.0, f64::INFINITY).unwrap();
        let c = classify_measure_right(&m, 0.0).unwrap();
        assert_eq!(c.kind, BoundaryKind::Natural);
    }

    #[test]
    fn unit_interval_is_regular_reflecting() {
        let m = M::lebesgue(Interval::from_zero(1.0, true), 0.0, 1.0).unwrap();
        let c = classify_measure_right(&m, 0.0).unwrap();
        assert_eq!(c.kind, BoundaryKind::Regular);
        assert_eq!(c.refinement, Some(Refinement::Reflecting));
        assert_eq!(c.instantaneous, Some(true));
        assert!((c.sigma_hat - 0.5).abs() < 1e-15 && (c.lambda_hat - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_blowup_is_exit() {
        let p = DensityPiece { x0: 0.0, x1: 1.0, density: Density::Power { coeff: 1.0, center: 1.0, exponent: -1.5 } };
        let m = M::new(Interval::from_zero(1.0, false), vec![], vec![p], vec![]).unwrap();
        let c = classify_measure_right(&m, 0.0).unwrap();
        assert_eq!(c.kind, BoundaryKind::Exit);
        // σ = ∫ (1 - y)^{-1/2} dy = 2
        assert!((c.sigma_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sticky_end_is_not_instantaneous() {
        let m = M::new(
            Interval::from_zero(1.0, true),
            vec![Atom { x: 1.0, mass: 0.5 }],
            vec![DensityPiece::constant(0.0, 1.0, 1.0)],
            vec![],
        )
        .unwrap();
        let c = classify_measure_right(&m, 0.0).unwrap();
        assert_eq!(c.instantaneous, Some(false));
        assert!((c.lambda_hat - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_tails_match_partial_sums() {
        // atoms at 1 - 2^{-k}, masses 1.5^k: σ-weight 2^{-k} sums, λ diverges
        let s = GeometricAtoms { start: 0.0, gap: 0.5, ratio: 0.5, mass: 1.0, mass_ratio: 1.5, first: 1 };
        let m = M::new(Interval::from_zero(1.0, false), vec![], vec![], vec![s]).unwrap();
        let (sigma, lambda) = sigma_lambda_right(&m, 0.0).unwrap();
        let partial: f64 = (1..200).map(|k| 0.75f64.powi(k)).sum();
        assert!((sigma - partial).abs() < 1e-12);
        assert!(lambda.is_infinite());
    }
}

//! Speed measures: finite atom lists, piecewise densities and geometric atom
//! sequences on an interval of the real line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly;
use crate::quadrature::GaussLegendre;
use crate::scalar::{approx_eq, lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom at {x} has non-positive or non-finite mass {mass}")]
    BadAtomMass { x: f64, mass: f64 },
    #[error("point {x} lies outside the interval")]
    OutsideInterval { x: f64 },
    #[error("density piece ({x0}, {x1}) is empty or reversed")]
    BadPiece { x0: f64, x1: f64 },
    #[error("density piece ({x0}, {x1}) takes negative values")]
    NegativeDensity { x0: f64, x1: f64 },
    #[error("density pieces ({a0}, {a1}) and ({b0}, {b1}) overlap")]
    Overlap { a0: f64, a1: f64, b0: f64, b1: f64 },
    #[error("power density centre {center} lies inside its piece ({x0}, {x1})")]
    PowerCentreInside { center: f64, x0: f64, x1: f64 },
    #[error("geometric atom sequence has invalid parameters: {0}")]
    BadSequence(String),
    #[error("measure is not locally finite near {x}")]
    NotRadon { x: f64 },
}

fn f<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Interval `⟨left, right⟩` with inclusion flags; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub left: T,
    pub left_included: bool,
    pub right: T,
    pub right_included: bool,
}

impl<T: Scalar> Interval<T> {
    /// `[0, r⟩`.
    pub fn from_zero(right: T, right_included: bool) -> Self {
        Self { left: T::zero(), left_included: true, right, right_included: right_included && right.is_finite() }
    }

    pub fn contains(&self, x: T) -> bool {
        let lo = if self.left_included { x >= self.left || approx_eq(x, self.left) } else { x > self.left };
        let hi = if self.right_included { x <= self.right || approx_eq(x, self.right) } else { x < self.right };
        lo && hi && x.is_finite()
    }

    /// Closed hull membership with tolerance.
    pub fn in_hull(&self, x: T) -> bool {
        (x >= self.left || approx_eq(x, self.left)) && (x <= self.right || approx_eq(x, self.right))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub x: T,
    pub mass: T,
}

/// Density with respect to Lebesgue measure on a piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Density<T> {
    /// Polynomial in `x - origin` (see [`DensityPiece::origin`]).
    Poly(Vec<T>),
    /// `coeff · |x - center|^exponent`; the centre may sit on an end of the
    /// piece, where the density may blow up.
    Power { coeff: T, center: T, exponent: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece<T> {
    pub x0: T,
    pub x1: T,
    pub density: Density<T>,
}

impl<T: Scalar> DensityPiece<T> {
    pub fn poly(x0: T, x1: T, coeffs: Vec<T>) -> Self {
        Self { x0, x1, density: Density::Poly(coeffs) }
    }

    pub fn constant(x0: T, x1: T, c: T) -> Self {
        Self::poly(x0, x1, vec![c])
    }

    /// Expansion point of polynomial coefficients: `x0` when finite, else `x1`
    /// when finite, else `0`.
    pub fn origin(&self) -> T {
        if self.x0.is_finite() {
            self.x0
        } else if self.x1.is_finite() {
            self.x1
        } else {
            T::zero()
        }
    }

    pub fn eval(&self, x: T) -> T {
        match &self.density {
            Density::Poly(c) => poly::eval(c, x - self.origin()),
            Density::Power { coeff, center, exponent } => *coeff * (x - *center).abs().powf(*exponent),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.density {
            Density::Poly(c) => c.iter().all(|a| *a == T::zero()),
            Density::Power { coeff, .. } => *coeff == T::zero(),
        }
    }

    /// The piece restricted to `[a, b] ∩ [x0, x1]`, re-expanded about its new
    /// origin; `None` when the intersection is empty.
    pub fn restrict(&self, a: T, b: T) -> Option<Self> {
        let lo = a.max(self.x0);
        let hi = b.min(self.x1);
        if !(hi > lo) {
            return None;
        }
        let mut out = Self { x0: lo, x1: hi, density: self.density.clone() };
        if let Density::Poly(c) = &self.density {
            out.density = Density::Poly(poly::compose_affine(c, out.origin() - self.origin(), T::one()));
        }
        Some(out)
    }

    /// The piece translated by `d` (density `x ↦ p(x - d)`).
    pub fn shifted(&self, d: T) -> Self {
        let density = match &self.density {
            Density::Poly(c) if self.x0.is_finite() || self.x1.is_finite() => Density::Poly(c.clone()),
            Density::Poly(c) => Density::Poly(poly::compose_affine(c, -d, T::one())),
            Density::Power { coeff, center, exponent } => {
                Density::Power { coeff: *coeff, center: *center + d, exponent: *exponent }
            }
        };
        Self { x0: self.x0 + d, x1: self.x1 + d, density }
    }

    /// Mass of `[a, b] ∩ [x0, x1]`.
    pub fn mass(&self, a: T, b: T) -> T {
        let lo = a.max(self.x0);
        let hi = b.min(self.x1);
        if hi <= lo {
            return T::zero();
        }
        match &self.density {
            Density::Poly(c) => {
                if c.iter().all(|a| *a == T::zero()) {
                    return T::zero();
                }
                if !lo.is_finite() || !hi.is_finite() {
                    return T::infinity();
                }
                let o = self.origin();
                poly::definite(c, lo - o, hi - o)
            }
            Density::Power { coeff, center, exponent } => {
                if *coeff == T::zero() {
                    return T::zero();
                }
                let (t0, t1) = distances(*center, lo, hi);
                *coeff * power_integral(*exponent, t0, t1)
            }
        }
    }

    /// `∫ (w0 + w1·x) dm` over `[a, b] ∩ [x0, x1]`, with divergence reported
    /// as `+∞` whenever the weight is positive near the divergent end.
    pub fn weighted_mass(&self, w0: T, w1: T, a: T, b: T) -> T {
        let lo = a.max(self.x0);
        let hi = b.min(self.x1);
        if hi <= lo || self.is_zero() {
            return T::zero();
        }
        match &self.density {
            Density::Poly(c) => {
                if !lo.is_finite() || !hi.is_finite() {
                    return T::infinity();
                }
                let o = self.origin();
                // weight in the local variable: (w0 + w1·o) + w1·t
                let weighted = poly::mul(c, &[w0 + w1 * o, w1]);
                poly::definite(&weighted, lo - o, hi - o)
            }
            Density::Power { coeff, center, exponent } => {
                // x = center + sgn·t, weight = (w0 + w1·center) + w1·sgn·t
                let sgn = if lo >= *center { T::one() } else { -T::one() };
                let (t0, t1) = distances(*center, lo, hi);
                let a0 = w0 + w1 * *center;
                let a1 = w1 * sgn;
                let i0 = power_integral(*exponent, t0, t1);
                let i1 = power_integral(*exponent + T::one(), t0, t1);
                let term0 = if a0 == T::zero() { T::zero() } else { a0 * i0 };
                let term1 = if a1 == T::zero() { T::zero() } else { a1 * i1 };
                let v = term0 + term1;
                if v.is_nan() {
                    T::infinity()
                } else {
                    *coeff * v
                }
            }
        }
    }
}

/// Sorted distances from `center` of the endpoints of `[lo, hi]`, which lies
/// on one side of `center`.
fn distances<T: Scalar>(center: T, lo: T, hi: T) -> (T, T) {
    let a = (lo - center).abs();
    let b = (hi - center).abs();
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `∫_{t0}^{t1} t^p dt` for `0 ≤ t0 ≤ t1 ≤ ∞`, `+∞` when divergent.
pub fn power_integral<T: Scalar>(p: T, t0: T, t1: T) -> T {
    if t1 <= t0 {
        return T::zero();
    }
    let q = p + T::one();
    if q == T::zero() {
        if t0 == T::zero() || !t1.is_finite() {
            return T::infinity();
        }
        return (t1 / t0).ln();
    }
    if q > T::zero() {
        if !t1.is_finite() {
            return T::infinity();
        }
        (t1.powf(q) - t0.powf(q)) / q
    } else {
        if t0 == T::zero() {
            return T::infinity();
        }
        (t0.powf(q) - t1.powf(q)) / (-q)
    }
}

/// Atoms at `x_k = start + gap·(1 + ratio + … + ratio^{k-1})` with masses
/// `mass·mass_ratio^k`, for every `k ≥ first`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricAtoms<T> {
    pub start: T,
    pub gap: T,
    pub ratio: T,
    pub mass: T,
    pub mass_ratio: T,
    pub first: u32,
}

impl<T: Scalar> GeometricAtoms<T> {
    pub fn position(&self, k: u64) -> T {
        let kf = lit::<T>(k as f64);
        if self.ratio == T::one() {
            self.start + self.gap * kf
        } else {
            self.start + self.gap * (T::one() - self.ratio.powf(kf)) / (T::one() - self.ratio)
        }
    }

    pub fn mass_at(&self, k: u64) -> T {
        self.mass * self.mass_ratio.powf(lit(k as f64))
    }

    /// Accumulation point (`+∞` when `ratio ≥ 1`).
    pub fn limit(&self) -> T {
        if self.ratio < T::one() {
            self.start + self.gap / (T::one() - self.ratio)
        } else {
            T::infinity()
        }
    }

    /// Distance from the accumulation point, `gap·ratio^k/(1 - ratio)`; exact
    /// even when it is far below the resolution of `position`.
    pub fn distance_to_limit(&self, k: u64) -> T {
        self.gap * self.ratio.powf(lit(k as f64)) / (T::one() - self.ratio)
    }

    fn validate(&self) -> Result<(), MeasureError> {
        let ok = self.gap > T::zero()
            && self.ratio > T::zero()
            && self.mass > T::zero()
            && self.mass_ratio > T::zero()
            && self.start.is_finite()
            && self.gap.is_finite()
            && self.mass.is_finite();
        if ok {
            Ok(())
        } else {
            Err(MeasureError::BadSequence(format!("{self:?}")))
        }
    }

    /// Real-valued index with `position(k) = x`, `None` beyond the limit.
    fn index_of(&self, x: T) -> Option<T> {
        let d = x - self.start;
        if self.ratio == T::one() {
            return Some(d / self.gap);
        }
        let z = T::one() - d * (T::one() - self.ratio) / self.gap;
        if z <= T::zero() {
            return None;
        }
        Some(z.ln() / self.ratio.ln())
    }

    /// First index `k ≥ first` with `position(k) > x` (or `≥ x` when `closed`).
    pub fn first_index_after(&self, x: T, closed: bool) -> Option<u64> {
        let base = self.first as u64;
        let guess = match self.index_of(x) {
            None => return None,
            Some(k) if k.is_nan() => return None,
            Some(k) => {
                let k = k.floor().max(T::zero()).to_f64().unwrap_or(0.0);
                if k > 1e15 {
                    return None;
                }
                (k as u64).max(base)
            }
        };
        let k0 = guess.saturating_sub(2).max(base);
        (k0..k0 + 8).find(|&k| {
            let p = self.position(k);
            if closed {
                p >= x || approx_eq(p, x)
            } else {
                p > x && !approx_eq(p, x)
            }
        })
    }

    /// Sum of masses over indices `[k0, k1]`, `k1 = None` meaning `∞`.
    pub fn mass_sum(&self, k0: u64, k1: Option<u64>) -> T {
        if let Some(k1) = k1 {
            if k1 < k0 {
                return T::zero();
            }
        }
        let rho = self.mass_ratio;
        let r0 = rho.powf(lit(k0 as f64));
        match k1 {
            None if rho >= T::one() => T::infinity(),
            None => self.mass * r0 / (T::one() - rho),
            Some(k1) if rho == T::one() => self.mass * lit::<T>((k1 - k0 + 1) as f64),
            Some(k1) => self.mass * (r0 - rho.powf(lit((k1 + 1) as f64))) / (T::one() - rho),
        }
    }

    /// Mass of `(a, b]` (flags select open/closed ends).
    pub fn mass_in(&self, a: T, a_closed: bool, b: T, b_closed: bool) -> T {
        let Some(k0) = self.first_index_after(a, a_closed) else {
            return T::zero();
        };
        let k1 = if b.is_finite() {
            match self.first_index_after(b, !b_closed) {
                Some(0) => return T::zero(),
                Some(k) if k <= k0 => return T::zero(),
                Some(k) => Some(k - 1),
                None => None,
            }
        } else {
            None
        };
        self.mass_sum(k0, k1)
    }

    /// Atom mass exactly at `x` (with tolerance).
    pub fn atom_at(&self, x: T) -> T {
        match self.first_index_after(x, true) {
            Some(k) if approx_eq(self.position(k), x) => self.mass_at(k),
            _ => T::zero(),
        }
    }
}

/// Radon measure on an interval: atoms, density pieces and geometric atom
/// sequences. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMeasure<T> {
    pub interval: Interval<T>,
    atoms: Vec<Atom<T>>,
    densities: Vec<DensityPiece<T>>,
    sequences: Vec<GeometricAtoms<T>>,
}

impl<T: Scalar> SpeedMeasure<T> {
    pub fn new(
        interval: Interval<T>,
        mut atoms: Vec<Atom<T>>,
        mut densities: Vec<DensityPiece<T>>,
        sequences: Vec<GeometricAtoms<T>>,
    ) -> Result<Self, MeasureError> {
        for a in &atoms {
            if !(a.mass > T::zero()) || !a.mass.is_finite() {
                return Err(MeasureError::BadAtomMass { x: f(a.x), mass: f(a.mass) });
            }
            if !interval.in_hull(a.x) || !a.x.is_finite() {
                return Err(MeasureError::OutsideInterval { x: f(a.x) });
            }
        }
        atoms.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite atom positions"));
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if approx_eq(last.x, a.x) => last.mass = last.mass + a.mass,
                _ => merged.push(a),
            }
        }
        densities.retain(|p| !p.is_zero());
        densities.sort_by(|a, b| a.x0.partial_cmp(&b.x0).expect("ordered pieces"));
        for p in &densities {
            if !(p.x0 < p.x1) {
                return Err(MeasureError::BadPiece { x0: f(p.x0), x1: f(p.x1) });
            }
            if !interval.in_hull(p.x0) || !interval.in_hull(p.x1) {
                return Err(MeasureError::OutsideInterval { x: f(if interval.in_hull(p.x0) { p.x1 } else { p.x0 }) });
            }
            check_nonnegative(p)?;
        }
        for w in densities.windows(2) {
            if w[1].x0 < w[0].x1 && !approx_eq(w[1].x0, w[0].x1) {
                return Err(MeasureError::Overlap { a0: f(w[0].x0), a1: f(w[0].x1), b0: f(w[1].x0), b1: f(w[1].x1) });
            }
        }
        for s in &sequences {
            s.validate()?;
            let first = s.position(s.first as u64);
            if !interval.in_hull(first) {
                return Err(MeasureError::OutsideInterval { x: f(first) });
            }
            let lim = s.limit();
            if lim.is_finite() {
                if !interval.in_hull(lim) {
                    return Err(MeasureError::OutsideInterval { x: f(lim) });
                }
                let at_open_end = approx_eq(lim, interval.right) && !interval.right_included;
                if !at_open_end && s.mass_ratio >= T::one() {
                    return Err(MeasureError::NotRadon { x: f(lim) });
                }
            }
        }
        let m = Self { interval, atoms: merged, densities, sequences };
        m.check_radon()?;
        Ok(m)
    }

    /// Lebesgue measure on `[x0, x1]` within `interval`.
    pub fn lebesgue(interval: Interval<T>, x0: T, x1: T) -> Result<Self, MeasureError> {
        Self::new(interval, vec![], vec![DensityPiece::constant(x0, x1, T::one())], vec![])
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn densities(&self) -> &[DensityPiece<T>] {
        &self.densities
    }

    pub fn sequences(&self) -> &[GeometricAtoms<T>] {
        &self.sequences
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.densities.is_empty() && self.sequences.is_empty()
    }

    /// Purely atomic with finitely many atoms.
    pub fn is_finite_atomic(&self) -> bool {
        self.densities.is_empty() && self.sequences.is_empty()
    }

    fn check_radon(&self) -> Result<(), MeasureError> {
        // Non-integrable singularities are tolerated only at an excluded,
        // finite endpoint of the interval.
        for p in &self.densities {
            let ends = [
                (p.x0, self.interval.left, self.interval.left_included),
                (p.x1, self.interval.right, self.interval.right_included),
            ];
            for (idx, (x, end, incl)) in ends.into_iter().enumerate() {
                if !x.is_finite() {
                    continue;
                }
                let eps = (x.abs() + T::one()) * lit(1e-9);
                let (a, b) = if idx == 0 { (x, (x + eps).min(p.x1)) } else { ((x - eps).max(p.x0), x) };
                let m = p.mass(a, b);
                if !m.is_finite() && !(approx_eq(x, end) && !incl) {
                    return Err(MeasureError::NotRadon { x: f(x) });
                }
            }
        }
        Ok(())
    }

    /// Mass of the atom at `x`, including sequence atoms.
    pub fn atom_at(&self, x: T) -> T {
        let mut m = T::zero();
        if let Ok(i) = self.atoms.binary_search_by(|a| a.x.partial_cmp(&x).expect("finite")) {
            m = m + self.atoms[i].mass;
        } else {
            for a in &self.atoms {
                if approx_eq(a.x, x) {
                    m = m + a.mass;
                }
            }
        }
        for s in &self.sequences {
            m = m + s.atom_at(x);
        }
        m
    }

    /// Mass of the interval with endpoints `a < b` and the given closedness.
    pub fn mass_in(&self, a: T, a_closed: bool, b: T, b_closed: bool) -> T {
        if b < a {
            return T::zero();
        }
        let mut total = T::zero();
        for at in &self.atoms {
            let lo = if a_closed { at.x >= a || approx_eq(at.x, a) } else { at.x > a && !approx_eq(at.x, a) };
            let hi = if b_closed { at.x <= b || approx_eq(at.x, b) } else { at.x < b && !approx_eq(at.x, b) };
            if lo && hi {
                total = total + at.mass;
            }
        }
        for p in &self.densities {
            total = total + p.mass(a, b);
        }
        for s in &self.sequences {
            total = total + s.mass_in(a, a_closed, b, b_closed);
        }
        total
    }

    /// `m((a, b])`.
    pub fn mass(&self, a: T, b: T) -> T {
        self.mass_in(a, false, b, true)
    }

    /// Cumulative function `x ↦ m((left, x])`.
    pub fn cumulative(&self, x: T) -> T {
        self.mass_in(self.interval.left, false, x, true)
    }

    /// Total mass of the measure.
    pub fn total(&self) -> T {
        self.mass_in(self.interval.left, true, self.interval.right, true)
    }

    /// Density value at `x` (sum over pieces containing `x`).
    pub fn density_at(&self, x: T) -> T {
        self.densities.iter().filter(|p| x >= p.x0 && x <= p.x1).fold(T::zero(), |acc, p| acc + p.eval(x))
    }

    /// Topological support.
    pub fn support(&self) -> SupportSet<T> {
        let mut comps: Vec<(T, T)> = self.atoms.iter().map(|a| (a.x, a.x)).collect();
        for p in &self.densities {
            comps.push((p.x0, p.x1));
        }
        for s in &self.sequences {
            let lim = s.limit();
            if lim.is_finite() && self.interval.contains(lim) {
                comps.push((lim, lim));
            }
        }
        SupportSet::new(comps, self.sequences.clone())
    }

    /// `∫ g dm` over `[a, b]` (closed ends); densities by composite
    /// Gauss–Legendre on `n_panels` equal panels per piece.
    pub fn integrate<G: FnMut(T) -> T>(&self, a: T, b: T, n_panels: usize, g: &mut G) -> T {
        let gl = GaussLegendre::<T>::new(20);
        let mut acc = T::zero();
        for at in &self.atoms {
            if (at.x >= a || approx_eq(at.x, a)) && (at.x <= b || approx_eq(at.x, b)) {
                acc = acc + at.mass * g(at.x);
            }
        }
        for p in &self.densities {
            let lo = a.max(p.x0);
            let hi = b.min(p.x1);
            if hi <= lo || !lo.is_finite() || !hi.is_finite() {
                continue;
            }
            let h = (hi - lo) / lit(n_panels as f64);
            for k in 0..n_panels {
                let x0 = lo + h * lit(k as f64);
                let x1 = if k + 1 == n_panels { hi } else { x0 + h };
                acc = acc + gl.integrate(x0, x1, |x| p.eval(x) * g(x));
            }
        }
        for s in &self.sequences {
            if let Some(k0) = s.first_index_after(a, true) {
                let mut k = k0;
                loop {
                    let x = s.position(k);
                    if x > b && !approx_eq(x, b) {
                        break;
                    }
                    let term = s.mass_at(k) * g(x);
                    acc = acc + term;
                    if term.abs() <= T::epsilon() * acc.abs() * lit(1e-3) && k > k0 + 64 {
                        break;
                    }
                    k += 1;
                    if k > k0 + 1_000_000 {
                        break;
                    }
                }
            }
        }
        acc
    }
}

fn check_nonnegative<T: Scalar>(p: &DensityPiece<T>) -> Result<(), MeasureError> {
    let err = || MeasureError::NegativeDensity { x0: f(p.x0), x1: f(p.x1) };
    match &p.density {
        Density::Power { coeff, center, .. } => {
            if *coeff < T::zero() {
                return Err(err());
            }
            if *center > p.x0 && *center < p.x1 {
                return Err(MeasureError::PowerCentreInside { center: f(*center), x0: f(p.x0), x1: f(p.x1) });
            }
        }
        Density::Poly(c) => {
            let o = p.origin();
            // Unbounded pieces: the leading coefficient decides the sign at infinity.
            let lead = c.iter().rev().find(|a| **a != T::zero()).copied().unwrap_or_else(T::zero);
            let deg = c.iter().rposition(|a| *a != T::zero()).unwrap_or(0);
            if !p.x1.is_finite() && lead < T::zero() {
                return Err(err());
            }
            if !p.x0.is_finite() {
                let sign_at_minus_inf = if deg % 2 == 0 { lead } else { -lead };
                if sign_at_minus_inf < T::zero() {
                    return Err(err());
                }
            }
            let lo = if p.x0.is_finite() { p.x0 } else { p.x1 - T::one() };
            let hi = if p.x1.is_finite() { p.x1 } else { lo + T::one() };
            let lo = if p.x0.is_finite() { lo } else { lo.min(hi - lit(64.0)) };
            let hi = if p.x1.is_finite() { hi } else { hi.max(lo + lit(64.0)) };
            let scale = poly::abs_bound(c, (hi - o).abs().max((lo - o).abs()));
            let n = 256;
            for k in 0..=n {
                let x = lo + (hi - lo) * lit::<T>(k as f64) / lit::<T>(n as f64);
                if poly::eval(c, x - o) < -scale * lit::<T>(1e-12) {
                    return Err(err());
                }
            }
        }
    }
    Ok(())
}

/// Closed subset of the line given as sorted disjoint closed components (points
/// are degenerate components) plus geometric atom sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet<T> {
    pub components: Vec<(T, T)>,
    pub sequences: Vec<GeometricAtoms<T>>,
}

impl<T: Scalar> SupportSet<T> {
    pub fn new(mut comps: Vec<(T, T)>, sequences: Vec<GeometricAtoms<T>>) -> Self {
        comps.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("ordered components"));
        let mut out: Vec<(T, T)> = Vec::with_capacity(comps.len());
        for (a, b) in comps {
            match out.last_mut() {
                Some(last) if a <= last.1 || approx_eq(a, last.1) => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { components: out, sequences }
    }

    pub fn contains(&self, x: T) -> bool {
        self.components.iter().any(|&(a, b)| (x >= a || approx_eq(x, a)) && (x <= b || approx_eq(x, b)))
            || self.sequences.iter().any(|s| s.atom_at(x) > T::zero())
    }

    /// Whether some support point lies strictly between `a` and `b`.
    pub fn meets_open(&self, a: T, b: T) -> bool {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let inside = |x: T| x > lo && x < hi && !approx_eq(x, lo) && !approx_eq(x, hi);
        for &(c0, c1) in &self.components {
            // Overlap of [c0, c1] with the open interval (lo, hi).
            let l = c0.max(lo);
            let r = c1.min(hi);
            if r > l && !approx_eq(r, l) {
                return true;
            }
            if inside(c0) || inside(c1) {
                return true;
            }
        }
        for s in &self.sequences {
            if let Some(k) = s.first_index_after(lo, false) {
                if inside(s.position(k)) {
                    return true;
                }
            }
        }
        false
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty() && self.sequences.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval<f64> {
        Interval::from_zero(1.0, true)
    }

    #[test]
    fn cumulative_is_right_continuous() {
        let m = SpeedMeasure::new(unit(), vec![Atom { x: 0.5, mass: 2.0 }], vec![DensityPiece::constant(0.0, 1.0, 1.0)], vec![])
            .unwrap();
        assert!((m.cumulative(0.5) - 2.5).abs() < 1e-14);
        assert!((m.mass_in(0.0, false, 0.5, false) - 0.5).abs() < 1e-14);
        assert!((m.total() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_density() {
        let e = SpeedMeasure::new(unit(), vec![], vec![DensityPiece::poly(0.0, 1.0, vec![-0.1, 1.0])], vec![]);
        assert!(matches!(e, Err(MeasureError::NegativeDensity { .. })));
    }

    #[test]
    fn power_density_masses() {
        // (1 - y)^{-3/2} on (0, 1): mass of (0, 1 - d] is 2(d^{-1/2} - 1)
        let p = DensityPiece { x0: 0.0, x1: 1.0, density: Density::Power { coeff: 1.0, center: 1.0, exponent: -1.5 } };
        let d: f64 = 0.01;
        assert!((p.mass(0.0, 1.0 - d) - 2.0 * (d.powf(-0.5) - 1.0)).abs() < 1e-10);
        assert!(p.mass(0.0, 1.0).is_infinite());
        let m = SpeedMeasure::new(Interval::from_zero(1.0, false), vec![], vec![p.clone()], vec![]);
        assert!(m.is_ok());
        let bad = SpeedMeasure::new(Interval::from_zero(2.0, false), vec![], vec![p], vec![]);
        assert!(matches!(bad, Err(MeasureError::NotRadon { .. })));
    }

    #[test]
    fn geometric_sequence_masses() {
        // x_k = 1 - 2^{-k}, k ≥ 1, masses 2^{-k}
        let s = GeometricAtoms::<f64> { start: 0.0, gap: 0.5, ratio: 0.5, mass: 1.0, mass_ratio: 0.5, first: 1 };
        assert!((s.position(1) - 0.5).abs() < 1e-15);
        assert!((s.position(3) - 0.875).abs() < 1e-15);
        assert!((s.mass_in(0.0, false, 1.0, false) - 1.0).abs() < 1e-14);
        assert!((s.mass_in(0.5, false, 0.875, true) - 0.375).abs() < 1e-14);
        assert!((s.atom_at(0.75) - 0.25).abs() < 1e-15);
        assert_eq!(s.atom_at(0.7), 0.0);
    }

    #[test]
    fn support_merges_touching_pieces() {
        let m = SpeedMeasure::new(
            Interval::from_zero(4.0, true),
            vec![Atom { x: 2.0, mass: 1.0 }],
            vec![DensityPiece::constant(0.0, 1.0, 1.0), DensityPiece::constant(1.0, 1.5, 2.0)],
            vec![],
        )
        .unwrap();
        let s = m.support();
        assert_eq!(s.components, vec![(0.0, 1.5), (2.0, 2.0)]);
        assert!(s.meets_open(1.4, 3.0));
        assert!(!s.meets_open(1.5, 2.0));
    }
}

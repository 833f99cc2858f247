//! Validated scale/speed pairs, the image measure on the scale axis, and the
//! maps between the original and image coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Atom, Density, DensityPiece, GeometricAtoms, Interval, MeasureError, SpeedMeasure, SupportSet};
use crate::poly;
use crate::scalar::{approx_eq, lit, Scalar};
use crate::scale::{Jump, ScaleError, ScaleFunction, Segment, Strictness};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairError {
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("scale domain [{s0}, {s1}] differs from the measure interval [{m0}, {m1}]")]
    DomainMismatch { s0: f64, s1: f64, m0: f64, m1: f64 },
    #[error("left end: s(l) = s(l+) = 0 < s(x) fails")]
    LeftScale,
    #[error("left end: m({{l}}) > 0")]
    LeftAtom,
    #[error("left end: m does not charge every neighbourhood (l, x)")]
    LeftUncharged,
    #[error("right end: s constant near r")]
    RightFlat,
    #[error("right end: s(r-) differs from s(r)")]
    RightJump,
    #[error("right end: m does not charge every neighbourhood (r - e, r)")]
    RightUncharged,
    #[error("r included but s(r) = inf")]
    RightScaleInfinite,
    #[error("r included but m([l, r]) = inf")]
    RightMassInfinite,
    #[error("geometric atom sequence starting at {x} is not contained in one scale segment")]
    SequenceAcrossSegments { x: f64 },
    #[error("base point {x} is not an interior point of the interval")]
    BadBase { x: f64 },
    #[error("point {x} is not in the image set")]
    NotInImage { x: f64 },
    #[error("operation requires strictness class {expected:?}, pair is {actual:?}")]
    WrongClass { expected: Strictness, actual: Strictness },
    #[error("flat interval ({a}, {b}) violates s(a) = s(a+), s(b-) = s(b)")]
    DarningCondition { a: f64, b: f64 },
}

fn f<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Candidate chosen by `s̃` when both one-sided limits lie in the image support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StildePolicy {
    #[default]
    Left,
    Right,
}

/// Relaxations and choices applied at validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOptions<T> {
    /// Permit an atom at a finite left end (birth–death chains).
    pub allow_left_atom: bool,
    /// Skip the requirement that `m` charges every neighbourhood of the ends.
    pub relaxed_support: bool,
    /// Base point `e` in original coordinates; `None` selects the left end
    /// (or `0` when the left end is `-∞`).
    pub base: Option<T>,
    pub stilde_policy: StildePolicy,
}

impl<T: Scalar> Default for PairOptions<T> {
    fn default() -> Self {
        Self { allow_left_atom: false, relaxed_support: false, base: None, stilde_policy: StildePolicy::Left }
    }
}

/// Closure of `s(I)` as sorted closed components, with end membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSet<T> {
    pub components: Vec<(T, T)>,
    pub left: T,
    pub left_included: bool,
    pub right: T,
    pub right_included: bool,
}

impl<T: Scalar> ImageSet<T> {
    pub fn contains(&self, y: T) -> bool {
        if approx_eq(y, self.right) {
            return self.right_included;
        }
        if approx_eq(y, self.left) {
            return self.left_included;
        }
        self.components.iter().any(|&(a, b)| (y >= a || approx_eq(y, a)) && (y <= b || approx_eq(y, b)))
    }

    /// Open gaps of the hull not covered by the image.
    pub fn gaps(&self) -> Vec<(T, T)> {
        self.components.windows(2).map(|w| (w[0].1, w[1].0)).collect()
    }
}

/// Image of a point of `Î` under the merge map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MergePoint<T> {
    Point(T),
    /// Abstract point standing for the `n`-th flat interval.
    Flat(usize),
}

/// A validated pair with its image measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPair<T> {
    scale: ScaleFunction<T>,
    measure: SpeedMeasure<T>,
    image: SpeedMeasure<T>,
    image_set: ImageSet<T>,
    strictness: Strictness,
    base: T,
    base_image: T,
    options: PairOptions<T>,
}

/// Checks every pair condition and builds the image measure.
pub fn validate_pair<T: Scalar>(
    scale: ScaleFunction<T>,
    measure: SpeedMeasure<T>,
    options: PairOptions<T>,
) -> Result<QuasiPair<T>, PairError> {
    let iv = measure.interval;
    let (lo, hi) = (scale.lower(), scale.upper());
    if !approx_eq(lo, iv.left) || !approx_eq(hi, iv.right) {
        return Err(PairError::DomainMismatch { s0: f(lo), s1: f(hi), m0: f(iv.left), m1: f(iv.right) });
    }
    let segs = scale.segments();
    let first = segs[0];
    let last = *segs.last().expect("non-empty");
    if iv.left.is_finite() {
        let zero = T::zero();
        if !approx_eq(scale.eval(iv.left), zero) || !approx_eq(scale.right_limit(iv.left), zero) || first.is_flat() {
            return Err(PairError::LeftScale);
        }
        if !options.allow_left_atom && measure.atom_at(iv.left) > T::zero() {
            return Err(PairError::LeftAtom);
        }
        if !options.relaxed_support && !charges_right_of(&measure, iv.left) {
            return Err(PairError::LeftUncharged);
        }
    } else if first.is_flat() {
        return Err(PairError::LeftScale);
    }
    if last.is_flat() {
        return Err(PairError::RightFlat);
    }
    if iv.right.is_finite() {
        if let Some(j) = scale.jump_at(iv.right) {
            if !approx_eq(j.left, j.value) {
                return Err(PairError::RightJump);
            }
        }
    }
    if !options.relaxed_support && !charges_left_of(&measure, iv.right) {
        return Err(PairError::RightUncharged);
    }
    if iv.right_included {
        if !scale.eval(iv.right).is_finite() {
            return Err(PairError::RightScaleInfinite);
        }
        if !measure.total().is_finite() {
            return Err(PairError::RightMassInfinite);
        }
    }
    let image = push_forward(&scale, &measure)?;
    let image_set = image_set(&scale, &iv);
    let base = match options.base {
        Some(e) => e,
        None if iv.left.is_finite() => iv.left,
        None => T::zero(),
    };
    if !(iv.in_hull(base) && base.is_finite()) {
        return Err(PairError::BadBase { x: f(base) });
    }
    let base_image = adjust_base(&image, scale.eval(base));
    Ok(QuasiPair { strictness: scale.strictness(), scale, measure, image, image_set, base, base_image, options })
}

/// Moves a base point off an atom of the image measure, to the middle of the
/// next atom-free stretch.
fn adjust_base<T: Scalar>(image: &SpeedMeasure<T>, e: T) -> T {
    if image.atom_at(e) == T::zero() {
        return e;
    }
    let mut next = image.interval.right;
    for a in image.atoms() {
        if a.x > e && !approx_eq(a.x, e) {
            next = next.min(a.x);
            break;
        }
    }
    for p in image.densities() {
        if p.x1 > e && !approx_eq(p.x1, e) {
            next = next.min(p.x0.max(e));
        }
    }
    if !next.is_finite() || approx_eq(next, e) {
        e + T::one()
    } else {
        (e + next) * lit(0.5)
    }
}

fn charges_right_of<T: Scalar>(m: &SpeedMeasure<T>, x: T) -> bool {
    m.densities().iter().any(|p| approx_eq(p.x0, x) || (p.x0 < x && p.x1 > x))
}

fn charges_left_of<T: Scalar>(m: &SpeedMeasure<T>, x: T) -> bool {
    m.densities().iter().any(|p| approx_eq(p.x1, x) || (p.x1 > x && p.x0 < x))
        || m.sequences().iter().any(|s| approx_eq(s.limit(), x) || (!x.is_finite() && !s.limit().is_finite()))
}

fn image_set<T: Scalar>(scale: &ScaleFunction<T>, iv: &Interval<T>) -> ImageSet<T> {
    let mut comps: Vec<(T, T)> = scale.segments().iter().map(|s| s.image()).collect();
    for j in scale.jumps() {
        comps.push((j.value, j.value));
    }
    let set = SupportSet::new(comps, vec![]);
    let left = scale.eval(iv.left);
    let left = if left.is_nan() { scale.segments()[0].eval(iv.left) } else { left };
    let right = scale.left_limit(iv.right);
    let right = if right.is_nan() { scale.segments().last().expect("non-empty").eval(iv.right) } else { right };
    ImageSet { components: set.components, left, left_included: iv.left_included, right, right_included: iv.right_included }
}

/// Pushes a density piece forward under one strictly increasing segment.
fn push_piece<T: Scalar>(q: &DensityPiece<T>, seg: &Segment<T>) -> DensityPiece<T> {
    let x0 = seg.eval(q.x0);
    let x1 = seg.eval(q.x1);
    let mut out = DensityPiece { x0, x1, density: q.density.clone() };
    match &q.density {
        Density::Poly(c) => {
            let o = q.origin();
            let oh = out.origin();
            let shift = (oh - seg.c0) / seg.c1 - o;
            let composed = poly::compose_affine(c, shift, T::one() / seg.c1);
            out.density = Density::Poly(poly::scale(&composed, T::one() / seg.c1));
        }
        Density::Power { coeff, center, exponent } => {
            out.density = Density::Power {
                coeff: *coeff * seg.c1.powf(-(*exponent + T::one())),
                center: seg.c0 + seg.c1 * *center,
                exponent: *exponent,
            };
        }
    }
    out
}

/// Image measure of `m` under `s`.
pub fn push_forward<T: Scalar>(scale: &ScaleFunction<T>, m: &SpeedMeasure<T>) -> Result<SpeedMeasure<T>, PairError> {
    let mut atoms: Vec<Atom<T>> = m.atoms().iter().map(|a| Atom { x: scale.eval(a.x), mass: a.mass }).collect();
    let mut pieces = Vec::new();
    for p in m.densities() {
        for seg in scale.segments() {
            let Some(q) = p.restrict(seg.x0, seg.x1) else { continue };
            if seg.is_flat() {
                let mass = q.mass(q.x0, q.x1);
                if !mass.is_finite() {
                    return Err(MeasureError::NotRadon { x: f(seg.c0) }.into());
                }
                if mass > T::zero() {
                    atoms.push(Atom { x: seg.c0, mass });
                }
            } else {
                pieces.push(push_piece(&q, seg));
            }
        }
    }
    let mut seqs = Vec::new();
    for s in m.sequences() {
        let x0 = s.position(s.first as u64);
        let lim = s.limit();
        let seg = scale
            .segments()
            .iter()
            .find(|g| (x0 >= g.x0 || approx_eq(x0, g.x0)) && (lim <= g.x1 || approx_eq(lim, g.x1)) && x0 < g.x1)
            .ok_or(PairError::SequenceAcrossSegments { x: f(x0) })?;
        if seg.is_flat() {
            let mass = s.mass_sum(s.first as u64, None);
            if !mass.is_finite() {
                return Err(MeasureError::NotRadon { x: f(seg.c0) }.into());
            }
            atoms.push(Atom { x: seg.c0, mass });
        } else {
            seqs.push(GeometricAtoms { start: seg.eval(s.start), gap: seg.c1 * s.gap, ..*s });
        }
    }
    let iv = m.interval;
    let left = scale.segments()[0].eval(iv.left);
    let left = if iv.left.is_finite() { scale.eval(iv.left).min(left) } else { left };
    let right = scale.segments().last().expect("non-empty").eval(iv.right);
    let interval = Interval { left, left_included: iv.left_included, right, right_included: iv.right_included };
    Ok(SpeedMeasure::new(interval, atoms, pieces, seqs)?)
}

/// Supports `F`, `F̂` and the points of `F` whose image misses `F̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supports<T> {
    pub f: SupportSet<T>,
    pub f_hat: SupportSet<T>,
    /// `F ∖ Ḟ`: always a finite list of jump points here.
    pub excluded: Vec<T>,
    /// `s̃` on the excluded points, in the same order.
    pub stilde_excluded: Vec<T>,
}

impl<T: Scalar> Supports<T> {
    pub fn in_fdot(&self, x: T) -> bool {
        self.f.contains(x) && !self.excluded.iter().any(|e| approx_eq(*e, x))
    }
}

/// Side of a split point in the completed space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Center,
    Right,
}

/// Point of the split completion: `x` itself, or one of its one-sided copies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPoint<T> {
    pub x: T,
    pub side: Side,
}

impl<T: Scalar> SplitPoint<T> {
    pub fn center(x: T) -> Self {
        Self { x, side: Side::Center }
    }
}

/// Split completion of `I` along the jumps of the scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpace<T> {
    scale: ScaleFunction<T>,
    image_set: ImageSet<T>,
    right: T,
    right_included: bool,
}

impl<T: Scalar> SplitSpace<T> {
    /// Distinct copies of `x` (one at continuity points).
    pub fn copies(&self, x: T) -> Vec<SplitPoint<T>> {
        let mut out = Vec::new();
        if let Some(j) = self.scale.jump_at(x) {
            if !approx_eq(j.left, j.value) {
                out.push(SplitPoint { x, side: Side::Left });
            }
            out.push(SplitPoint { x, side: Side::Center });
            if !approx_eq(j.right, j.value) {
                out.push(SplitPoint { x, side: Side::Right });
            }
        } else if !(approx_eq(x, self.right) && !self.right_included) {
            out.push(SplitPoint::center(x));
        }
        out
    }

    /// `s*`.
    pub fn s_star(&self, p: SplitPoint<T>) -> T {
        match p.side {
            Side::Left => self.scale.left_limit(p.x),
            Side::Center => self.scale.eval(p.x),
            Side::Right => self.scale.right_limit(p.x),
        }
    }

    /// `r*`, the inverse of `s*`.
    pub fn r_star(&self, y: T) -> Result<SplitPoint<T>, PairError> {
        if !self.image_set.contains(y) {
            return Err(PairError::NotInImage { x: f(y) });
        }
        for j in self.scale.jumps() {
            if approx_eq(y, j.value) {
                return Ok(SplitPoint { x: j.x, side: Side::Center });
            }
            if approx_eq(y, j.left) {
                return Ok(SplitPoint { x: j.x, side: Side::Left });
            }
            if approx_eq(y, j.right) {
                return Ok(SplitPoint { x: j.x, side: Side::Right });
            }
        }
        self.scale.preimage(y).map(SplitPoint::center).ok_or(PairError::NotInImage { x: f(y) })
    }
}

/// Flats collapsed to single points, giving a strictly increasing scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DarnedSpace<T> {
    /// `(a_n, b_n, C_n, x#_n)`.
    flats: Vec<(T, T, T, T)>,
    pair: QuasiPair<T>,
}

impl<T: Scalar> DarnedSpace<T> {
    /// Darned coordinate of an original point.
    pub fn to_darned(&self, x: T) -> T {
        let mut shift = T::zero();
        for &(a, b, _, xs) in &self.flats {
            if (x >= a || approx_eq(x, a)) && (x <= b || approx_eq(x, b)) {
                return xs;
            }
            if x > b {
                shift = shift + (b - a);
            }
        }
        x - shift
    }

    /// Abstract point `x#_n` of the `n`-th flat.
    pub fn flat_point(&self, n: usize) -> T {
        self.flats[n].3
    }

    /// The darned pair `(s#, m#)`, strictly increasing.
    pub fn pair(&self) -> &QuasiPair<T> {
        &self.pair
    }
}

impl<T: Scalar> QuasiPair<T> {
    pub fn scale(&self) -> &ScaleFunction<T> {
        &self.scale
    }

    pub fn measure(&self) -> &SpeedMeasure<T> {
        &self.measure
    }

    /// Image measure `m̂` on the hull of `Î`.
    pub fn image_measure(&self) -> &SpeedMeasure<T> {
        &self.image
    }

    pub fn image_set(&self) -> &ImageSet<T> {
        &self.image_set
    }

    pub fn strictness(&self) -> Strictness {
        self.strictness
    }

    pub fn options(&self) -> &PairOptions<T> {
        &self.options
    }

    /// Base point `e` in original coordinates.
    pub fn base(&self) -> T {
        self.base
    }

    /// Base point `ê` of the image problem (never an atom of `m̂`).
    pub fn base_image(&self) -> T {
        self.base_image
    }

    /// `r̂`.
    pub fn r_hat(&self) -> T {
        self.image.interval.right
    }

    /// `l̂`.
    pub fn l_hat(&self) -> T {
        self.image.interval.left
    }

    /// Merge map `Î → I`; flat values map to their abstract point.
    pub fn merge_map(&self, y: T) -> Result<MergePoint<T>, PairError> {
        if !self.image_set.contains(y) {
            return Err(PairError::NotInImage { x: f(y) });
        }
        for (n, fl) in self.scale.flats().iter().enumerate() {
            if approx_eq(fl.value, y) {
                return Ok(MergePoint::Flat(n));
            }
        }
        self.scale.preimage(y).map(MergePoint::Point).ok_or(PairError::NotInImage { x: f(y) })
    }

    pub fn supports(&self) -> Supports<T> {
        let fs = self.measure.support();
        let fh = self.image.support();
        let mut excluded = Vec::new();
        let mut stilde = Vec::new();
        for j in self.scale.jumps() {
            if !fs.contains(j.x) || fh.contains(j.value) {
                continue;
            }
            let left_ok = fh.contains(j.left);
            let right_ok = fh.contains(j.right);
            let pick = match (left_ok, right_ok, self.options.stilde_policy) {
                (true, true, StildePolicy::Left) | (true, false, _) => j.left,
                (true, true, StildePolicy::Right) | (false, true, _) => j.right,
                // Cannot happen for a support point; keep the value itself.
                (false, false, _) => j.value,
            };
            excluded.push(j.x);
            stilde.push(pick);
        }
        Supports { f: fs, f_hat: fh, excluded, stilde_excluded: stilde }
    }

    /// Modified scale `s̃` on `F`.
    pub fn stilde(&self, supports: &Supports<T>, x: T) -> T {
        for (e, v) in supports.excluded.iter().zip(&supports.stilde_excluded) {
            if approx_eq(*e, x) {
                return *v;
            }
        }
        self.scale.eval(x)
    }

    pub fn split_space(&self) -> Result<SplitSpace<T>, PairError> {
        if self.strictness == Strictness::NonStrict {
            return Err(PairError::WrongClass { expected: Strictness::StrictDiscontinuous, actual: self.strictness });
        }
        Ok(SplitSpace {
            scale: self.scale.clone(),
            image_set: self.image_set.clone(),
            right: self.measure.interval.right,
            right_included: self.measure.interval.right_included,
        })
    }

    pub fn darn_space(&self) -> Result<DarnedSpace<T>, PairError> {
        if self.strictness != Strictness::NonStrict {
            return Err(PairError::WrongClass { expected: Strictness::NonStrict, actual: self.strictness });
        }
        let flats = self.scale.flats();
        for fl in &flats {
            let ok_a = approx_eq(self.scale.eval(fl.a), fl.value);
            let ok_b = approx_eq(self.scale.eval(fl.b), fl.value);
            if !ok_a || !ok_b {
                return Err(PairError::DarningCondition { a: f(fl.a), b: f(fl.b) });
            }
        }
        let mut table = Vec::new();
        let mut shift = T::zero();
        for fl in &flats {
            table.push((fl.a, fl.b, fl.value, fl.a - shift));
            shift = shift + (fl.b - fl.a);
        }
        let shift_of =
            |x: T| -> T { table.iter().filter(|t| x >= t.1 || approx_eq(x, t.1)).fold(T::zero(), |acc, t| acc + (t.1 - t.0)) };
        // Scale.
        let mut segs = Vec::new();
        for s in self.scale.segments().iter().filter(|s| !s.is_flat()) {
            let d = shift_of(s.x0);
            segs.push(Segment { x0: s.x0 - d, x1: s.x1 - d, c0: s.c0 + s.c1 * d, c1: s.c1 });
        }
        let mut jumps: Vec<Jump<T>> = Vec::new();
        for j in self.scale.jumps() {
            let inside = table.iter().position(|t| approx_eq(j.x, t.0) || approx_eq(j.x, t.1));
            let x = match inside {
                Some(n) => table[n].3,
                None => j.x - shift_of(j.x),
            };
            match jumps.iter_mut().find(|k| approx_eq(k.x, x)) {
                Some(k) => {
                    k.left = k.left.min(j.left);
                    k.right = k.right.max(j.right);
                }
                None => jumps.push(Jump { x, ..*j }),
            }
        }
        for t in &table {
            if let Some(k) = jumps.iter_mut().find(|k| approx_eq(k.x, t.3)) {
                k.value = t.2;
            }
        }
        let scale = ScaleFunction::new(segs, jumps)?;
        // Measure.
        let in_flat = |x: T| table.iter().position(|t| (x >= t.0 || approx_eq(x, t.0)) && (x <= t.1 || approx_eq(x, t.1)));
        let mut atoms = Vec::new();
        for a in self.measure.atoms() {
            let x = match in_flat(a.x) {
                Some(n) => table[n].3,
                None => a.x - shift_of(a.x),
            };
            atoms.push(Atom { x, mass: a.mass });
        }
        let mut pieces = Vec::new();
        for p in self.measure.densities() {
            let mut cuts = vec![p.x0];
            for t in &table {
                if t.0 > p.x0 && t.0 < p.x1 {
                    cuts.push(t.0);
                }
                if t.1 > p.x0 && t.1 < p.x1 {
                    cuts.push(t.1);
                }
            }
            cuts.push(p.x1);
            for w in cuts.windows(2) {
                let Some(q) = p.restrict(w[0], w[1]) else { continue };
                let mid = if q.x0.is_finite() && q.x1.is_finite() {
                    (q.x0 + q.x1) * lit(0.5)
                } else if q.x0.is_finite() {
                    q.x0 + T::one()
                } else {
                    q.x1 - T::one()
                };
                match in_flat(mid) {
                    Some(n) => {
                        let mass = q.mass(q.x0, q.x1);
                        if mass > T::zero() {
                            atoms.push(Atom { x: table[n].3, mass });
                        }
                    }
                    None => pieces.push(q.shifted(-shift_of(mid))),
                }
            }
        }
        let mut seqs = Vec::new();
        for s in self.measure.sequences() {
            let x0 = s.position(s.first as u64);
            match in_flat(x0) {
                Some(n) => atoms.push(Atom { x: table[n].3, mass: s.mass_sum(s.first as u64, None) }),
                None => {
                    let d = shift_of(x0);
                    if d != shift_of(s.limit().min(self.measure.interval.right)) {
                        return Err(PairError::SequenceAcrossSegments { x: f(x0) });
                    }
                    seqs.push(GeometricAtoms { start: s.start - d, ..*s });
                }
            }
        }
        let iv = self.measure.interval;
        let interval = Interval { right: iv.right - shift, ..iv };
        let measure = SpeedMeasure::new(interval, atoms, pieces, seqs)?;
        let base = self.options.base.map(|e| match in_flat(e) {
            Some(n) => table[n].3,
            None => e - shift_of(e),
        });
        let pair = validate_pair(scale, measure, PairOptions { base, ..self.options })?;
        Ok(DarnedSpace { flats: table, pair })
    }
}

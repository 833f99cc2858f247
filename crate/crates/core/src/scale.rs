//! Piecewise affine, nondecreasing scale functions with jumps and flats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{approx_eq, definitely_less, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("scale has no segments")]
    Empty,
    #[error("segment ({x0}, {x1}) is empty or reversed")]
    BadSegment { x0: f64, x1: f64 },
    #[error("segment ({x0}, {x1}) is decreasing")]
    Decreasing { x0: f64, x1: f64 },
    #[error("segments do not tile the domain near {x}")]
    NotContiguous { x: f64 },
    #[error("scale is discontinuous at {x} without a declared jump")]
    UndeclaredJump { x: f64 },
    #[error("jump at {x} is not at a segment boundary")]
    JumpInsideSegment { x: f64 },
    #[error("jump at {x} is inconsistent with the adjacent segments or not ordered")]
    BadJump { x: f64 },
    #[error("flat intervals share the value {value}")]
    RepeatedFlatValue { value: f64 },
}

fn f<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `s(x) = c0 + c1·x` on the open interval `(x0, x1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub x0: T,
    pub x1: T,
    pub c0: T,
    pub c1: T,
}

impl<T: Scalar> Segment<T> {
    pub fn affine(x0: T, x1: T, c0: T, c1: T) -> Self {
        Self { x0, x1, c0, c1 }
    }

    pub fn flat(x0: T, x1: T, value: T) -> Self {
        Self { x0, x1, c0: value, c1: T::zero() }
    }

    pub fn is_flat(&self) -> bool {
        self.c1 == T::zero()
    }

    /// Affine formula, extended to the whole line (flats never produce `∞·0`).
    pub fn eval(&self, x: T) -> T {
        if self.is_flat() {
            self.c0
        } else {
            self.c0 + self.c1 * x
        }
    }

    /// Inverse of the affine formula.
    pub fn inverse(&self, y: T) -> T {
        (y - self.c0) / self.c1
    }

    pub fn image(&self) -> (T, T) {
        (self.eval(self.x0), self.eval(self.x1))
    }

    fn contains_open(&self, x: T) -> bool {
        x > self.x0 && x < self.x1 && !approx_eq(x, self.x0) && !approx_eq(x, self.x1)
    }
}

/// Discontinuity of the scale: `left = s(x-) ≤ value = s(x) ≤ right = s(x+)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump<T> {
    pub x: T,
    pub left: T,
    pub value: T,
    pub right: T,
}

/// Maximal interval `(a, b)` on which the scale equals `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flat<T> {
    pub a: T,
    pub b: T,
    pub value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strictness {
    ContinuousStrict,
    StrictDiscontinuous,
    NonStrict,
}

/// Nondecreasing scale function on the hull of its segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction<T> {
    segments: Vec<Segment<T>>,
    jumps: Vec<Jump<T>>,
}

impl<T: Scalar> ScaleFunction<T> {
    pub fn new(mut segments: Vec<Segment<T>>, mut jumps: Vec<Jump<T>>) -> Result<Self, ScaleError> {
        if segments.is_empty() {
            return Err(ScaleError::Empty);
        }
        segments.sort_by(|a, b| a.x0.partial_cmp(&b.x0).expect("ordered segments"));
        for s in &segments {
            if !(s.x0 < s.x1) {
                return Err(ScaleError::BadSegment { x0: f(s.x0), x1: f(s.x1) });
            }
            if s.c1 < T::zero() || !s.c1.is_finite() || !s.c0.is_finite() {
                return Err(ScaleError::Decreasing { x0: f(s.x0), x1: f(s.x1) });
            }
        }
        for w in segments.windows(2) {
            if !approx_eq(w[0].x1, w[1].x0) {
                return Err(ScaleError::NotContiguous { x: f(w[0].x1) });
            }
        }
        jumps.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("ordered jumps"));
        jumps.retain(|j| !(approx_eq(j.left, j.right) && approx_eq(j.left, j.value)));
        for j in &jumps {
            if !(j.left <= j.value && j.value <= j.right) || !definitely_less(j.left, j.right) {
                return Err(ScaleError::BadJump { x: f(j.x) });
            }
            if segments.iter().any(|s| s.contains_open(j.x)) {
                return Err(ScaleError::JumpInsideSegment { x: f(j.x) });
            }
        }
        // Merge adjacent flats carrying the same value.
        let mut merged: Vec<Segment<T>> = Vec::with_capacity(segments.len());
        for s in segments {
            match merged.last_mut() {
                Some(last)
                    if last.is_flat()
                        && s.is_flat()
                        && approx_eq(last.c0, s.c0)
                        && !jumps.iter().any(|j| approx_eq(j.x, s.x0)) =>
                {
                    last.x1 = s.x1
                }
                _ => merged.push(s),
            }
        }
        let scale = Self { segments: merged, jumps };
        scale.check_joins()?;
        let flats = scale.flats();
        for (i, a) in flats.iter().enumerate() {
            if flats[i + 1..].iter().any(|b| approx_eq(a.value, b.value)) {
                return Err(ScaleError::RepeatedFlatValue { value: f(a.value) });
            }
        }
        Ok(scale)
    }

    /// `s(x) = x` on `(x0, x1)`.
    pub fn identity(x0: T, x1: T) -> Self {
        Self { segments: vec![Segment::affine(x0, x1, T::zero(), T::one())], jumps: vec![] }
    }

    fn check_joins(&self) -> Result<(), ScaleError> {
        for w in self.segments.windows(2) {
            let x = w[0].x1;
            let from_left = w[0].eval(x);
            let from_right = w[1].eval(x);
            match self.jump_at(x) {
                Some(j) => {
                    if !approx_eq(j.left, from_left) || !approx_eq(j.right, from_right) {
                        return Err(ScaleError::BadJump { x: f(x) });
                    }
                }
                None => {
                    if !approx_eq(from_left, from_right) {
                        return Err(ScaleError::UndeclaredJump { x: f(x) });
                    }
                }
            }
        }
        let lo = self.lower();
        let hi = self.upper();
        for j in &self.jumps {
            let at_left_end = approx_eq(j.x, lo);
            let at_right_end = approx_eq(j.x, hi);
            let interior_join = self.segments.windows(2).any(|w| approx_eq(w[0].x1, j.x));
            if at_left_end {
                // Only s(l) may differ from s(l+) at the left end, never upwards.
                if !approx_eq(j.right, self.segments[0].eval(lo)) || j.value > j.right {
                    return Err(ScaleError::BadJump { x: f(j.x) });
                }
            } else if at_right_end {
                let last = self.segments.last().expect("non-empty");
                if !approx_eq(j.left, last.eval(hi)) || j.value < j.left {
                    return Err(ScaleError::BadJump { x: f(j.x) });
                }
            } else if !interior_join {
                return Err(ScaleError::JumpInsideSegment { x: f(j.x) });
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn jumps(&self) -> &[Jump<T>] {
        &self.jumps
    }

    /// Left end of the domain hull.
    pub fn lower(&self) -> T {
        self.segments[0].x0
    }

    /// Right end of the domain hull.
    pub fn upper(&self) -> T {
        self.segments.last().expect("non-empty").x1
    }

    pub fn jump_at(&self, x: T) -> Option<&Jump<T>> {
        self.jumps.iter().find(|j| approx_eq(j.x, x))
    }

    /// Index of the segment whose closure contains `x`, preferring the one
    /// to the right at a join.
    pub fn segment_index(&self, x: T) -> Option<usize> {
        let idx = self.segments.partition_point(|s| s.x1 <= x && !approx_eq(s.x1, x));
        if idx >= self.segments.len() {
            let last = self.segments.len() - 1;
            return if approx_eq(x, self.segments[last].x1) { Some(last) } else { None };
        }
        let s = &self.segments[idx];
        if x >= s.x0 || approx_eq(x, s.x0) {
            if approx_eq(x, s.x1) && idx + 1 < self.segments.len() {
                return Some(idx + 1);
            }
            Some(idx)
        } else {
            None
        }
    }

    /// `s(x)`.
    pub fn eval(&self, x: T) -> T {
        if let Some(j) = self.jump_at(x) {
            return j.value;
        }
        match self.segment_index(x) {
            Some(i) => {
                let s = &self.segments[i];
                if approx_eq(x, s.x0) {
                    s.eval(s.x0)
                } else if approx_eq(x, s.x1) {
                    s.eval(s.x1)
                } else {
                    s.eval(x)
                }
            }
            None => T::nan(),
        }
    }

    /// `s(x-)`.
    pub fn left_limit(&self, x: T) -> T {
        if let Some(j) = self.jump_at(x) {
            return j.left;
        }
        self.eval(x)
    }

    /// `s(x+)`.
    pub fn right_limit(&self, x: T) -> T {
        if let Some(j) = self.jump_at(x) {
            return j.right;
        }
        self.eval(x)
    }

    /// Maximal flat intervals.
    pub fn flats(&self) -> Vec<Flat<T>> {
        self.segments.iter().filter(|s| s.is_flat()).map(|s| Flat { a: s.x0, b: s.x1, value: s.c0 }).collect()
    }

    pub fn strictness(&self) -> Strictness {
        if self.segments.iter().any(|s| s.is_flat()) {
            Strictness::NonStrict
        } else if self.jumps.is_empty() {
            Strictness::ContinuousStrict
        } else {
            Strictness::StrictDiscontinuous
        }
    }

    /// Breakpoints of the representation (segment ends, finite only).
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = self.segments.iter().map(|s| s.x0).filter(|x| x.is_finite()).collect();
        let hi = self.upper();
        if hi.is_finite() {
            out.push(hi);
        }
        out
    }

    /// Preimage of `y` under a strictly increasing piece, or the jump point
    /// carrying `y` as one of its three values.
    pub fn preimage(&self, y: T) -> Option<T> {
        for j in &self.jumps {
            if approx_eq(y, j.left) || approx_eq(y, j.value) || approx_eq(y, j.right) {
                return Some(j.x);
            }
        }
        for s in &self.segments {
            let (a, b) = s.image();
            if s.is_flat() {
                continue;
            }
            if (y >= a || approx_eq(y, a)) && (y <= b || approx_eq(y, b)) {
                let x = s.inverse(y);
                return Some(x.max(s.x0).min(s.x1));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x` on `[0,1)`, value 2 at 1, `x + 2` on `(1, 2]`.
    fn two_piece() -> ScaleFunction<f64> {
        ScaleFunction::new(
            vec![Segment::affine(0.0, 1.0, 0.0, 1.0), Segment::affine(1.0, 2.0, 2.0, 1.0)],
            vec![Jump { x: 1.0, left: 1.0, value: 2.0, right: 3.0 }],
        )
        .unwrap()
    }

    #[test]
    fn evaluates_jump_triple() {
        let s = two_piece();
        assert_eq!(s.eval(1.0), 2.0);
        assert_eq!(s.left_limit(1.0), 1.0);
        assert_eq!(s.right_limit(1.0), 3.0);
        assert_eq!(s.eval(1.5), 3.5);
        assert_eq!(s.eval(0.25), 0.25);
        assert_eq!(s.strictness(), Strictness::StrictDiscontinuous);
        assert_eq!(s.preimage(3.5), Some(1.5));
        assert_eq!(s.preimage(2.0), Some(1.0));
    }

    #[test]
    fn rejects_undeclared_jump() {
        let e = ScaleFunction::new(vec![Segment::affine(0.0, 1.0, 0.0, 1.0), Segment::affine(1.0, 2.0, 2.0, 1.0)], vec![]);
        assert!(matches!(e, Err(ScaleError::UndeclaredJump { .. })));
    }

    #[test]
    fn merges_equal_flats() {
        let s = ScaleFunction::new(
            vec![
                Segment::affine(0.0, 1.0, 0.0, 1.0),
                Segment::flat(1.0, 1.5, 1.0),
                Segment::flat(1.5, 2.0, 1.0),
                Segment::affine(2.0, 3.0, -1.0, 1.0),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(s.flats(), vec![Flat { a: 1.0, b: 2.0, value: 1.0 }]);
        assert_eq!(s.strictness(), Strictness::NonStrict);
    }

    #[test]
    fn rejects_decreasing_segment() {
        let e = ScaleFunction::new(vec![Segment::affine(0.0, 1.0, 0.0, -1.0)], vec![]);
        assert!(matches!(e, Err(ScaleError::Decreasing { .. })));
    }
}

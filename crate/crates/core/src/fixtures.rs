//! Ready-made pairs used by the tests, the acceptance suite and the CLI.

use crate::measure::{Atom, DensityPiece, Interval, SpeedMeasure};
use crate::oracle::{BdChain, Truncation};
use crate::pair::{validate_pair, PairOptions, QuasiPair};
use crate::scale::{Jump, ScaleFunction, Segment};

/// Lebesgue measure on the line, `s(x) = x` for `x < 0` and `x + 2/κ` for
/// `x ≥ 0` (snapping-out Brownian motion).
pub fn snapping_out(kappa: f64) -> QuasiPair<f64> {
    let g = 2.0 / kappa;
    let s = ScaleFunction::new(
        vec![Segment::affine(f64::NEG_INFINITY, 0.0, 0.0, 1.0), Segment::affine(0.0, f64::INFINITY, g, 1.0)],
        vec![Jump { x: 0.0, left: 0.0, value: g, right: g }],
    )
    .expect("valid scale");
    let iv = Interval { left: f64::NEG_INFINITY, left_included: false, right: f64::INFINITY, right_included: false };
    let m = SpeedMeasure::lebesgue(iv, f64::NEG_INFINITY, f64::INFINITY).expect("valid measure");
    validate_pair(s, m, PairOptions::default()).expect("valid pair")
}

/// Lebesgue measure on `[0, 2]`, `s(x) = x` on `[0, 1)`, `s(1) = 2`,
/// `s(x) = x + 2` on `(1, 2]`: the image of `1` misses the image support.
pub fn gap_pair() -> QuasiPair<f64> {
    let s = ScaleFunction::new(
        vec![Segment::affine(0.0, 1.0, 0.0, 1.0), Segment::affine(1.0, 2.0, 2.0, 1.0)],
        vec![Jump { x: 1.0, left: 1.0, value: 2.0, right: 3.0 }],
    )
    .expect("valid scale");
    let m = SpeedMeasure::lebesgue(Interval::from_zero(2.0, true), 0.0, 2.0).expect("valid measure");
    validate_pair(s, m, PairOptions::default()).expect("valid pair")
}

/// Reflected (`right_included`) or absorbed Brownian motion on `[0, 1]`.
pub fn unit_interval(right_included: bool) -> QuasiPair<f64> {
    let m = SpeedMeasure::lebesgue(Interval::from_zero(1.0, right_included), 0.0, 1.0).expect("valid measure");
    validate_pair(ScaleFunction::identity(0.0, 1.0), m, PairOptions::default()).expect("valid pair")
}

/// Birth–death chain with `μ_k = 0.8^k`, `μ_k b_k = 1.5^k` on `k` states.
pub fn birth_death(k: usize, truncation: Truncation) -> (BdChain<f64>, QuasiPair<f64>) {
    let chain = BdChain::geometric(k, 0.8, 1.5, truncation);
    let pair = chain.pair().expect("valid chain pair");
    (chain, pair)
}

/// `I = [0, 3]`, `s(x) = x` on `[0, 1)`, jump at `1` to `1.5`/`2`, `s(x) = x + 1`
/// on `(1, 3]`, atoms at `0.5`, `1`, `2.5`.
pub fn three_atom_pair() -> QuasiPair<f64> {
    let s = ScaleFunction::new(
        vec![Segment::affine(0.0, 1.0, 0.0, 1.0), Segment::affine(1.0, 3.0, 1.0, 1.0)],
        vec![Jump { x: 1.0, left: 1.0, value: 1.5, right: 2.0 }],
    )
    .expect("valid scale");
    let m = SpeedMeasure::new(
        Interval::from_zero(3.0, true),
        vec![Atom { x: 0.5, mass: 0.7 }, Atom { x: 1.0, mass: 0.4 }, Atom { x: 2.5, mass: 1.1 }],
        vec![],
        vec![],
    )
    .expect("valid measure");
    validate_pair(s, m, PairOptions { relaxed_support: true, ..Default::default() }).expect("valid pair")
}

/// Five atoms on `[0, 4]` with a scale jump at `2`; both ends reflect.
pub fn five_atom_pair() -> QuasiPair<f64> {
    let s = ScaleFunction::new(
        vec![Segment::affine(0.0, 2.0, 0.0, 1.0), Segment::affine(2.0, 4.0, 0.5, 1.0)],
        vec![Jump { x: 2.0, left: 2.0, value: 2.25, right: 2.5 }],
    )
    .expect("valid scale");
    let atoms = vec![
        Atom { x: 0.4, mass: 0.6 },
        Atom { x: 1.2, mass: 0.9 },
        Atom { x: 2.0, mass: 0.5 },
        Atom { x: 2.9, mass: 0.8 },
        Atom { x: 3.6, mass: 0.7 },
    ];
    let m = SpeedMeasure::new(Interval::from_zero(4.0, true), atoms, vec![], vec![]).expect("valid measure");
    validate_pair(s, m, PairOptions { relaxed_support: true, ..Default::default() }).expect("valid pair")
}

/// Lebesgue on `[0, 3]` with a flat of `s` on `[1, 2]` carrying mass.
pub fn flat_pair() -> QuasiPair<f64> {
    let s = ScaleFunction::new(
        vec![Segment::affine(0.0, 1.0, 0.0, 1.0), Segment::flat(1.0, 2.0, 1.0), Segment::affine(2.0, 3.0, -1.0, 1.0)],
        vec![],
    )
    .expect("valid scale");
    let m = SpeedMeasure::new(
        Interval::from_zero(3.0, true),
        vec![Atom { x: 2.5, mass: 0.3 }],
        vec![DensityPiece::constant(0.0, 3.0, 1.0)],
        vec![],
    )
    .expect("valid measure");
    validate_pair(s, m, PairOptions::default()).expect("valid pair")
}

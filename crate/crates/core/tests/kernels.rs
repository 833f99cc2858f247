mod common;

use quasidiff::fixtures::{gap_pair, snapping_out, three_atom_pair, unit_interval};
use quasidiff::harmonic::SolveOptions;
use quasidiff::kernel::{resolvent_identity_check, Kernel, KernelError, PiecewiseFn, Regime};
use quasidiff::pair::SplitPoint;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn snapping_kernel(kappa: f64, alpha: f64) -> Kernel<f64> {
    let opts = SolveOptions { view: Some((-6.0, 6.0 + 2.0 / kappa)), ..Default::default() };
    Kernel::new(&snapping_out(kappa), alpha, Regime::Split, 1.0, &opts).unwrap()
}

#[test]
fn zero_function_has_zero_resolvent() {
    let p = unit_interval(true);
    let ka = Kernel::new(&p, 1.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).unwrap();
    let kb = Kernel::new(&p, 3.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).unwrap();
    let z = PiecewiseFn::zero();
    assert_eq!(ka.resolvent_apply(&z, SplitPoint::center(0.4)).unwrap(), 0.0);
    let r = resolvent_identity_check(&ka, &kb, &z, &[SplitPoint::center(0.2), SplitPoint::center(0.8)]).unwrap();
    assert!(r.factor.is_none());
    assert_eq!(r.residual, 0.0);
}

#[test]
fn constant_scales_linearly() {
    let k = Kernel::new(&three_atom_pair(), 0.7, Regime::Split, 1.0, &SolveOptions::default()).unwrap();
    let k2 = k.with_constant(2.0);
    for (x, y) in [(0.5, 0.5), (0.5, 2.5), (1.0, 2.5)] {
        assert!(rel(2.0 * k.eval_at(x, y).unwrap(), k2.eval_at(x, y).unwrap()) < 1e-15);
    }
}

#[test]
fn columns_are_harmonic_with_unit_kink() {
    let k = snapping_kernel(1.0, 1.3);
    let grid: Vec<f64> = (0..60).map(|i| -3.0 + 0.1 * i as f64).collect();
    let rep = k.harmonic_residual_check(0.7, &grid).unwrap();
    assert!(rep.max_residual < 1e-8, "{rep:?}");

    let k = Kernel::new(&three_atom_pair(), 0.9, Regime::Split, 1.0, &SolveOptions::default()).unwrap();
    let grid = [0.0, 0.5, 1.0, 1.5, 2.0, 3.5, 4.0];
    let rep = k.harmonic_residual_check(1.5, &grid).unwrap();
    assert!(rep.max_residual < 1e-10, "{rep:?}");
    assert!((rep.diagonal_jump.unwrap() + 1.0).abs() < 1e-10);
    let rep = k.with_constant(2.0).harmonic_residual_check(3.5, &grid).unwrap();
    assert!((rep.diagonal_jump.unwrap() + 2.0).abs() < 1e-10);
}

#[test]
fn boundary_relations() {
    let f = PiecewiseFn::constant(1.0);
    let k = Kernel::new(&unit_interval(true), 1.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).unwrap();
    let b = k.boundary_condition_check(&f).unwrap();
    assert!(b.left.unwrap().abs() < 1e-10 && b.right.unwrap().abs() < 1e-10, "{b:?}");
    let k = Kernel::new(&unit_interval(false), 1.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).unwrap();
    let b = k.boundary_condition_check(&f).unwrap();
    assert!(b.left.unwrap().abs() < 1e-10);
    assert!(b.right.is_none());
    // Absorbed: R1 vanishes towards the right end.
    assert!(k.resolvent_apply(&f, SplitPoint::center(1.0 - 1e-9)).unwrap().abs() < 1e-8);
    assert!(k.resolvent_apply(&f, SplitPoint::center(1.0)).is_err());
}

#[test]
fn stiff_snapping_out_is_brownian_motion() {
    let alpha = 0.8;
    let k = snapping_kernel(1e8, alpha);
    let w = (2.0 * alpha).sqrt();
    for (x, y) in [(-1.0f64, 0.5f64), (0.3, 1.7), (-2.0, -0.4), (0.0, 0.0)] {
        let want = (-w * (x - y).abs()).exp() / (2.0 * w);
        let got = k.eval_at(x, y).unwrap();
        assert!(rel(got, want) < 1e-6, "{x} {y}: {got} vs {want}");
    }
}

#[test]
fn snapping_out_resolvent_of_one() {
    for alpha in [0.5, 1.0, 2.0] {
        let k = snapping_kernel(1.0, alpha);
        for x in [-1.0, 0.0, 0.4] {
            let r = k.resolvent_apply(&PiecewiseFn::constant(1.0), SplitPoint::center(x)).unwrap();
            assert!(rel(r, 0.5 / alpha) < 1e-9, "α {alpha} x {x}: {r}");
        }
    }
}

#[test]
fn regimes_agree_off_the_jump() {
    let p = gap_pair();
    let opts = SolveOptions::default();
    let split = Kernel::new(&p, 1.1, Regime::Split, 1.0, &opts).unwrap();
    for regime in [Regime::Modified, Regime::Restricted] {
        let other = Kernel::new(&p, 1.1, regime, 1.0, &opts).unwrap();
        for (x, y) in [(0.2, 0.7), (0.5, 1.6), (1.4, 1.9)] {
            assert!(rel(split.eval_at(x, y).unwrap(), other.eval_at(x, y).unwrap()) < 1e-12);
        }
    }
}

#[test]
fn strict_regime_rejects_jumps() {
    let e = Kernel::new(&gap_pair(), 1.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default());
    assert!(matches!(e, Err(KernelError::Regime { .. })));
}

#[test]
fn kernel_is_symmetric_and_decays() {
    let k = snapping_kernel(0.5, 1.0);
    let a = k.eval_at(-0.5, 1.0).unwrap();
    assert_eq!(a, k.eval_at(1.0, -0.5).unwrap());
    assert!(k.eval_at(-0.5, 3.0).unwrap() < a);
    assert!(k.eval_at(-0.5, -0.5).unwrap() > a);
}

#[test]
fn probabilistic_resolvent_is_sub_markov() {
    let mut cases = vec![unit_interval(true), unit_interval(false), gap_pair(), three_atom_pair()];
    cases.extend((0..10).map(common::random_pair));
    let one = PiecewiseFn::constant(1.0);
    for pair in &cases {
        for alpha in [0.3, 1.0, 4.0] {
            let k = Kernel::new(pair, alpha, Regime::natural_for(pair.strictness()), 2.0, &common::solve_opts(pair)).unwrap();
            for p in k.state_grid(9) {
                let r = k.resolvent_apply(&one, p).unwrap();
                assert!(alpha * r <= 1.0 + 1e-8, "α {alpha} at {p:?}: {}", alpha * r);
            }
        }
    }
}

use quasidiff::fixtures::{gap_pair, three_atom_pair, unit_interval};
use quasidiff::harmonic::SolveOptions;
use quasidiff::kernel::{Kernel, PiecewiseFn, Regime};
use quasidiff::measure::{Atom, Interval, SpeedMeasure};
use quasidiff::pair::{validate_pair, PairOptions, SplitPoint};
use quasidiff::scale::ScaleFunction;
use quasidiff::simulate::{
    estimate_chain, estimate_timechange, occupation, path_property_audit, simulate_chain, simulate_timechange, SimOptions,
};

#[test]
fn single_atom_never_jumps() {
    let m = SpeedMeasure::new(Interval::from_zero(2.0, true), vec![Atom { x: 1.0, mass: 0.5 }], vec![], vec![]).unwrap();
    let p =
        validate_pair(ScaleFunction::identity(0.0, 2.0), m, PairOptions { relaxed_support: true, ..Default::default() }).unwrap();
    let paths = simulate_chain(&p, 1.0, 10.0, 20, 3).unwrap();
    for path in &paths {
        assert!(path.states.iter().all(|x| *x == 1.0));
        assert!(path.lifetime.is_none());
    }
}

#[test]
fn constant_function_on_conservative_chain() {
    let p = three_atom_pair();
    let (lambda, horizon) = (0.5, 40.0);
    let est = estimate_chain(&p, 0.5, |_| 1.0, lambda, horizon, 2000, 9).unwrap();
    let want = (1.0 - (-lambda * horizon).exp()) / lambda;
    assert!((est.value - want).abs() < 1e-9, "{est:?}");
}

#[test]
fn absorbed_time_change_loses_mass() {
    let p = unit_interval(false);
    let opts = SimOptions { dt: 1e-3, horizon: 20.0, ..Default::default() };
    let est = estimate_timechange(&p, 0.5, |_| 1.0, 1.0, opts, 400, 4).unwrap();
    assert!(est.value < 0.9, "{est:?}");
    let paths = simulate_timechange(&p, 0.5, opts, 50, 4).unwrap();
    assert!(paths.iter().all(|q| q.lifetime.is_some()));
}

#[test]
fn chain_matches_the_kernel() {
    let p = three_atom_pair();
    let f: PiecewiseFn<f64> = "0..1=1;1..3=2".parse().unwrap();
    let k = Kernel::new(&p, 1.0, Regime::Split, 2.0, &SolveOptions::default()).unwrap();
    for x0 in [0.5, 1.0, 2.5] {
        let want = k.resolvent_apply(&f, SplitPoint::center(x0)).unwrap();
        let est = estimate_chain(&p, x0, |x| f.eval(x), 1.0, 30.0, 40_000, 21).unwrap();
        assert!((est.value - want).abs() < 4.0 * est.std_error, "{x0}: {est:?} vs {want}");
    }
}

#[test]
fn time_change_skips_the_gap_but_not_the_support() {
    let p = gap_pair();
    let opts = SimOptions { dt: 1e-3, horizon: 4.0, ..Default::default() };
    let paths = simulate_timechange(&p, 0.5, opts, 20, 5).unwrap();
    let audit = path_property_audit(&paths, &p, 8.0 * opts.dt.sqrt());
    assert_eq!(audit.violations, 0, "{audit:?}");
    assert!(audit.jumps.iter().map(|j| j.count).sum::<usize>() > 0);
    let occ = occupation(&paths);
    assert!(!occ.is_empty());
}

#[test]
fn continuous_pair_has_no_jumps() {
    let p = unit_interval(true);
    let opts = SimOptions { dt: 1e-3, horizon: 3.0, ..Default::default() };
    let paths = simulate_timechange(&p, 0.3, opts, 10, 8).unwrap();
    let audit = path_property_audit(&paths, &p, 8.0 * opts.dt.sqrt());
    assert_eq!(audit.violations, 0);
    assert!(audit.jumps.is_empty());
    for path in &paths {
        assert!(path.states.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

#[test]
fn seeds_reproduce() {
    let p = three_atom_pair();
    let a = estimate_chain(&p, 1.0, |x| x, 1.0, 20.0, 500, 77).unwrap();
    let b = estimate_chain(&p, 1.0, |x| x, 1.0, 20.0, 500, 77).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
}

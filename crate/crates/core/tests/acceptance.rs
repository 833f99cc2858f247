//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line; run with
//! `cargo test -p quasidiff --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use quasidiff::boundary::{classify, classify_left, BoundaryKind, Refinement};
use quasidiff::fixtures::{birth_death, five_atom_pair, gap_pair, snapping_out, unit_interval};
use quasidiff::harmonic::SolveOptions;
use quasidiff::kernel::{resolvent_identity_check, Kernel, PiecewiseFn, Regime};
use quasidiff::measure::{Density, DensityPiece, Interval, SpeedMeasure};
use quasidiff::oracle::{bd_matrix_resolvent, calibrate_normalization, snapping_out_kernel, standard_family, Truncation};
use quasidiff::pair::{validate_pair, PairOptions, QuasiPair, Side, SplitPoint};
use quasidiff::scale::ScaleFunction;
use quasidiff::simulate::{estimate_chain, estimate_timechange, SimOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn line(n: usize, name: &str, out: &Outcome, took: Duration) {
    let tag = if out.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {n} {name} ({:.2} s): {}", took.as_secs_f64(), out.detail);
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn snapping_out_grid() -> Outcome {
    let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
    // Both copies of the origin.
    let mut pts: Vec<(f64, bool)> = xs.iter().map(|&x| (x, false)).collect();
    pts.push((0.0, true));
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for kappa in [0.5, 1.0, 5.0] {
        let pair = snapping_out(kappa);
        let opts = SolveOptions { view: Some((-2.0, 2.0 + 2.0 / kappa)), ..Default::default() };
        for alpha in [0.5, 1.0, 2.0] {
            let k = Kernel::new(&pair, alpha, Regime::Split, 1.0, &opts).expect("snapping-out kernel");
            for &a in &pts {
                for &b in &pts {
                    let sp = |p: (f64, bool)| {
                        if p.1 {
                            SplitPoint { x: p.0, side: Side::Left }
                        } else {
                            SplitPoint::center(p.0)
                        }
                    };
                    let got = k.eval(sp(a), sp(b)).expect("kernel value");
                    worst = worst.max(rel(got, snapping_out_kernel(alpha, kappa, a, b)));
                    checked += 1;
                }
            }
        }
    }
    Outcome { pass: worst <= 1e-8, detail: format!("{checked} entries, max rel err {worst:.2e}") }
}

fn birth_death_chains(c_prob: f64) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut gaps_ok = true;
    let mut gamma_ok = true;
    let mut trunc_ok = true;
    let mut notes = Vec::new();
    for tr in [Truncation::AbsorbingAtTop, Truncation::ReflectingAtTop] {
        let (chain, pair) = birth_death(50, tr);
        let n = chain.len();
        for alpha in [0.5, 1.0, 2.0] {
            let k = Kernel::new(&pair, alpha, Regime::ContinuousStrict, c_prob, &SolveOptions::default()).expect("chain kernel");
            let sol = k.solution();
            gaps_ok &= sol.gamma_underline < sol.gamma_bar;
            let want_gamma = match tr {
                Truncation::AbsorbingAtTop => sol.gamma_bar,
                Truncation::ReflectingAtTop => sol.gamma_underline,
            };
            gamma_ok &= rel(sol.gamma, want_gamma) <= 1e-12;
            for col in 0..n {
                let mut e = vec![0.0; n];
                e[col] = 1.0;
                let r = bd_matrix_resolvent(&chain, alpha, &e).expect("matrix resolvent");
                for (row, want) in r.iter().enumerate() {
                    let g = k.eval_at(chain.scale[row], chain.scale[col]).expect("entry") * chain.mu[col];
                    worst = worst.max(rel(g, *want));
                }
            }
        }
        // Truncation sensitivity: R1 at the first state for K and K + 10 states.
        let (_, bigger) = birth_death(60, tr);
        let r50 = Kernel::new(&pair, 1.0, Regime::ContinuousStrict, c_prob, &SolveOptions::default())
            .and_then(|k| k.resolvent_apply(&PiecewiseFn::constant(1.0), SplitPoint::center(0.0)))
            .expect("K = 50");
        let r60 = Kernel::new(&bigger, 1.0, Regime::ContinuousStrict, c_prob, &SolveOptions::default())
            .and_then(|k| k.resolvent_apply(&PiecewiseFn::constant(1.0), SplitPoint::center(0.0)))
            .expect("K = 60");
        let change = rel(r50, r60);
        trunc_ok &= change < 1e-7;
        notes.push(format!("{tr:?} K→K+10 change {change:.1e}"));
    }
    Outcome {
        pass: worst <= 1e-6 && gaps_ok && gamma_ok && trunc_ok,
        detail: format!("max rel err {worst:.2e}, γ̲<γ̄ {gaps_ok}, γ choice {gamma_ok}; {}", notes.join(", ")),
    }
}

fn calibration() -> (Outcome, f64) {
    let family = standard_family();
    let alphas = [0.5, 1.0, 2.0];
    let rep = match calibrate_normalization(&family, &alphas, 1e-6, &SolveOptions::default()) {
        Ok(r) => r,
        Err(e) => return (Outcome { pass: false, detail: format!("calibration failed: {e}") }, f64::NAN),
    };
    let c = rep.c_prob;
    let fits_ok = rep.fits.iter().all(|f| f.residual <= 1e-6);

    // Identity factor on pairs with a density and on a chain.
    let f = PiecewiseFn::indicator(0.2, 0.6);
    let mut factors = Vec::new();
    for (name, pair, pts) in [
        ("reflected unit interval", unit_interval(true), vec![0.1, 0.4, 0.7, 0.95]),
        ("gap pair", gap_pair(), vec![0.3, 0.9, 1.5]),
    ] {
        let ka =
            Kernel::new(&pair, 1.0, Regime::natural_for(pair.strictness()), 1.0, &SolveOptions::default()).expect("α kernel");
        let kb =
            Kernel::new(&pair, 2.0, Regime::natural_for(pair.strictness()), 1.0, &SolveOptions::default()).expect("β kernel");
        let sp: Vec<_> = pts.into_iter().map(SplitPoint::center).collect();
        let r = resolvent_identity_check(&ka, &kb, &f, &sp).expect("identity");
        factors.push((name, r.factor.unwrap_or(f64::NAN)));
    }
    let (chain, pair) = birth_death(20, Truncation::ReflectingAtTop);
    let top = *chain.scale.last().unwrap();
    let fb = PiecewiseFn::indicator(0.0, 0.5 * top);
    let ka = Kernel::new(&pair, 1.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).expect("α kernel");
    let kb = Kernel::new(&pair, 2.0, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).expect("β kernel");
    let sp: Vec<_> = [0, 3, 8, 15].iter().map(|&i| SplitPoint::center(chain.scale[i])).collect();
    let r = resolvent_identity_check(&ka, &kb, &fb, &sp).expect("identity");
    factors.push(("birth-death", r.factor.unwrap_or(f64::NAN)));
    let factors_ok = factors.iter().all(|(_, v)| rel(*v, c) <= 1e-6);

    // R_α 1 with the unit constant on the reflected interval.
    let one = PiecewiseFn::constant(1.0);
    let pair = unit_interval(true);
    let mut mass_ok = true;
    let mut mass_text = Vec::new();
    for alpha in alphas {
        let k = Kernel::new(&pair, alpha, Regime::ContinuousStrict, 1.0, &SolveOptions::default()).expect("kernel");
        let v = k.resolvent_apply(&one, SplitPoint::center(0.3)).expect("R1");
        mass_ok &= rel(v * 2.0 * alpha, 1.0) <= 1e-9;
        mass_text.push(format!("α={alpha}: R1={v:.12}"));
    }

    let fit_text: Vec<String> = rep.fits.iter().map(|f| format!("{}@{}={:.12}", f.label, f.alpha, f.c)).collect();
    let fac_text: Vec<String> = factors.iter().map(|(n, v)| format!("{n} c'={v:.12}")).collect();
    (
        Outcome {
            pass: rep.fits.len() >= 9 && fits_ok && factors_ok && mass_ok,
            detail: format!(
                "c_prob={c:.15} spread {:.1e} over {} fits [{}]; {}; unit constant gives R_α1 = 1/(2α) [{}]",
                rep.spread,
                rep.fits.len(),
                fit_text.join(", "),
                fac_text.join(", "),
                mass_text.join(", ")
            ),
        },
        c,
    )
}

fn monte_carlo(c_prob: f64) -> Outcome {
    let pair = five_atom_pair();
    let f: PiecewiseFn<f64> = "0..1.5=1;1.5..4=0.25,0.5".parse().expect("test function");
    let lambda = 1.0;
    let k = Kernel::new(&pair, lambda, Regime::Split, c_prob, &SolveOptions::default()).expect("kernel");
    let opts = SimOptions { dt: 4e-3, horizon: 25.0, ..Default::default() };
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, x0) in [1.2, 2.0, 2.9].into_iter().enumerate() {
        let want = k.resolvent_apply(&f, SplitPoint::center(x0)).expect("resolvent");
        let ch = estimate_chain(&pair, x0, |x| f.eval(x), lambda, 30.0, 100_000, 11 + i as u64).expect("chain");
        let tc = estimate_timechange(&pair, x0, |x| f.eval(x), lambda, opts, 4_000, 101 + i as u64).expect("time change");
        let z_chain = (ch.value - want) / ch.std_error;
        let z_pair = (tc.value - ch.value) / (tc.std_error.powi(2) + ch.std_error.powi(2)).sqrt();
        pass &= z_chain.abs() <= 3.0 && z_pair.abs() <= 3.0 && ch.paths >= 100_000;
        parts.push(format!(
            "x={x0}: exact {want:.5}, chain {:.5}±{:.5} (z {z_chain:+.2}), time change {:.5}±{:.5} (z {z_pair:+.2})",
            ch.value, ch.std_error, tc.value, tc.std_error
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn random_pairs() -> Outcome {
    let mut failed = Vec::new();
    let mut compared = 0;
    let mut audited = 0;
    let mut regular = 0;
    for seed in 0..50u64 {
        let pair = common::random_pair(seed);
        let alpha = 0.5 + (seed % 5) as f64 * 0.6;
        let rep = common::check_properties(&pair, alpha, seed);
        compared += rep.regimes_compared;
        audited += rep.audit_paths;
        regular += rep.regular as usize;
        let fails = rep.failures();
        if !fails.is_empty() {
            failed.push(format!("seed {seed}: {}", fails.join(", ")));
        }
    }
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("50 pairs ({regular} regular right ends), {compared} regime comparisons, {audited} audited paths")
        } else {
            failed.join("; ")
        },
    }
}

fn identity_pair(iv: Interval<f64>, densities: Vec<DensityPiece<f64>>) -> QuasiPair<f64> {
    let m = SpeedMeasure::new(iv, vec![], densities, vec![]).expect("measure");
    validate_pair(ScaleFunction::identity(0.0, iv.right), m, PairOptions::default()).expect("pair")
}

fn classification() -> Outcome {
    let inf = f64::INFINITY;
    let cases: Vec<(&str, QuasiPair<f64>, BoundaryKind, Option<Refinement>)> = vec![
        (
            "natural",
            identity_pair(Interval::from_zero(inf, false), vec![DensityPiece::constant(0.0, inf, 1.0)]),
            BoundaryKind::Natural,
            None,
        ),
        ("regular reflecting", unit_interval(true), BoundaryKind::Regular, Some(Refinement::Reflecting)),
        (
            "exit",
            identity_pair(
                Interval::from_zero(1.0, false),
                vec![DensityPiece { x0: 0.0, x1: 1.0, density: Density::Power { coeff: 1.0, center: 1.0, exponent: -1.5 } }],
            ),
            BoundaryKind::Exit,
            None,
        ),
        (
            "entrance",
            identity_pair(
                Interval::from_zero(inf, false),
                vec![
                    DensityPiece::constant(0.0, 1.0, 1.0),
                    DensityPiece { x0: 1.0, x1: inf, density: Density::Power { coeff: 1.0, center: 0.0, exponent: -3.0 } },
                ],
            ),
            BoundaryKind::Entrance,
            None,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, pair, kind, refinement) in cases {
        match classify(&pair) {
            Ok(c) => {
                let ok = c.kind == kind && (refinement.is_none() || c.refinement == refinement);
                pass &= ok;
                parts.push(format!(
                    "{name}: {:?} σ={:.4} λ={:.4}{}",
                    c.kind,
                    c.sigma_hat,
                    c.lambda_hat,
                    if ok { "" } else { " (wrong)" }
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    let so = snapping_out(1.0);
    match (classify_left(&so), classify(&so)) {
        (Ok(l), Ok(r)) => {
            let ok = l.kind == BoundaryKind::Natural && r.kind == BoundaryKind::Natural;
            pass &= ok;
            parts.push(format!("snapping out: left {:?}, right {:?}", l.kind, r.kind));
        }
        (l, r) => {
            pass = false;
            parts.push(format!("snapping out: {l:?} {r:?}"));
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let mut run = |n: usize, name: &str, limit: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut out = f();
        let took = t.elapsed();
        if let Some(l) = limit {
            if took.as_secs_f64() > l {
                out.pass = false;
                out.detail.push_str(&format!("; over the {l} s budget"));
            }
        }
        line(n, name, &out, took);
        results.push((n, out.pass));
    };

    run(1, "snapping-out grid", Some(10.0), &mut snapping_out_grid);
    let mut c_prob = f64::NAN;
    run(3, "normalization constant", None, &mut || {
        let (o, c) = calibration();
        c_prob = c;
        o
    });
    let c = if c_prob.is_finite() { c_prob } else { 2.0 };
    run(2, "birth-death chains", Some(5.0), &mut || birth_death_chains(c));
    run(4, "Monte Carlo", Some(60.0), &mut || monte_carlo(c));
    run(5, "random pairs", None, &mut random_pairs);
    run(6, "classification", None, &mut classification);

    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

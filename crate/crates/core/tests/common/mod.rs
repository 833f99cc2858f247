#![allow(dead_code)]

use quasidiff::harmonic::SolveOptions;
use quasidiff::kernel::{default_window, pairing, Kernel, PiecewiseFn, Regime};
use quasidiff::measure::{Atom, DensityPiece, Interval, SpeedMeasure};
use quasidiff::pair::{validate_pair, PairOptions, QuasiPair, SplitPoint};
use quasidiff::scale::{Jump, ScaleFunction, Segment};
use quasidiff::simulate::{path_property_audit, simulate_chain, simulate_timechange, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Random pair on `[0, r⟩`: up to three affine pieces with random jumps
/// between them, up to five atoms, and a density piece on some of them.
/// One in five has `r = ∞` with a constant density on the whole half line.
pub fn random_pair(seed: u64) -> QuasiPair<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let infinite = rng.random_bool(0.2);
    let span = round3(rng.random_range(1.0..4.0));
    let r = if infinite { f64::INFINITY } else { span };
    let pieces = rng.random_range(1..=3usize);
    let mut cuts: Vec<f64> = (1..pieces).map(|_| round3(rng.random_range(0.1 * span..0.9 * span))).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    let mut ends = vec![0.0];
    ends.extend(&cuts);
    ends.push(r);
    let mut segments = Vec::new();
    let mut jumps = Vec::new();
    let mut level = 0.0;
    for w in ends.windows(2) {
        let slope = round3(rng.random_range(0.5..2.0));
        let c0 = level - slope * w[0];
        segments.push(Segment::affine(w[0], w[1], c0, slope));
        if w[1].is_finite() && w[1] < r {
            let left = c0 + slope * w[1];
            if rng.random_bool(0.6) {
                let right = left + round3(rng.random_range(0.1..1.0));
                let value = match rng.random_range(0..3) {
                    0 => left,
                    1 => 0.5 * (left + right),
                    _ => right,
                };
                jumps.push(Jump { x: w[1], left, value, right });
                level = right;
            } else {
                level = left;
            }
        }
    }
    let scale = ScaleFunction::new(segments, jumps).expect("random scale");
    let r_included = !infinite && rng.random_bool(0.6);
    let n_atoms = rng.random_range(0..=5usize);
    let mut atoms = Vec::new();
    for _ in 0..n_atoms {
        let x = if rng.random_bool(0.3) && !cuts.is_empty() {
            cuts[rng.random_range(0..cuts.len())]
        } else {
            round3(rng.random_range(0.05 * span..0.98 * span))
        };
        atoms.push(Atom { x, mass: round3(rng.random_range(0.1..1.0)) });
    }
    if r_included && rng.random_bool(0.3) {
        atoms.push(Atom { x: r, mass: round3(rng.random_range(0.1..1.0)) });
    }
    let mut densities = Vec::new();
    if infinite {
        densities.push(DensityPiece::constant(0.0, f64::INFINITY, round3(rng.random_range(0.5..2.0))));
    } else if atoms.is_empty() || rng.random_bool(0.5) {
        let a = round3(rng.random_range(0.0..0.5 * span));
        let b = round3(rng.random_range(0.6 * span..span));
        let c0 = round3(rng.random_range(0.2..1.5));
        let c1 = round3(rng.random_range(0.0..1.0));
        densities.push(DensityPiece::poly(a, b, vec![c0, c1]));
    }
    let iv = Interval::from_zero(r, r_included);
    let m = SpeedMeasure::new(iv, atoms, densities, vec![]).expect("random measure");
    validate_pair(scale, m, PairOptions { relaxed_support: true, ..Default::default() }).expect("random pair")
}

pub fn solve_opts(pair: &QuasiPair<f64>) -> SolveOptions<f64> {
    let (lo, hi) = default_window(pair);
    let s = pair.scale();
    SolveOptions { view: Some((s.eval(lo).min(s.left_limit(lo)), s.eval(hi).max(s.right_limit(hi)))), ..Default::default() }
}

#[derive(Debug, Clone)]
pub struct PropReport {
    pub symmetry: f64,
    pub wronskian: f64,
    pub positive: bool,
    pub monotone: bool,
    pub regular: bool,
    pub gamma_gap: f64,
    pub m_symmetry: f64,
    pub left_derivative: Option<f64>,
    pub regime_agreement: f64,
    pub regimes_compared: usize,
    pub audit_paths: usize,
    pub audit_violations: usize,
}

impl PropReport {
    /// Every property at the thresholds of the property suite.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.symmetry > 1e-12 {
            out.push(format!("symmetry {:e}", self.symmetry));
        }
        if self.wronskian > 1e-9 {
            out.push(format!("wronskian {:e}", self.wronskian));
        }
        if !self.positive {
            out.push("positivity".into());
        }
        if !self.monotone {
            out.push("monotonicity".into());
        }
        let gamma_ok = if self.regular { self.gamma_gap > 0.0 } else { self.gamma_gap.abs() <= 1e-12 };
        if !gamma_ok {
            out.push(format!("gamma gap {:e} (regular {})", self.gamma_gap, self.regular));
        }
        if self.m_symmetry > 1e-8 {
            out.push(format!("m-symmetry {:e}", self.m_symmetry));
        }
        if self.left_derivative.is_some_and(|d| d.abs() > 1e-8) {
            out.push(format!("left derivative {:?}", self.left_derivative));
        }
        if self.regime_agreement > 1e-12 {
            out.push(format!("regime agreement {:e}", self.regime_agreement));
        }
        if self.audit_violations > 0 {
            out.push(format!("{} skip violations", self.audit_violations));
        }
        out
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Measures every property of the suite on one pair.
pub fn check_properties(pair: &QuasiPair<f64>, alpha: f64, seed: u64) -> PropReport {
    let regime = Regime::natural_for(pair.strictness());
    let opts = solve_opts(pair);
    let k = Kernel::new(pair, alpha, regime, 1.0, &opts).expect("kernel");
    let sol = k.solution();
    let pts = k.state_grid(15);
    let n = pts.len();
    let vals = k.grid_values(&pts).expect("grid");
    let mut symmetry: f64 = 0.0;
    let mut positive = true;
    for i in 0..n {
        for j in 0..n {
            symmetry = symmetry.max(rel(vals[i * n + j], vals[j * n + i]));
            positive &= vals[i * n + j] > 0.0;
        }
    }
    let mut ys: Vec<f64> = pts.iter().map(|p| k.map(*p).unwrap()).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut wronskian: f64 = 0.0;
    let mut monotone = true;
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    for &y in &ys {
        wronskian = wronskian.max(rel(sol.wronskian_at(y).unwrap(), sol.wronskian));
        let cur = (sol.u_hat(y).unwrap(), sol.u_left(y).unwrap(), sol.u_plus(y).unwrap(), sol.v(y).unwrap());
        if let Some(p) = prev {
            let slack = 1e-12;
            monotone &= cur.0 >= p.0 * (1.0 - slack)
                && cur.1 >= p.1 * (1.0 - slack)
                && cur.2 <= p.2 * (1.0 + slack) + 1e-300
                && cur.3 <= p.3 * (1.0 + slack) + 1e-300;
        }
        prev = Some(cur);
    }
    let regular = sol.right.is_regular();
    let gamma_gap = (sol.gamma_bar - sol.gamma_underline) / sol.gamma_bar;

    let (lo, hi) = default_window(pair);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut interval = || {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        (a.min(b), a.max(b).max(a.min(b) + 0.05 * (hi - lo)))
    };
    let (a1, b1) = interval();
    let (a2, b2) = interval();
    let f = PiecewiseFn::indicator(a1, b1);
    let g = PiecewiseFn::indicator(a2, b2);
    let rg = |y: f64| k.resolvent_apply(&g, SplitPoint::center(y)).unwrap_or(f64::NAN);
    let rf = |y: f64| k.resolvent_apply(&f, SplitPoint::center(y)).unwrap_or(f64::NAN);
    let fg = pairing(&k, &|y| f.eval(y) * rg(y), &[a1, b1, a2, b2]);
    let gf = pairing(&k, &|y| g.eval(y) * rf(y), &[a1, b1, a2, b2]);
    let m_symmetry = rel(fg, gf);
    let left_derivative = k.boundary_condition_check(&f).unwrap().left;

    let supports = pair.supports();
    let fdot: Vec<SplitPoint<f64>> = pts.iter().copied().filter(|p| supports.in_fdot(p.x) && k.map(*p).is_ok()).collect();
    let mut regime_agreement: f64 = 0.0;
    let mut regimes_compared = 0;
    let others: &[Regime] = match regime {
        Regime::ContinuousStrict => &[Regime::Split, Regime::Modified, Regime::Restricted],
        _ => &[Regime::Modified, Regime::Restricted],
    };
    for &other in others {
        let ko = Kernel::new(pair, alpha, other, 1.0, &opts).expect("regime kernel");
        for p in &fdot {
            for q in &fdot {
                if p.side != quasidiff::pair::Side::Center || q.side != quasidiff::pair::Side::Center {
                    continue;
                }
                let a = k.eval(*p, *q).unwrap();
                let b = ko.eval(*p, *q).unwrap();
                regime_agreement = regime_agreement.max(rel(a, b));
                regimes_compared += 1;
            }
        }
    }

    let start = pair.measure().atoms().first().map(|a| a.x).unwrap_or(0.5 * (lo + hi));
    let (paths, resolution) = if pair.image_measure().is_finite_atomic() {
        (simulate_chain(pair, start, 20.0, 50, seed).expect("chain paths"), 0.0)
    } else {
        let o = SimOptions { dt: 1e-3, horizon: 3.0, max_steps: 200_000, ..Default::default() };
        (simulate_timechange(pair, start, o, 5, seed).expect("time-change paths"), 8.0 * o.dt.sqrt())
    };
    let audit = path_property_audit(&paths, pair, resolution);

    PropReport {
        symmetry,
        wronskian,
        positive,
        monotone,
        regular,
        gamma_gap,
        m_symmetry,
        left_derivative,
        regime_agreement,
        regimes_compared,
        audit_paths: paths.len(),
        audit_violations: audit.violations,
    }
}

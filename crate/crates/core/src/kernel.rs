//! Reproducing kernels in the original coordinates and the resolvents they
//! generate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonic::{solve, HarmonicError, HarmonicSolution, ImageProblem, SolutionPoint, SolveOptions};
use crate::pair::{DarnedSpace, PairError, QuasiPair, Side, SplitPoint, SplitSpace, Supports};
use crate::poly;
use crate::quadrature::GaussLegendre;
use crate::scalar::{approx_eq, lit, Scalar};
use crate::scale::Strictness;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error("regime {regime} needs a different pair class (pair is {strictness:?})")]
    Regime { regime: Regime, strictness: Strictness },
    #[error("point {x} ({side:?}) is outside the state space of the {regime} regime")]
    OutsideState { x: f64, side: Side, regime: Regime },
    #[error("function is unbounded on an unbounded piece")]
    NonIntegrable,
    #[error("cannot parse function spec {0:?}")]
    BadFunction(String),
}

fn f64_of<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// State space and coordinate map used by a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Strictly increasing continuous scale, `g(x, y) = ĝ(s(x), s(y))`.
    ContinuousStrict,
    /// Split completion with one-sided copies at scale jumps.
    Split,
    /// Support of `m` with the modified scale `s̃`.
    Modified,
    /// Support points whose image lies in the image support.
    Restricted,
    /// Flat intervals collapsed to points.
    Darned,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::ContinuousStrict => "continuous",
            Regime::Split => "split",
            Regime::Modified => "modified",
            Regime::Restricted => "restricted",
            Regime::Darned => "darned",
        };
        f.write_str(s)
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continuous" | "continuous-strict" => Ok(Regime::ContinuousStrict),
            "split" => Ok(Regime::Split),
            "modified" => Ok(Regime::Modified),
            "restricted" => Ok(Regime::Restricted),
            "darned" => Ok(Regime::Darned),
            _ => Err(format!("unknown regime {s:?} (continuous, split, modified, restricted, darned)")),
        }
    }
}

impl Regime {
    /// Regime that fits the strictness class of a pair.
    pub fn natural_for(strictness: Strictness) -> Self {
        match strictness {
            Strictness::ContinuousStrict => Regime::ContinuousStrict,
            Strictness::StrictDiscontinuous => Regime::Split,
            Strictness::NonStrict => Regime::Darned,
        }
    }
}

/// Multiplicative constant applied to the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// The separable formula as written, `c = 1`.
    #[default]
    Paper,
    /// `c = c_prob`, matching the resolvent of the generator `½ D_m D_s`.
    Probabilistic,
}

impl FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Normalization::Paper),
            "probabilistic" => Ok(Normalization::Probabilistic),
            _ => Err(format!("unknown normalization {s:?} (paper, probabilistic)")),
        }
    }
}

/// Polynomial in `x` on the closed range `[x0, x1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnPiece<T> {
    pub x0: T,
    pub x1: T,
    pub coeffs: Vec<T>,
}

/// Piecewise polynomial test function, zero outside its pieces. The first
/// piece containing a point wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn<T> {
    pub pieces: Vec<FnPiece<T>>,
}

impl<T: Scalar> PiecewiseFn<T> {
    pub fn constant(c: T) -> Self {
        Self { pieces: vec![FnPiece { x0: T::neg_infinity(), x1: T::infinity(), coeffs: vec![c] }] }
    }

    pub fn zero() -> Self {
        Self { pieces: Vec::new() }
    }

    /// `1` on `[a, b]`.
    pub fn indicator(a: T, b: T) -> Self {
        Self { pieces: vec![FnPiece { x0: a, x1: b, coeffs: vec![T::one()] }] }
    }

    pub fn eval(&self, x: T) -> T {
        for p in &self.pieces {
            let inside = (x >= p.x0 || approx_eq(x, p.x0)) && (x <= p.x1 || approx_eq(x, p.x1));
            if inside {
                return poly::eval(&p.coeffs, x);
            }
        }
        T::zero()
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.coeffs.iter().all(|c| *c == T::zero()))
    }

    pub fn breakpoints(&self) -> Vec<T> {
        self.pieces.iter().flat_map(|p| [p.x0, p.x1]).filter(|x| x.is_finite()).collect()
    }

    /// `sup |f|`, infinite for a non-constant piece on an unbounded range.
    pub fn sup(&self) -> T {
        self.pieces.iter().fold(T::zero(), |acc, p| {
            let deg = p.coeffs.iter().rposition(|c| *c != T::zero());
            let v = match deg {
                None => T::zero(),
                Some(0) => p.coeffs[0].abs(),
                Some(_) if !p.x0.is_finite() || !p.x1.is_finite() => T::infinity(),
                Some(_) => {
                    let c = poly::compose_affine(&p.coeffs, p.x0, T::one());
                    poly::abs_bound(&c, p.x1 - p.x0)
                }
            };
            acc.max(v)
        })
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

impl<T: Scalar> FromStr for PiecewiseFn<T> {
    type Err = KernelError;

    /// `c` (constant) or `a..b=c0,c1,...;...` (polynomials in `x`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || KernelError::BadFunction(s.to_string());
        let s = s.trim();
        if let Some(c) = parse_num(s) {
            return Ok(Self::constant(lit(c)));
        }
        let mut pieces = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (range, coeffs) = part.split_once('=').ok_or_else(bad)?;
            let (a, b) = range.split_once("..").ok_or_else(bad)?;
            let (a, b) = (parse_num(a).ok_or_else(bad)?, parse_num(b).ok_or_else(bad)?);
            if !(a <= b) {
                return Err(bad());
            }
            let coeffs = coeffs
                .split(',')
                .map(|c| parse_num(c).filter(|v| v.is_finite()).map(lit::<T>).ok_or_else(bad))
                .collect::<Result<Vec<T>, _>>()?;
            pieces.push(FnPiece { x0: lit(a), x1: lit(b), coeffs });
        }
        if pieces.is_empty() {
            return Err(bad());
        }
        Ok(Self { pieces })
    }
}

impl<T: Scalar> fmt::Display for PiecewiseFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pieces
            .iter()
            .map(|p| {
                let c: Vec<String> = p.coeffs.iter().map(|c| format!("{}", f64_of(*c))).collect();
                format!("{}..{}={}", f64_of(p.x0), f64_of(p.x1), c.join(","))
            })
            .collect();
        f.write_str(&parts.join(";"))
    }
}

/// Kernel `c · ĝ(map(x), map(y))` for one α and regime.
#[derive(Debug, Clone)]
pub struct Kernel<T> {
    pub alpha: T,
    pub regime: Regime,
    pub c: T,
    pair: QuasiPair<T>,
    supports: Supports<T>,
    split: Option<SplitSpace<T>>,
    darned: Option<DarnedSpace<T>>,
    solution: Arc<HarmonicSolution<T>>,
    gl: GaussLegendre<T>,
}

/// Checks the regime against the pair class.
fn check_regime<T: Scalar>(pair: &QuasiPair<T>, regime: Regime) -> Result<(), KernelError> {
    let st = pair.strictness();
    let ok = match regime {
        Regime::ContinuousStrict => st == Strictness::ContinuousStrict,
        Regime::Split | Regime::Modified | Regime::Restricted => st != Strictness::NonStrict,
        Regime::Darned => st == Strictness::NonStrict,
    };
    if ok {
        Ok(())
    } else {
        Err(KernelError::Regime { regime, strictness: st })
    }
}

/// Image problem a regime solves: the darned pair for `Darned`, else the pair.
pub fn regime_problem<T: Scalar>(pair: &QuasiPair<T>, regime: Regime) -> Result<ImageProblem<T>, KernelError> {
    check_regime(pair, regime)?;
    if regime == Regime::Darned {
        let d = pair.darn_space()?;
        Ok(ImageProblem::from_pair(d.pair()))
    } else {
        Ok(ImageProblem::from_pair(pair))
    }
}

impl<T: Scalar> Kernel<T> {
    pub fn new(pair: &QuasiPair<T>, alpha: T, regime: Regime, c: T, opts: &SolveOptions<T>) -> Result<Self, KernelError> {
        let problem = regime_problem(pair, regime)?;
        let sol = solve(&problem, alpha, opts)?;
        Self::with_solution(pair, Arc::new(sol), regime, c)
    }

    /// Reuses a solution of the image problem.
    pub fn with_solution(
        pair: &QuasiPair<T>,
        solution: Arc<HarmonicSolution<T>>,
        regime: Regime,
        c: T,
    ) -> Result<Self, KernelError> {
        check_regime(pair, regime)?;
        let split = match regime {
            Regime::Darned => None,
            _ => Some(pair.split_space()?),
        };
        let darned = match regime {
            Regime::Darned => Some(pair.darn_space()?),
            _ => None,
        };
        Ok(Self {
            alpha: solution.alpha,
            regime,
            c,
            pair: pair.clone(),
            supports: pair.supports(),
            split,
            darned,
            solution,
            gl: GaussLegendre::new(20),
        })
    }

    pub fn solution(&self) -> &HarmonicSolution<T> {
        &self.solution
    }

    pub fn shared_solution(&self) -> Arc<HarmonicSolution<T>> {
        Arc::clone(&self.solution)
    }

    pub fn pair(&self) -> &QuasiPair<T> {
        &self.pair
    }

    /// Same kernel with another constant.
    pub fn with_constant(&self, c: T) -> Self {
        Self { c, ..self.clone() }
    }

    fn outside(&self, p: SplitPoint<T>) -> KernelError {
        KernelError::OutsideState { x: f64_of(p.x), side: p.side, regime: self.regime }
    }

    /// Whether `p` belongs to the regime's state space.
    pub fn in_state_space(&self, p: SplitPoint<T>) -> bool {
        self.map(p).is_ok()
    }

    /// Image coordinate of a state.
    pub fn map(&self, p: SplitPoint<T>) -> Result<T, KernelError> {
        let iv = self.pair.measure().interval;
        if !iv.contains(p.x) {
            return Err(self.outside(p));
        }
        if p.side != Side::Center && self.regime != Regime::Split {
            return Err(self.outside(p));
        }
        let s = self.pair.scale();
        match self.regime {
            Regime::ContinuousStrict => Ok(s.eval(p.x)),
            Regime::Split => {
                let split = self.split.as_ref().expect("split space");
                if !split.copies(p.x).contains(&p) {
                    return Err(self.outside(p));
                }
                Ok(split.s_star(p))
            }
            Regime::Modified => {
                if !self.supports.f.contains(p.x) {
                    return Err(self.outside(p));
                }
                Ok(self.pair.stilde(&self.supports, p.x))
            }
            Regime::Restricted => {
                if !self.supports.in_fdot(p.x) {
                    return Err(self.outside(p));
                }
                Ok(s.eval(p.x))
            }
            Regime::Darned => {
                let d = self.darned.as_ref().expect("darned space");
                Ok(d.pair().scale().eval(d.to_darned(p.x)))
            }
        }
    }

    /// `g(x, y)`.
    pub fn eval(&self, x: SplitPoint<T>, y: SplitPoint<T>) -> Result<T, KernelError> {
        let (a, b) = (self.map(x)?, self.map(y)?);
        Ok(self.c * self.solution.kernel(a, b)?)
    }

    /// `g(x, y)` at centre points.
    pub fn eval_at(&self, x: T, y: T) -> Result<T, KernelError> {
        self.eval(SplitPoint::center(x), SplitPoint::center(y))
    }

    /// Kernel on a product grid, row-major, evaluated in parallel.
    pub fn grid_values(&self, pts: &[SplitPoint<T>]) -> Result<Vec<T>, KernelError> {
        let mapped: Vec<T> = pts.iter().map(|p| self.map(*p)).collect::<Result<_, _>>()?;
        let evals: Vec<SolutionPoint<T>> = mapped.par_iter().map(|x| self.solution.eval(*x)).collect::<Result<_, _>>()?;
        let n = pts.len();
        Ok((0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let (a, b) = if mapped[i] <= mapped[j] { (&evals[i], &evals[j]) } else { (&evals[j], &evals[i]) };
                self.c * self.solution.kernel_from_points(a, b)
            })
            .collect())
    }

    /// Sample grid on the state space: `n` uniform points over the finite
    /// part of the interval plus every copy of each scale jump in range.
    pub fn state_grid(&self, n: usize) -> Vec<SplitPoint<T>> {
        let (lo, hi) = default_window(&self.pair);
        let mut pts = Vec::new();
        for k in 0..n {
            let t = if n > 1 { lit::<T>(k as f64) / lit::<T>((n - 1) as f64) } else { lit(0.5) };
            pts.push(SplitPoint::center(lo + (hi - lo) * t));
        }
        for j in self.pair.scale().jumps() {
            if j.x >= lo && j.x <= hi {
                match &self.split {
                    Some(sp) if self.regime == Regime::Split => pts.extend(sp.copies(j.x)),
                    _ => pts.push(SplitPoint::center(j.x)),
                }
            }
        }
        pts.retain(|p| self.in_state_space(*p));
        pts.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite").then(side_rank(a.side).cmp(&side_rank(b.side))));
        pts.dedup_by(|a, b| approx_eq(a.x, b.x) && a.side == b.side);
        pts
    }

    /// Range of states whose image the solver covers with nodes. Past the
    /// cut-off at an unbounded end the kernel mass is below tolerance, and
    /// the solution is only extended linearly there.
    fn covered(&self) -> (T, T) {
        let sol = &*self.solution;
        let s = self.pair.scale();
        let nodes = sol.nodes();
        let lo = if sol.l_hat.is_finite() { T::neg_infinity() } else { s.preimage(nodes[0].x).unwrap_or(T::neg_infinity()) };
        let hi =
            if sol.r_hat.is_finite() { T::infinity() } else { s.preimage(nodes[nodes.len() - 1].x).unwrap_or(T::infinity()) };
        (lo, hi)
    }

    /// `∫ w(y, s(y)) m(dy)` with `w` smooth between `breaks`.
    fn integrate_m<W: Fn(T, T) -> T + Sync>(&self, breaks: &[T], w: &W) -> T {
        let m = self.pair.measure();
        let s = self.pair.scale();
        let (lo, hi) = self.covered();
        let mut parts: Vec<T> = Vec::new();
        for a in m.atoms() {
            parts.push(a.mass * w(a.x, s.eval(a.x)));
        }
        for seq in m.sequences() {
            let mut k = seq.first as u64;
            let mut acc = T::zero();
            loop {
                let x = seq.position(k);
                if !m.interval.contains(x) || x > hi || x < lo {
                    break;
                }
                let term = seq.mass_at(k) * w(x, s.eval(x));
                acc = acc + term;
                if k > seq.first as u64 + 64 && term.abs() <= T::epsilon() * lit::<T>(1e-3) * acc.abs() {
                    break;
                }
                if k > seq.first as u64 + 2_000_000 {
                    break;
                }
                k += 1;
            }
            parts.push(acc);
        }
        let mut cuts: Vec<T> = s.breakpoints();
        cuts.extend(m.atoms().iter().map(|a| a.x));
        cuts.extend_from_slice(breaks);
        for p in m.densities() {
            let (x0, x1) = (p.x0.max(lo), p.x1.min(hi));
            if !(x0 < x1) {
                continue;
            }
            let mut xs: Vec<T> = cuts.iter().copied().filter(|x| *x > x0 && *x < x1).collect();
            xs.push(x0);
            xs.push(x1);
            xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
            xs.dedup_by(|a, b| approx_eq(*a, *b));
            let integrand = |y: T| {
                let d = p.eval(y);
                if d == T::zero() {
                    T::zero()
                } else {
                    d * w(y, s.eval(y))
                }
            };
            for win in xs.windows(2) {
                parts.push(self.integrate_interval(win[0], win[1], &integrand));
            }
        }
        crate::scalar::pairwise_sum(&parts)
    }

    fn integrate_interval<G: Fn(T) -> T>(&self, a: T, b: T, g: &G) -> T {
        let finite = |a: T, b: T| {
            let mut gg = |y: T| g(y);
            self.gl.adaptive(a, b, lit(1e-13), 40, &mut gg)
        };
        match (a.is_finite(), b.is_finite()) {
            (true, true) => finite(a, b),
            (true, false) => tail(a, T::one(), &finite),
            (false, true) => tail(b, -T::one(), &|x, y| finite(y, x)),
            (false, false) => tail(T::zero(), T::one(), &finite) + tail(T::zero(), -T::one(), &|x, y| finite(y, x)),
        }
    }

    fn breaks_for(&self, xh: T, extra: &[T]) -> Vec<T> {
        let mut b: Vec<T> = extra.to_vec();
        if let Some(y) = self.pair.scale().preimage(xh) {
            b.push(y);
        }
        b
    }

    /// `R_α f(x) = ∫ g(x, y) f(y) m(dy)`.
    pub fn resolvent_apply(&self, f: &PiecewiseFn<T>, x: SplitPoint<T>) -> Result<T, KernelError> {
        if f.sup().is_infinite() {
            return Err(KernelError::NonIntegrable);
        }
        if f.is_zero() {
            self.map(x)?;
            return Ok(T::zero());
        }
        self.apply_fn(x, &|y| f.eval(y), &f.breakpoints())
    }

    /// `∫ g(x, y) h(y) m(dy)` for a bounded `h` smooth between `breaks`.
    pub fn apply_fn<H: Fn(T) -> T + Sync>(&self, x: SplitPoint<T>, h: &H, breaks: &[T]) -> Result<T, KernelError> {
        let xh = self.map(x)?;
        let px = self.solution.eval(xh)?;
        let sol = &*self.solution;
        let w = |y: T, yh: T| -> T {
            let hv = h(y);
            if hv == T::zero() {
                return T::zero();
            }
            let Ok(py) = sol.eval(yh) else { return T::nan() };
            let g = if xh <= yh { sol.kernel_from_points(&px, &py) } else { sol.kernel_from_points(&py, &px) };
            g * hv
        };
        let v = self.integrate_m(&self.breaks_for(xh, breaks), &w);
        Ok(self.c * v)
    }

    /// `R_α f` at several points in parallel.
    pub fn resolvent_many(&self, f: &PiecewiseFn<T>, xs: &[SplitPoint<T>]) -> Result<Vec<T>, KernelError> {
        xs.par_iter().map(|x| self.resolvent_apply(f, *x)).collect()
    }

    /// `(R f, D⁻ R f, D⁺ R f)` at an image point.
    pub fn resolvent_with_derivatives(&self, f: &PiecewiseFn<T>, xh: T) -> Result<(T, T, T), KernelError> {
        let sol = &*self.solution;
        let p = sol.eval(xh)?;
        let ((dl_m, dl_p), (dv_m, dv_p)) = sol.kernel_pair_derivatives(xh)?;
        let ul = p.u * (sol.left_a + sol.left_b * p.h);
        let v = sol.gamma * p.u * (p.t + sol.inv_k);
        // -1: strictly below x̂, 0: mapped onto x̂, 1: strictly above.
        let weight = |class: i8| {
            move |y: T, yh: T| -> T {
                let fv = f.eval(y);
                if fv == T::zero() {
                    return T::zero();
                }
                let c = if approx_eq(yh, xh) {
                    0
                } else if yh < xh {
                    -1
                } else {
                    1
                };
                if c != class {
                    return T::zero();
                }
                if c == 0 {
                    return fv;
                }
                let Ok(q) = sol.eval(yh) else { return T::nan() };
                let s = if c < 0 { q.u * (sol.left_a + sol.left_b * q.h) } else { sol.gamma * q.u * (q.t + sol.inv_k) };
                s * fv
            }
        };
        let br = self.breaks_for(xh, &f.breakpoints());
        let below = self.integrate_m(&br, &weight(-1));
        let at_x = self.integrate_m(&br, &weight(0));
        let above = self.integrate_m(&br, &weight(1));
        let a_open = below;
        let a_closed = below + at_x * ul;
        let b_open = above;
        let b_closed = above + at_x * v;
        let k = self.c / sol.wronskian;
        let r = k * (v * a_closed + ul * b_open);
        let d_plus = k * (dv_p * a_closed + dl_p * b_open);
        let d_minus = k * (dv_m * a_open + dl_m * b_closed);
        Ok((r, d_minus, d_plus))
    }

    /// Boundary relations of `R_α f`: at a finite included left end
    /// `D⁺Rf − m̂({l̂})(2αRf − c f)`, at a reflecting right end
    /// `D⁻Rf + m̂({r̂})(2αRf − c f)`; both vanish for a resolvent.
    /// Infinite ends report the derivative at the outermost solver node.
    pub fn boundary_condition_check(&self, f: &PiecewiseFn<T>) -> Result<BoundaryCheck<T>, KernelError> {
        let sol = &*self.solution;
        let m_hat = self.pair.image_measure();
        let iv = m_hat.interval;
        let two_alpha = self.alpha + self.alpha;
        let scale = self.pair.scale();
        let left = if !iv.left.is_finite() {
            let x = sol.nodes()[0].x;
            Some(self.resolvent_with_derivatives(f, x)?.2)
        } else if iv.left_included {
            let (r, _, dp) = self.resolvent_with_derivatives(f, iv.left)?;
            let fl = f.eval(scale.preimage(iv.left).unwrap_or(self.pair.measure().interval.left));
            Some(dp - m_hat.atom_at(iv.left) * (two_alpha * r - self.c * fl))
        } else {
            None
        };
        let right = if !iv.right.is_finite() {
            let x = sol.nodes().last().expect("nodes").x;
            Some(self.resolvent_with_derivatives(f, x)?.1)
        } else if sol.right.is_regular() && sol.right.is_reflecting() {
            let (r, dm, _) = self.resolvent_with_derivatives(f, iv.right)?;
            let fr = f.eval(self.pair.measure().interval.right);
            Some(dm + m_hat.atom_at(iv.right) * (two_alpha * r - self.c * fr))
        } else {
            None
        };
        Ok(BoundaryCheck { left, right })
    }

    /// Column `x̂ ↦ c ĝ(x̂, ŷ)` with one-sided derivatives.
    fn column(&self, xh: T, yh: T) -> Result<(T, T, T), KernelError> {
        let sol = &*self.solution;
        let py = sol.eval(yh)?;
        let px = sol.eval(xh)?;
        let ((dl_m, dl_p), (dv_m, dv_p)) = sol.kernel_pair_derivatives(xh)?;
        let k = self.c / sol.wronskian;
        let ul = |p: &SolutionPoint<T>| p.u * (sol.left_a + sol.left_b * p.h);
        let v = |p: &SolutionPoint<T>| sol.gamma * p.u * (p.t + sol.inv_k);
        if approx_eq(xh, yh) {
            let g = k * ul(&px) * v(&px);
            return Ok((g, k * dl_m * v(&px), k * ul(&px) * dv_p));
        }
        if xh < yh {
            let vy = v(&py);
            Ok((k * ul(&px) * vy, k * dl_m * vy, k * dl_p * vy))
        } else {
            let uy = ul(&py);
            Ok((k * uy * v(&px), k * uy * dv_m, k * uy * dv_p))
        }
    }

    /// Checks that the column `g(·, ŷ)` solves `½ D_m̂ D f = α f` off `ŷ`
    /// between consecutive grid points (image coordinates) and at atoms;
    /// reports the derivative jump at `ŷ`.
    pub fn harmonic_residual_check(&self, yh: T, grid: &[T]) -> Result<ResidualReport<T>, KernelError> {
        let m_hat = self.pair.image_measure();
        let two_alpha = self.alpha + self.alpha;
        let mut xs: Vec<T> = grid.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        xs.dedup_by(|a, b| approx_eq(*a, *b));
        let mut worst = T::zero();
        let mut jump = None;
        let mut checked = 0;
        for (i, &x) in xs.iter().enumerate() {
            let (g, dm, dp) = self.column(x, yh)?;
            let atom = m_hat.atom_at(x);
            if approx_eq(x, yh) {
                jump = Some(dp - dm - two_alpha * g * atom);
            } else if atom > T::zero() {
                let want = two_alpha * g * atom;
                let err = ((dp - dm) - want).abs() / want.abs().max((dp - dm).abs()).max(T::min_positive_value());
                worst = worst.max(err);
                checked += 1;
            }
            if i + 1 == xs.len() {
                break;
            }
            let b = xs[i + 1];
            if x < yh && b > yh && !approx_eq(b, yh) && !approx_eq(x, yh) {
                continue;
            }
            let (_, dm_b, _) = self.column(b, yh)?;
            let mut gfun = |z: T| self.column(z, yh).map(|c| c.0).unwrap_or(T::nan());
            let closed = m_hat.integrate(x, b, 8, &mut gfun);
            let ends = m_hat.atom_at(x) * g + m_hat.atom_at(b) * self.column(b, yh)?.0;
            let rhs = two_alpha * (closed - ends);
            let lhs = dm_b - dp;
            let scale = lhs.abs().max(rhs.abs()).max(dp.abs()).max(dm_b.abs()).max(g.abs() / (b - x));
            if scale > T::zero() {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
            checked += 1;
        }
        Ok(ResidualReport { max_residual: worst, diagonal_jump: jump, checked })
    }
}

fn tail<T: Scalar, F: Fn(T, T) -> T>(start: T, dir: T, integ: &F) -> T {
    let mut acc = T::zero();
    let mut x = start;
    let mut len = T::one().max(start.abs());
    let mut quiet = 0;
    for _ in 0..400 {
        let y = x + dir * len;
        let part = integ(x, y);
        if !part.is_finite() {
            return part;
        }
        acc = acc + part;
        if part.abs() <= T::epsilon() * lit::<T>(1e-2) * acc.abs() || (part == T::zero() && acc == T::zero()) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        x = y;
        len = len * lit(1.5);
    }
    acc
}

fn side_rank(s: Side) -> u8 {
    match s {
        Side::Left => 0,
        Side::Center => 1,
        Side::Right => 2,
    }
}

/// Finite window covering every feature of the pair; unbounded ends are
/// cut one feature-span (at least 2) beyond the outermost feature.
pub fn default_window<T: Scalar>(pair: &QuasiPair<T>) -> (T, T) {
    let m = pair.measure();
    let iv = m.interval;
    let mut pts: Vec<T> = pair.scale().breakpoints();
    pts.extend(m.atoms().iter().map(|a| a.x));
    pts.extend(m.densities().iter().flat_map(|p| [p.x0, p.x1]));
    pts.push(pair.base());
    pts.retain(|x| x.is_finite());
    let lo0 = pts.iter().copied().fold(pair.base(), T::min);
    let hi0 = pts.iter().copied().fold(pair.base(), T::max);
    let span = (hi0 - lo0).max(lit(2.0));
    let lo = if iv.left.is_finite() { iv.left } else { lo0 - span };
    let hi = if iv.right.is_finite() { iv.right } else { hi0 + span };
    (lo, hi)
}

/// Boundary relations returned by [`Kernel::boundary_condition_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck<T> {
    pub left: Option<T>,
    pub right: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    /// Largest relative defect of the harmonic relation over cells and atoms.
    pub max_residual: T,
    /// `D⁺g − D⁻g − 2α g m̂({ŷ})` at `ŷ`; equals `−c`.
    pub diagonal_jump: Option<T>,
    pub checked: usize,
}

/// Fit of `c'` in `R_α f − R_β f = c' (β − α) R_α R_β f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport<T> {
    /// `None` when the right-hand side vanishes identically.
    pub factor: Option<T>,
    pub residual: T,
    pub lhs: Vec<T>,
    pub rhs: Vec<T>,
}

/// Least-squares identity factor over the sample points.
pub fn resolvent_identity_check<T: Scalar>(
    ka: &Kernel<T>,
    kb: &Kernel<T>,
    f: &PiecewiseFn<T>,
    points: &[SplitPoint<T>],
) -> Result<IdentityReport<T>, KernelError> {
    let (alpha, beta) = (ka.alpha, kb.alpha);
    let brk = f.breakpoints();
    let rows: Vec<(T, T)> = points
        .par_iter()
        .map(|x| -> Result<(T, T), KernelError> {
            let ra = ka.resolvent_apply(f, *x)?;
            let rb = kb.resolvent_apply(f, *x)?;
            let inner = |y: T| kb.resolvent_apply(f, SplitPoint::center(y)).unwrap_or(T::nan());
            let rab = if f.is_zero() { T::zero() } else { ka.apply_fn(*x, &inner, &brk)? };
            Ok((ra - rb, (beta - alpha) * rab))
        })
        .collect::<Result<_, _>>()?;
    let lhs: Vec<T> = rows.iter().map(|r| r.0).collect();
    let rhs: Vec<T> = rows.iter().map(|r| r.1).collect();
    let num = rows.iter().fold(T::zero(), |a, r| a + r.0 * r.1);
    let den = rows.iter().fold(T::zero(), |a, r| a + r.1 * r.1);
    if den == T::zero() {
        let residual = lhs.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        return Ok(IdentityReport { factor: None, residual, lhs, rhs });
    }
    let c = num / den;
    let scale = lhs.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let resid = rows.iter().fold(T::zero(), |a, r| a.max((r.0 - c * r.1).abs()));
    Ok(IdentityReport { factor: Some(c), residual: if scale > T::zero() { resid / scale } else { resid }, lhs, rhs })
}

/// `∫ f g dm` over the original measure, by the same quadrature as the
/// resolvent; used for symmetry checks.
pub fn pairing<T: Scalar, F: Fn(T) -> T + Sync>(k: &Kernel<T>, f: &F, breaks: &[T]) -> T {
    k.integrate_m(breaks, &|y, _| f(y))
}

/// Evaluates `f̂ ∘ s` at a state, using one-sided limits on split copies.
pub fn pull_back<T: Scalar, F: Fn(T) -> T>(pair: &QuasiPair<T>, p: SplitPoint<T>, f_hat: F) -> T {
    let s = pair.scale();
    let y = match p.side {
        Side::Left => s.left_limit(p.x),
        Side::Center => s.eval(p.x),
        Side::Right => s.right_limit(p.x),
    };
    f_hat(y)
}

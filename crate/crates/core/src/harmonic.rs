//! α-harmonic solutions on the image axis.
//!
//! `û` solves `û(x) = 1 + 2α ∫_ê^x ∫_ê^{y+} û dm̂ dy`. It is propagated
//! outward from the base point panel by panel: on a panel carrying a
//! polynomial density the two fundamental solutions are summed as local
//! Picard series, across atoms the right derivative jumps by `2α m û`, and on
//! mass-free panels everything is affine. `H = ∫_{l̂}^x û⁻²` and
//! `T = ∫_x^{r̂} û⁻²` are accumulated from their own ends, so `û⁻ = ûH`,
//! `û⁺ = ûT` and the decreasing solution never come from a difference of
//! large numbers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{classify_measure_left, classify_measure_right, BoundaryClass, BoundaryError};
use crate::measure::{Density, SpeedMeasure};
use crate::pair::QuasiPair;
use crate::poly;
use crate::quadrature::GaussLegendre;
use crate::scalar::{approx_eq, factorial, lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTol(f64),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("integral of u^-2 diverges at the {0} end (no mass beyond the base point)")]
    Divergent(&'static str),
    #[error("series on a panel did not reach the tolerance (bound {0})")]
    SeriesNotConverged(f64),
    #[error("solution overflowed near {0}")]
    Overflow(f64),
    #[error("panel budget exhausted")]
    TooManyPanels,
    #[error("point {0} lies outside the image interval")]
    Outside(f64),
    #[error("the iterate route needs finitely many atoms and polynomial densities on a bounded range")]
    Unsupported,
}

fn f<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions<T> {
    /// Relative accuracy target for series truncation and tail cut-offs.
    pub tol: T,
    /// Image window that must be covered by explicit panels.
    pub view: Option<(T, T)>,
    pub max_panels: usize,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self { tol: lit(1e-12), view: None, max_panels: 2_000_000 }
    }
}

/// Node of the solution grid with both one-sided derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub x: T,
    pub mass: T,
    pub u: T,
    pub du_minus: T,
    pub du_plus: T,
    /// `∫_{l̂}^x û⁻²`.
    pub h: T,
    /// `∫_x^{r̂} û⁻²`.
    pub t: T,
}

#[derive(Debug, Clone)]
enum Basis<T> {
    Affine,
    /// Local fundamental pair with `φ(0)=1, φ'(0)=0, ψ(0)=0, ψ'(0)=1`.
    Series {
        phi: Vec<T>,
        psi: Vec<T>,
        dphi: Vec<T>,
        dpsi: Vec<T>,
    },
}

#[derive(Debug, Clone)]
struct Panel<T> {
    x0: T,
    x1: T,
    basis: Basis<T>,
    /// `∫ û⁻²` over the panel.
    q: T,
}

impl<T: Scalar> Panel<T> {
    fn len(&self) -> T {
        self.x1 - self.x0
    }

    /// `(u, u')` at local time `t` from `(u, u')` at the left end.
    fn forward(&self, u0: T, d0: T, t: T) -> (T, T) {
        match &self.basis {
            Basis::Affine => (u0 + d0 * t, d0),
            Basis::Series { phi, psi, dphi, dpsi } => {
                (u0 * poly::eval(phi, t) + d0 * poly::eval(psi, t), u0 * poly::eval(dphi, t) + d0 * poly::eval(dpsi, t))
            }
        }
    }

    /// `(u, u')` at the left end from `(u, u')` at the right end; the
    /// transfer matrix has unit determinant.
    fn backward(&self, u1: T, d1: T) -> (T, T) {
        let h = self.len();
        match &self.basis {
            Basis::Affine => (u1 - d1 * h, d1),
            Basis::Series { phi, psi, dphi, dpsi } => {
                let (a, b) = (poly::eval(phi, h), poly::eval(psi, h));
                let (c, d) = (poly::eval(dphi, h), poly::eval(dpsi, h));
                (d * u1 - b * d1, -c * u1 + a * d1)
            }
        }
    }

    /// `∫_{t0}^{t1} u⁻²` given `(u, u')` at the left end.
    fn inv_sq(&self, gl: &GaussLegendre<T>, u0: T, d0: T, t0: T, t1: T) -> T {
        if t1 <= t0 {
            return T::zero();
        }
        match &self.basis {
            Basis::Affine => {
                let a = u0 + d0 * t0;
                let b = u0 + d0 * t1;
                (t1 - t0) / (a * b)
            }
            Basis::Series { .. } => gl.adaptive(t0, t1, lit(1e-15), 40, &mut |t| {
                let u = self.forward(u0, d0, t).0;
                T::one() / (u * u)
            }),
        }
    }
}

/// Precomputed one-dimensional problem: image measure, base and end data.
#[derive(Debug, Clone)]
pub struct ImageProblem<T> {
    pub measure: SpeedMeasure<T>,
    pub base: T,
}

impl<T: Scalar> ImageProblem<T> {
    pub fn from_pair(pair: &QuasiPair<T>) -> Self {
        Self { measure: pair.image_measure().clone(), base: pair.base_image() }
    }
}

/// Solutions `û`, `û±`, `v` with `γ̄`, `γ̲`, the selected `γ` and the
/// Wronskian of the kernel pair.
#[derive(Debug, Clone)]
pub struct HarmonicSolution<T> {
    pub alpha: T,
    pub base: T,
    pub l_hat: T,
    pub r_hat: T,
    nodes: Vec<Node<T>>,
    panels: Vec<Panel<T>>,
    pub right: BoundaryClass<T>,
    pub left: BoundaryClass<T>,
    /// `∫_{l̂}^{r̂} û⁻²`.
    pub j_total: T,
    pub gamma_bar: T,
    pub gamma_underline: T,
    pub gamma: T,
    /// `1/K` with `K = û D⁻û + 2α m̂({r̂}) û²` at a reflecting right end, else `0`.
    pub inv_k: T,
    /// `u_L = û (A + B H)` is the increasing solution of the kernel.
    pub left_a: T,
    pub left_b: T,
    /// `W(u_L, v) = Aγ + B`.
    pub wronskian: T,
    /// Largest local series remainder bound accepted.
    pub max_remainder: T,
    gl: GaussLegendre<T>,
}

/// Value of every solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionPoint<T> {
    pub x: T,
    pub u: T,
    pub du_minus: T,
    pub du_plus: T,
    pub h: T,
    pub t: T,
}

/// Panel layout for `[a, b]`: nodes `(x, mass)` and panel densities.
struct Layout<T> {
    nodes: Vec<(T, T)>,
    densities: Vec<Option<Vec<T>>>,
}

fn binomial_series<T: Scalar>(coeff: T, d0: T, p: T, sign: T, h: T) -> Vec<T> {
    // coeff (d0 + sign·t)^p = coeff d0^p Σ binom(p, k) (sign t / d0)^k
    let mut out = Vec::new();
    let mut c = coeff * d0.powf(p);
    let lead = c.abs();
    let mut hk = T::one();
    for k in 0..400 {
        out.push(c);
        if k > 2 && (c * hk).abs() <= lead * lit(1e-18) {
            break;
        }
        let kk = lit::<T>(k as f64);
        c = c * (p - kk) / (kk + T::one()) * sign / d0;
        hk = hk * h;
    }
    out
}

/// Local density on `[x, x + h]` as a polynomial in `t = · - x`.
fn local_density<T: Scalar>(m: &SpeedMeasure<T>, x: T, h: T) -> Option<Vec<T>> {
    let mut acc: Vec<T> = Vec::new();
    let mid = x + h * lit(0.5);
    for p in m.densities() {
        if !(p.x0 <= mid && p.x1 >= mid) {
            continue;
        }
        let local = match &p.density {
            Density::Poly(c) => poly::compose_affine(c, x - p.origin(), T::one()),
            Density::Power { coeff, center, exponent } => {
                if *center <= x {
                    binomial_series(*coeff, x - *center, *exponent, T::one(), h)
                } else {
                    binomial_series(*coeff, *center - x, *exponent, -T::one(), h)
                }
            }
        };
        acc = poly::add(&acc, &local);
    }
    if acc.iter().all(|c| *c == T::zero()) {
        None
    } else {
        Some(acc)
    }
}

fn power_centres<T: Scalar>(m: &SpeedMeasure<T>, mid: T) -> Vec<T> {
    m.densities()
        .iter()
        .filter(|p| p.x0 <= mid && p.x1 >= mid)
        .filter_map(|p| match p.density {
            Density::Power { center, .. } => Some(center),
            _ => None,
        })
        .collect()
}

/// Event points in `[a, b]`: atoms, piece ends, sequence atoms and extras.
fn events<T: Scalar>(m: &SpeedMeasure<T>, a: T, b: T, extra: &[T]) -> Vec<T> {
    let inside = |x: T| x.is_finite() && (x >= a || approx_eq(x, a)) && (x <= b || approx_eq(x, b));
    let mut ev: Vec<T> = vec![a, b];
    ev.extend(m.atoms().iter().map(|at| at.x).filter(|x| inside(*x)));
    for p in m.densities() {
        for x in [p.x0, p.x1] {
            if inside(x) {
                ev.push(x);
            }
        }
    }
    for s in m.sequences() {
        let Some(k0) = s.first_index_after(a, true) else { continue };
        let lim = s.limit();
        let cut = lit::<T>(1e-13) * (T::one() + lim.abs());
        let mut k = k0;
        while k < k0 + 1_000_000 {
            let x = s.position(k);
            if !inside(x) {
                break;
            }
            ev.push(x);
            if lim.is_finite() && s.distance_to_limit(k) < cut {
                break;
            }
            k += 1;
        }
    }
    ev.extend(extra.iter().copied().filter(|x| inside(*x)));
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite events"));
    let mut out: Vec<T> = Vec::with_capacity(ev.len());
    for x in ev {
        match out.last() {
            Some(&last) if approx_eq(last, x) => {}
            _ => out.push(x),
        }
    }
    out
}

/// Splits `[a, b]` into panels small enough for fast local series and
/// graded towards power singularities.
fn layout<T: Scalar>(m: &SpeedMeasure<T>, alpha: T, a: T, b: T, extra: &[T]) -> Layout<T> {
    let ev = events(m, a, b, extra);
    let mut nodes: Vec<(T, T)> = vec![(ev[0], m.atom_at(ev[0]))];
    let mut densities = Vec::new();
    let two_alpha = alpha + alpha;
    for w in ev.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let eps_len = (hi - lo) * lit(1e-12);
        let mut x = lo;
        let mut lump_here = T::zero();
        while x < hi && !approx_eq(x, hi) {
            let mut h = hi - x;
            let mut lump = false;
            let mid = x + (hi - x) * lit(0.5);
            for c in power_centres(m, mid) {
                if c <= x {
                    let d = x - c;
                    if d <= eps_len {
                        h = h.min(eps_len);
                        lump = true;
                    } else {
                        h = h.min(d * lit(0.5));
                    }
                } else {
                    let d = c - x;
                    if d <= eps_len * lit(2.0) {
                        lump = true;
                    } else {
                        h = h.min(d * lit(0.5));
                    }
                }
            }
            if lump {
                // Mass of a sliver next to a singular point, lumped on a node.
                let mass = m.densities().iter().fold(T::zero(), |acc, p| acc + p.mass(x, x + h));
                if mass.is_finite() {
                    lump_here = lump_here + mass;
                }
                if let Some(last) = nodes.last_mut() {
                    last.1 = last.1 + lump_here;
                }
                lump_here = T::zero();
                densities.push(None);
            } else {
                let mut dens = local_density(m, x, h);
                for _ in 0..80 {
                    let Some(p) = &dens else { break };
                    let bound = poly::abs_bound(p, h);
                    if two_alpha * bound * h * h <= T::one() {
                        break;
                    }
                    h = h.min((T::one() / (two_alpha * bound)).sqrt()).min(h * lit(0.5));
                    dens = local_density(m, x, h);
                }
                densities.push(dens);
            }
            let next = if approx_eq(x + h, hi) { hi } else { x + h };
            let mass = if next == hi { m.atom_at(hi) } else { T::zero() };
            nodes.push((next, mass));
            x = next;
        }
    }
    Layout { nodes, densities }
}

fn series_basis<T: Scalar>(p: &[T], alpha: T, h: T, tol: T) -> Result<(Basis<T>, T), HarmonicError> {
    let two_alpha = alpha + alpha;
    let mut out = Vec::new();
    let mut worst = T::zero();
    for start in [vec![T::one()], vec![T::zero(), T::one()]] {
        let mut total = start.clone();
        let mut term = start;
        let mut done = false;
        for _ in 0..200 {
            let mut next = poly::integrate(&poly::integrate(&poly::mul(p, &term)));
            next = poly::scale(&next, two_alpha);
            poly::trim(&mut next, h, lit(1e-20));
            total = poly::add(&total, &next);
            let size = poly::abs_bound(&next, h);
            term = next;
            let scale = poly::abs_bound(&total, h);
            if size <= tol * lit::<T>(1e-4) * scale {
                worst = worst.max(size / scale);
                done = true;
                break;
            }
        }
        if !done {
            return Err(HarmonicError::SeriesNotConverged(f(poly::abs_bound(&term, h))));
        }
        out.push(total);
    }
    let psi = out.pop().expect("two series");
    let phi = out.pop().expect("two series");
    Ok((Basis::Series { dphi: poly::deriv(&phi), dpsi: poly::deriv(&psi), phi, psi }, worst))
}

/// Panels and nodes for a layout (derivatives still unset).
fn build_panels<T: Scalar>(lay: Layout<T>, alpha: T, tol: T) -> Result<(Vec<Node<T>>, Vec<Panel<T>>, T), HarmonicError> {
    let mut worst = T::zero();
    let nodes: Vec<Node<T>> = lay
        .nodes
        .iter()
        .map(|&(x, mass)| Node { x, mass, u: T::nan(), du_minus: T::nan(), du_plus: T::nan(), h: T::nan(), t: T::nan() })
        .collect();
    let mut panels = Vec::with_capacity(lay.densities.len());
    for (i, d) in lay.densities.into_iter().enumerate() {
        let (x0, x1) = (nodes[i].x, nodes[i + 1].x);
        let basis = match d {
            None => Basis::Affine,
            Some(p) => {
                let (b, r) = series_basis(&p, alpha, x1 - x0, tol)?;
                worst = worst.max(r);
                b
            }
        };
        panels.push(Panel { x0, x1, basis, q: T::nan() });
    }
    Ok((nodes, panels, worst))
}

fn sweep_right<T: Scalar>(nodes: &mut [Node<T>], panels: &[Panel<T>], from: usize, two_alpha: T) -> Result<(), HarmonicError> {
    for i in from..panels.len() {
        let (u1, d1) = panels[i].forward(nodes[i].u, nodes[i].du_plus, panels[i].len());
        if !u1.is_finite() || !d1.is_finite() {
            return Err(HarmonicError::Overflow(f(nodes[i + 1].x)));
        }
        let n = &mut nodes[i + 1];
        n.u = u1;
        n.du_minus = d1;
        n.du_plus = d1 + two_alpha * n.mass * u1;
    }
    Ok(())
}

fn sweep_left<T: Scalar>(nodes: &mut [Node<T>], panels: &[Panel<T>], from: usize, two_alpha: T) -> Result<(), HarmonicError> {
    for i in (0..from).rev() {
        let (u0, d0) = panels[i].backward(nodes[i + 1].u, nodes[i + 1].du_minus);
        if !u0.is_finite() || !d0.is_finite() {
            return Err(HarmonicError::Overflow(f(nodes[i].x)));
        }
        let n = &mut nodes[i];
        n.u = u0;
        n.du_plus = d0;
        n.du_minus = d0 - two_alpha * n.mass * u0;
    }
    Ok(())
}

/// Solves the image problem.
pub fn solve<T: Scalar>(
    problem: &ImageProblem<T>,
    alpha: T,
    opts: &SolveOptions<T>,
) -> Result<HarmonicSolution<T>, HarmonicError> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(HarmonicError::BadAlpha(f(alpha)));
    }
    if !(opts.tol > T::zero()) {
        return Err(HarmonicError::BadTol(f(opts.tol)));
    }
    let m = &problem.measure;
    let base = problem.base;
    let (l_hat, r_hat) = (m.interval.left, m.interval.right);
    let right = classify_measure_right(m, base)?;
    let left = classify_measure_left(m, base)?;
    let two_alpha = alpha + alpha;
    let gl = GaussLegendre::new(20);

    // Core range: every finite event plus the view window.
    let mut extra = vec![base];
    if let Some((a, b)) = opts.view {
        extra.push(a.max(l_hat));
        extra.push(b.min(r_hat));
    }
    let finite_pts: Vec<T> = events(m, base, base, &[])
        .into_iter()
        .chain(m.atoms().iter().map(|a| a.x))
        .chain(m.densities().iter().flat_map(|p| [p.x0, p.x1]))
        .chain(extra.iter().copied())
        .chain([l_hat, r_hat])
        .filter(|x| x.is_finite())
        .collect();
    let mut lo = finite_pts.iter().copied().fold(base, T::min);
    let mut hi = finite_pts.iter().copied().fold(base, T::max);
    for s in m.sequences() {
        lo = lo.min(s.position(s.first as u64));
        let lim = s.limit();
        hi = hi.max(if lim.is_finite() { lim.min(r_hat) } else { s.position(s.first as u64) });
    }

    let (mut nodes, mut panels, mut worst) = build_panels(layout(m, alpha, lo, hi, &extra), alpha, opts.tol)?;
    let ib = nodes.iter().position(|n| approx_eq(n.x, base)).expect("base is a node");
    {
        let n = &mut nodes[ib];
        n.u = T::one();
        n.du_minus = T::zero();
        n.du_plus = two_alpha * n.mass;
    }
    sweep_right(&mut nodes, &panels, ib, two_alpha)?;
    sweep_left(&mut nodes, &panels, ib, two_alpha)?;

    // Right tail beyond the core.
    let mut t_end = T::zero();
    if !r_hat.is_finite() {
        let mut acc = T::zero();
        loop {
            let last = *nodes.last().expect("nodes");
            let x = last.x;
            let beyond = m.mass_in(x, false, T::infinity(), false);
            if beyond == T::zero() {
                if !(last.du_plus > T::zero()) {
                    return Err(HarmonicError::Divergent("right"));
                }
                t_end = T::one() / (last.u * last.du_plus);
                break;
            }
            if last.du_plus > T::zero() {
                let bound = T::one() / (last.u * last.du_plus);
                if acc > T::zero() && bound <= opts.tol * lit::<T>(1e-3) * acc {
                    t_end = bound;
                    break;
                }
            }
            let step = panels.last().map(|p| p.len()).unwrap_or(T::one());
            let len = (step * lit(4.0)).max((x - base).abs() * lit(0.5)).max(lit(1e-3));
            let (mut cn, cp, w) = build_panels(layout(m, alpha, x, x + len, &[]), alpha, opts.tol)?;
            worst = worst.max(w);
            cn[0] = last;
            sweep_right(&mut cn, &cp, 0, two_alpha)?;
            for (i, p) in cp.iter().enumerate() {
                acc = acc + p.inv_sq(&gl, cn[i].u, cn[i].du_plus, T::zero(), p.len());
            }
            nodes.extend_from_slice(&cn[1..]);
            panels.extend(cp);
            if panels.len() > opts.max_panels {
                return Err(HarmonicError::TooManyPanels);
            }
        }
    }
    // Left tail.
    let mut h_start = T::zero();
    if !l_hat.is_finite() {
        let mut acc = T::zero();
        let mut pre_nodes: Vec<Node<T>> = Vec::new();
        let mut pre_panels: Vec<Panel<T>> = Vec::new();
        loop {
            let first = pre_nodes.last().copied().unwrap_or(nodes[0]);
            let x = first.x;
            let before = m.mass_in(T::neg_infinity(), false, x, false);
            if before == T::zero() {
                if !(first.du_minus < T::zero()) {
                    return Err(HarmonicError::Divergent("left"));
                }
                h_start = T::one() / (first.u * -first.du_minus);
                break;
            }
            if first.du_minus < T::zero() {
                let bound = T::one() / (first.u * -first.du_minus);
                if acc > T::zero() && bound <= opts.tol * lit::<T>(1e-3) * acc {
                    h_start = bound;
                    break;
                }
            }
            let step = pre_panels.last().or(panels.first()).map(|p| p.len()).unwrap_or(T::one());
            let len = (step * lit(4.0)).max((x - base).abs() * lit(0.5)).max(lit(1e-3));
            let (mut cn, cp, w) = build_panels(layout(m, alpha, x - len, x, &[]), alpha, opts.tol)?;
            worst = worst.max(w);
            let k = cn.len() - 1;
            cn[k] = first;
            sweep_left(&mut cn, &cp, k, two_alpha)?;
            for (i, p) in cp.iter().enumerate() {
                acc = acc + p.inv_sq(&gl, cn[i].u, cn[i].du_plus, T::zero(), p.len());
            }
            for n in cn[..k].iter().rev() {
                pre_nodes.push(*n);
            }
            for p in cp.into_iter().rev() {
                pre_panels.push(p);
            }
            if pre_panels.len() + panels.len() > opts.max_panels {
                return Err(HarmonicError::TooManyPanels);
            }
        }
        pre_nodes.reverse();
        pre_panels.reverse();
        pre_nodes.extend_from_slice(&nodes);
        pre_panels.extend(panels);
        nodes = pre_nodes;
        panels = pre_panels;
    }

    for (i, p) in panels.iter_mut().enumerate() {
        p.q = p.inv_sq(&gl, nodes[i].u, nodes[i].du_plus, T::zero(), p.x1 - p.x0);
    }
    let n = nodes.len();
    nodes[n - 1].t = t_end;
    for i in (0..n - 1).rev() {
        nodes[i].t = nodes[i + 1].t + panels[i].q;
    }
    nodes[0].h = h_start;
    for i in 0..n - 1 {
        nodes[i + 1].h = nodes[i].h + panels[i].q;
    }
    let ib = nodes.iter().position(|nd| approx_eq(nd.x, base)).expect("base is a node");
    let j_total = nodes[ib].h + nodes[ib].t;
    if !j_total.is_finite() {
        return Err(HarmonicError::Divergent(if nodes[ib].t.is_finite() { "left" } else { "right" }));
    }

    let gamma_bar = T::one() / j_total;
    let last = nodes[n - 1];
    let (gamma_underline, inv_k) = if right.is_regular() {
        let tangent = last.u * last.du_minus;
        let gu = T::one() / (j_total + T::one() / tangent);
        let ik = if right.is_reflecting() { T::one() / (tangent + two_alpha * last.mass * last.u * last.u) } else { T::zero() };
        (gu, ik)
    } else {
        (gamma_bar, T::zero())
    };
    let gamma = T::one() / (j_total + inv_k);
    let first = nodes[0];
    let (left_a, left_b) = if left.is_regular() && left.is_reflecting() {
        (T::one(), first.u * (two_alpha * first.mass * first.u - first.du_plus))
    } else {
        (T::zero(), T::one())
    };
    let wronskian = left_a * gamma + left_b;
    Ok(HarmonicSolution {
        alpha,
        base,
        l_hat,
        r_hat,
        nodes,
        panels,
        right,
        left,
        j_total,
        gamma_bar,
        gamma_underline,
        gamma,
        inv_k,
        left_a,
        left_b,
        wronskian,
        max_remainder: worst,
        gl,
    })
}

impl<T: Scalar> HarmonicSolution<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    /// Every solution at `x` (image coordinate).
    pub fn eval(&self, x: T) -> Result<SolutionPoint<T>, HarmonicError> {
        let inside_hull = (x >= self.l_hat || approx_eq(x, self.l_hat)) && (x <= self.r_hat || approx_eq(x, self.r_hat));
        if !inside_hull || x.is_nan() {
            return Err(HarmonicError::Outside(f(x)));
        }
        let n = self.nodes.len();
        let first = self.nodes[0];
        let last = self.nodes[n - 1];
        if x < first.x && !approx_eq(x, first.x) {
            let d = first.du_minus;
            let u = first.u + d * (x - first.x);
            let h = if d < T::zero() { T::one() / (u * -d) } else { T::infinity() };
            let tail = if d < T::zero() { first.h - h } else { T::zero() };
            return Ok(SolutionPoint { x, u, du_minus: d, du_plus: d, h, t: first.t + tail.max(T::zero()) });
        }
        if x > last.x && !approx_eq(x, last.x) {
            let d = last.du_plus;
            let u = last.u + d * (x - last.x);
            let t = T::one() / (u * d);
            let h = last.h + (last.t - t).max(T::zero());
            return Ok(SolutionPoint { x, u, du_minus: d, du_plus: d, h, t });
        }
        let i = self.nodes.partition_point(|nd| nd.x < x && !approx_eq(nd.x, x));
        if i < n && approx_eq(self.nodes[i].x, x) {
            let nd = self.nodes[i];
            return Ok(SolutionPoint { x, u: nd.u, du_minus: nd.du_minus, du_plus: nd.du_plus, h: nd.h, t: nd.t });
        }
        let k = i - 1;
        let p = &self.panels[k];
        let nd = self.nodes[k];
        let tl = x - p.x0;
        let (u, du) = p.forward(nd.u, nd.du_plus, tl);
        let h = nd.h + p.inv_sq(&self.gl, nd.u, nd.du_plus, T::zero(), tl);
        let t = self.nodes[k + 1].t + p.inv_sq(&self.gl, nd.u, nd.du_plus, tl, p.len());
        Ok(SolutionPoint { x, u, du_minus: du, du_plus: du, h, t })
    }

    pub fn u_hat(&self, x: T) -> Result<T, HarmonicError> {
        Ok(self.eval(x)?.u)
    }

    /// `û⁻ = û H`.
    pub fn u_minus(&self, x: T) -> Result<T, HarmonicError> {
        let p = self.eval(x)?;
        Ok(p.u * p.h)
    }

    /// `û⁺ = û T`.
    pub fn u_plus(&self, x: T) -> Result<T, HarmonicError> {
        let p = self.eval(x)?;
        Ok(p.u * p.t)
    }

    /// Decreasing solution `v = û - γ û⁻ = γ û (T + 1/K)`.
    pub fn v(&self, x: T) -> Result<T, HarmonicError> {
        let p = self.eval(x)?;
        Ok(v_of(self, &p))
    }

    /// Increasing solution of the kernel, `û (A + B H)`.
    pub fn u_left(&self, x: T) -> Result<T, HarmonicError> {
        let p = self.eval(x)?;
        Ok(p.u * (self.left_a + self.left_b * p.h))
    }

    /// One-sided derivatives `(D⁻, D⁺)` of `(u_L, v)` at `x`.
    pub fn kernel_pair_derivatives(&self, x: T) -> Result<((T, T), (T, T)), HarmonicError> {
        let p = self.eval(x)?;
        let (a, b) = (self.left_a, self.left_b);
        let inv_u = T::one() / p.u;
        let dl = |du: T| du * (a + b * p.h) + b * inv_u;
        let dv = |du: T| self.gamma * (du * (p.t + self.inv_k) - inv_u);
        Ok(((dl(p.du_minus), dl(p.du_plus)), (dv(p.du_minus), dv(p.du_plus))))
    }

    /// `W(u_L, v)` evaluated numerically at `x`.
    pub fn wronskian_at(&self, x: T) -> Result<T, HarmonicError> {
        let p = self.eval(x)?;
        let ((_, dl), (_, dv)) = self.kernel_pair_derivatives(x)?;
        let ul = p.u * (self.left_a + self.left_b * p.h);
        Ok(dl * v_of(self, &p) - dv * ul)
    }

    /// Image-space kernel `ĝ(x, y) = u_L(x ∧ y) v(x ∨ y) / W`.
    pub fn kernel(&self, x: T, y: T) -> Result<T, HarmonicError> {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        let pa = self.eval(a)?;
        let pb = self.eval(b)?;
        Ok(self.kernel_from_points(&pa, &pb))
    }

    /// Kernel from pre-evaluated points, `pa.x ≤ pb.x`.
    pub fn kernel_from_points(&self, pa: &SolutionPoint<T>, pb: &SolutionPoint<T>) -> T {
        let ul = pa.u * (self.left_a + self.left_b * pa.h);
        ul * v_of(self, pb) / self.wronskian
    }

    /// Solution of the same equation with prescribed value and right
    /// derivative at the base point, on every node.
    pub fn solve_ivp(&self, u0: T, d0: T) -> Vec<Node<T>> {
        let two_alpha = self.alpha + self.alpha;
        let mut nodes = self.nodes.clone();
        let ib = nodes.iter().position(|nd| approx_eq(nd.x, self.base)).expect("base node");
        nodes[ib].u = u0;
        nodes[ib].du_plus = d0;
        nodes[ib].du_minus = d0 - two_alpha * nodes[ib].mass * u0;
        // Overflow is reported only by the main solve; here it just propagates.
        let _ = sweep_right(&mut nodes, &self.panels, ib, two_alpha);
        let _ = sweep_left(&mut nodes, &self.panels, ib, two_alpha);
        nodes
    }

    /// Evaluation grid: all nodes inside `[a, b]` plus `n` uniform points.
    pub fn grid(&self, a: T, b: T, n: usize) -> Result<Vec<SolutionPoint<T>>, HarmonicError> {
        let mut xs: Vec<T> = self.nodes.iter().map(|nd| nd.x).filter(|x| *x >= a && *x <= b).collect();
        for k in 0..n {
            let s = if n > 1 { lit::<T>(k as f64) / lit::<T>((n - 1) as f64) } else { T::zero() };
            xs.push(a + (b - a) * s);
        }
        xs.sort_by(|x, y| x.partial_cmp(y).expect("finite grid"));
        xs.dedup_by(|x, y| approx_eq(*x, *y));
        xs.into_iter().map(|x| self.eval(x)).collect()
    }
}

fn v_of<T: Scalar>(s: &HarmonicSolution<T>, p: &SolutionPoint<T>) -> T {
    s.gamma * p.u * (p.t + s.inv_k)
}

/// Solves the image problem of a validated pair.
pub fn solve_pair<T: Scalar>(
    pair: &QuasiPair<T>,
    alpha: T,
    opts: &SolveOptions<T>,
) -> Result<HarmonicSolution<T>, HarmonicError> {
    solve(&ImageProblem::from_pair(pair), alpha, opts)
}

/// Global Picard iterates `ûⁿ` (without the `(2α)ⁿ` factor) at `points`,
/// computed by exact piecewise-polynomial integration. Independent of the
/// panel series; restricted to finitely many atoms, polynomial densities and
/// a bounded range.
pub fn picard_iterates<T: Scalar>(
    m: &SpeedMeasure<T>,
    base: T,
    n_terms: usize,
    points: &[T],
) -> Result<Vec<Vec<T>>, HarmonicError> {
    if !m.sequences().is_empty() || m.densities().iter().any(|p| matches!(p.density, Density::Power { .. })) {
        return Err(HarmonicError::Unsupported);
    }
    let mut lo = base;
    let mut hi = base;
    for x in points.iter().copied().chain(m.atoms().iter().map(|a| a.x)) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    for p in m.densities() {
        for x in [p.x0, p.x1] {
            let x = x.max(lo).min(hi);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(HarmonicError::Unsupported);
    }
    let mut extra = points.to_vec();
    extra.push(base);
    let ev = events(m, lo, hi, &extra);
    let masses: Vec<T> = ev.iter().map(|&x| m.atom_at(x)).collect();
    let dens: Vec<Vec<T>> = ev.windows(2).map(|w| local_density(m, w[0], w[1] - w[0]).unwrap_or_default()).collect();
    let ib = ev.iter().position(|x| approx_eq(*x, base)).expect("base event");
    let np = ev.len() - 1;
    // Iterate n as a polynomial per panel in local t.
    let mut cur: Vec<Vec<T>> = vec![vec![T::one()]; np];
    let mut node_vals: Vec<T> = vec![T::one(); ev.len()];
    let mut out = vec![points.iter().map(|_| T::one()).collect::<Vec<T>>()];
    for _ in 1..n_terms {
        let mut next: Vec<Vec<T>> = vec![Vec::new(); np];
        let mut vals = vec![T::zero(); ev.len()];
        // Right of the base: f(x_i) = 0, f' jumps by mass·ûⁿ(x_i).
        let mut fv = T::zero();
        let mut fd = masses[ib] * node_vals[ib];
        for i in ib..np {
            let g = poly::mul(&cur[i], &dens[i]);
            let i1 = poly::integrate(&g);
            let i2 = poly::integrate(&i1);
            let h = ev[i + 1] - ev[i];
            let local = poly::add(&[fv, fd], &i2);
            next[i] = local;
            fv = fv + fd * h + poly::eval(&i2, h);
            fd = fd + poly::eval(&i1, h) + masses[i + 1] * node_vals[i + 1];
            vals[i + 1] = fv;
        }
        // Left of the base: the derivative to the left of x_i is known.
        let mut fv = T::zero();
        let mut fd_minus = T::zero();
        for i in (0..ib).rev() {
            let g = poly::mul(&cur[i], &dens[i]);
            let i1 = poly::integrate(&g);
            let i2 = poly::integrate(&i1);
            let h = ev[i + 1] - ev[i];
            let d_start = fd_minus - poly::eval(&i1, h);
            let v_start = fv - d_start * h - poly::eval(&i2, h);
            next[i] = poly::add(&[v_start, d_start], &i2);
            fv = v_start;
            fd_minus = d_start - masses[i] * node_vals[i];
            vals[i] = fv;
        }
        let at: Vec<T> = points
            .iter()
            .map(|&x| {
                let i = ev.partition_point(|e| *e < x && !approx_eq(*e, x));
                if i < ev.len() && approx_eq(ev[i], x) {
                    vals[i]
                } else {
                    poly::eval(&next[i - 1], x - ev[i - 1])
                }
            })
            .collect();
        out.push(at);
        cur = next;
        node_vals = vals;
    }
    Ok(out)
}

/// Bound `σ(x)ⁿ/n!`-type on the `n`-th iterate used for truncation reports.
pub fn iterate_bound<T: Scalar>(sigma: T, n: usize) -> T {
    sigma.powi(n as i32) / factorial(n)
}

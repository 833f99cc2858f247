//! Path samplers for the process of a pair.
//!
//! [`ChainSampler`] runs the nearest-neighbour chain of a finite atomic image
//! measure exactly. [`TimeChangeSampler`] runs Brownian motion in image
//! coordinates and changes time by `∫ L^a m̂(da)`; each step draws the local
//! time at every nearby atom from the law of Brownian-bridge local time, so
//! purely atomic measures carry no discretization error apart from steps
//! that touch two levels at once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{SpeedMeasure, SupportSet};
use crate::oracle::{AtomicChain, OracleError};
use crate::pair::QuasiPair;
use crate::scalar::{approx_eq, lit, pairwise_sum, Scalar};
use crate::scale::ScaleFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid simulation parameter: {0}")]
    BadParameter(&'static str),
    #[error("starting point {x} is not a state of the process")]
    Outside { x: f64 },
}

/// What the image Brownian motion does at an end of the image interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndBehaviour {
    Reflect,
    Kill,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions<T> {
    /// Brownian step in image time.
    pub dt: T,
    /// Process time at which paths are stopped.
    pub horizon: T,
    /// Cap on Brownian steps per path.
    pub max_steps: usize,
    /// Factor in front of `∫ L^a m̂(da)`. `1` gives the generator `½ D_m D_s`
    /// (the chain of [`AtomicChain`]).
    pub local_time_scale: T,
}

impl<T: Scalar> Default for SimOptions<T> {
    fn default() -> Self {
        Self { dt: lit(1e-3), horizon: lit(20.0), max_steps: 50_000_000, local_time_scale: T::one() }
    }
}

/// One recorded path: the process sits at `states[i]` (image `image[i]`)
/// from `times[i]` until the next entry or `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample<T> {
    pub times: Vec<T>,
    pub image: Vec<T>,
    pub states: Vec<T>,
    pub end: T,
    /// Death time if the path was killed before the horizon.
    pub lifetime: Option<T>,
    /// The step cap was reached before the horizon.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub paths: usize,
    pub lambda: f64,
    /// Bound on the contribution after the horizon: `sup|f| e^{−λH}/λ`.
    pub horizon_bias: f64,
    pub truncated: usize,
}

fn check_lambda<T: Scalar>(lambda: T, horizon: T) -> Result<(), SimError> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(SimError::BadParameter("lambda must be positive"));
    }
    if !(horizon > T::zero()) {
        return Err(SimError::BadParameter("horizon must be positive"));
    }
    Ok(())
}

/// `f(x) ∫_{t0}^{t1} e^{−λt} dt`.
#[inline]
fn discounted<T: Scalar>(lambda: T, t0: T, t1: T, fx: T) -> T {
    if t1 <= t0 {
        return T::zero();
    }
    fx * ((-lambda * t0).exp() - (-lambda * t1).exp()) / lambda
}

fn rng_for(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn summarize<T: Scalar>(values: &[T], lambda: T, horizon: T, sup_f: T, truncated: usize) -> LaplaceEstimate {
    let n = values.len();
    let nf = lit::<T>(n as f64);
    let mean = pairwise_sum(values) / nf;
    let dev: Vec<T> = values.iter().map(|v| (*v - mean) * (*v - mean)).collect();
    let var = if n > 1 { pairwise_sum(&dev) / lit::<T>((n - 1) as f64) } else { T::zero() };
    LaplaceEstimate {
        value: mean.to_f64().unwrap_or(f64::NAN),
        std_error: (var / nf).sqrt().to_f64().unwrap_or(f64::NAN),
        paths: n,
        lambda: lambda.to_f64().unwrap_or(f64::NAN),
        horizon_bias: (sup_f * (-lambda * horizon).exp() / lambda).to_f64().unwrap_or(f64::NAN),
        truncated,
    }
}

/// Exact sampler of the chain on the atoms of `m̂`.
#[derive(Debug, Clone)]
pub struct ChainSampler<T> {
    chain: AtomicChain<T>,
    original: Vec<T>,
    rates: Vec<T>,
}

impl<T: Scalar> ChainSampler<T> {
    pub fn new(pair: &QuasiPair<T>) -> Result<Self, SimError> {
        let chain = AtomicChain::from_measure(pair.image_measure())?;
        let original = chain.states.iter().map(|y| state_of(pair.scale(), *y)).collect();
        let rates = chain.holding_rates();
        Ok(Self { chain, original, rates })
    }

    pub fn chain(&self) -> &AtomicChain<T> {
        &self.chain
    }

    /// Original coordinates of the states.
    pub fn states(&self) -> &[T] {
        &self.original
    }

    /// Index of the state at original coordinate `x`.
    pub fn index_of(&self, x: T) -> Result<usize, SimError> {
        self.original.iter().position(|s| approx_eq(*s, x)).ok_or(SimError::Outside { x: x.to_f64().unwrap_or(f64::NAN) })
    }

    /// Runs one path from state `start` up to `horizon`, reporting every
    /// holding interval to `visit(t0, t1, state index)`. Returns the end time
    /// and whether the path was killed.
    pub fn run<R: Rng, V: FnMut(T, T, usize)>(&self, rng: &mut R, start: usize, horizon: T, mut visit: V) -> (T, bool) {
        let n = self.chain.len();
        let mut j = start;
        let mut t = T::zero();
        loop {
            let rate = self.rates[j];
            if rate <= T::zero() {
                visit(t, horizon, j);
                return (horizon, false);
            }
            let e: f64 = rng.sample(Exp1);
            let hold = lit::<T>(e) / rate;
            let t1 = t + hold;
            if t1 >= horizon {
                visit(t, horizon, j);
                return (horizon, false);
            }
            visit(t, t1, j);
            t = t1;
            let u: f64 = rng.random();
            let go_up = lit::<T>(u) * rate < self.chain.up[j];
            if go_up {
                if j + 1 == n {
                    return (t, true);
                }
                j += 1;
            } else {
                if j == 0 {
                    return (t, true);
                }
                j -= 1;
            }
        }
    }

    pub fn sample_path<R: Rng>(&self, rng: &mut R, x0: T, horizon: T) -> Result<PathSample<T>, SimError> {
        let start = self.index_of(x0)?;
        let mut p = PathSample { times: vec![], image: vec![], states: vec![], end: horizon, lifetime: None, truncated: false };
        let (end, killed) = self.run(rng, start, horizon, |t0, _, j| {
            p.times.push(t0);
            p.image.push(self.chain.states[j]);
            p.states.push(self.original[j]);
        });
        p.end = end;
        p.lifetime = killed.then_some(end);
        Ok(p)
    }

    /// Discounted functional `∫_0^{H∧ζ} e^{−λt} f(X_t) dt` along one path.
    pub fn laplace_path<R: Rng>(&self, rng: &mut R, start: usize, f: &[T], lambda: T, horizon: T) -> T {
        let mut acc = T::zero();
        self.run(rng, start, horizon, |t0, t1, j| acc = acc + discounted(lambda, t0, t1, f[j]));
        acc
    }
}

/// Original coordinate of the image point `y`.
fn state_of<T: Scalar>(scale: &ScaleFunction<T>, y: T) -> T {
    scale.preimage(y).unwrap_or(y)
}

/// Monte-Carlo estimate of `E_{x0} ∫_0^ζ e^{−λt} f(X_t) dt` with the chain.
pub fn estimate_chain<T: Scalar, F: Fn(T) -> T + Sync>(
    pair: &QuasiPair<T>,
    x0: T,
    f: F,
    lambda: T,
    horizon: T,
    paths: usize,
    seed: u64,
) -> Result<LaplaceEstimate, SimError> {
    check_lambda(lambda, horizon)?;
    if paths == 0 {
        return Err(SimError::BadParameter("paths must be positive"));
    }
    let sampler = ChainSampler::new(pair)?;
    let start = sampler.index_of(x0)?;
    let fv: Vec<T> = sampler.original.iter().map(|x| f(*x)).collect();
    let sup = fv.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let values: Vec<T> =
        (0..paths).into_par_iter().map(|i| sampler.laplace_path(&mut rng_for(seed, i), start, &fv, lambda, horizon)).collect();
    Ok(summarize(&values, lambda, horizon, sup, 0))
}

/// A level at which local time is charged: `mass` already includes the
/// local time factor and the doubling of atoms sitting on a reflecting end.
#[derive(Debug, Clone, Copy)]
struct Level<T> {
    y: T,
    mass: T,
    state: T,
    image: T,
}

/// Brownian motion in image coordinates time-changed by `∫ L^a m̂(da)`.
#[derive(Debug, Clone)]
pub struct TimeChangeSampler<T> {
    lo: T,
    hi: T,
    left: EndBehaviour,
    right: EndBehaviour,
    levels: Vec<Level<T>>,
    image: SpeedMeasure<T>,
    scale: ScaleFunction<T>,
    has_density: bool,
    opts: SimOptions<T>,
    window: T,
    sqrt_dt: T,
}

impl<T: Scalar> TimeChangeSampler<T> {
    pub fn new(pair: &QuasiPair<T>, opts: SimOptions<T>) -> Result<Self, SimError> {
        if !(opts.dt > T::zero()) || !opts.dt.is_finite() {
            return Err(SimError::BadParameter("dt must be positive"));
        }
        if !(opts.local_time_scale > T::zero()) {
            return Err(SimError::BadParameter("local time scale must be positive"));
        }
        let m = pair.image_measure();
        if !m.sequences().is_empty() {
            return Err(SimError::BadParameter("atom sequences are not supported by the time-change sampler"));
        }
        let iv = m.interval;
        let end = |x: T, included: bool| {
            if !x.is_finite() {
                EndBehaviour::Free
            } else if included {
                EndBehaviour::Reflect
            } else {
                EndBehaviour::Kill
            }
        };
        let left = end(iv.left, iv.left_included);
        let right = end(iv.right, iv.right_included);
        let k = opts.local_time_scale;
        let mut levels = Vec::new();
        for a in m.atoms() {
            let lv = Level { y: a.x, mass: k * a.mass, state: state_of(pair.scale(), a.x), image: a.x };
            let mut own = lv;
            for (b, beh) in [(iv.left, left), (iv.right, right)] {
                if beh != EndBehaviour::Reflect {
                    continue;
                }
                let mirror = b + b - a.x;
                if approx_eq(mirror, a.x) {
                    own.mass = own.mass + lv.mass;
                } else {
                    levels.push(Level { y: mirror, ..lv });
                }
            }
            levels.push(own);
        }
        levels.sort_by(|a, b| a.y.partial_cmp(&b.y).expect("finite levels"));
        let sqrt_dt = opts.dt.sqrt();
        Ok(Self {
            lo: iv.left,
            hi: iv.right,
            left,
            right,
            levels,
            image: m.clone(),
            scale: pair.scale().clone(),
            has_density: !m.densities().is_empty(),
            opts,
            window: lit::<T>(6.0) * sqrt_dt,
            sqrt_dt,
        })
    }

    pub fn options(&self) -> &SimOptions<T> {
        &self.opts
    }

    /// Folds a free position into the image interval at reflecting ends.
    fn fold(&self, mut w: T) -> T {
        let reflect_l = self.left == EndBehaviour::Reflect;
        let reflect_r = self.right == EndBehaviour::Reflect;
        if reflect_l && reflect_r {
            let len = self.hi - self.lo;
            if len <= T::zero() {
                return self.lo;
            }
            let period = len + len;
            let mut z = (w - self.lo) % period;
            if z < T::zero() {
                z = z + period;
            }
            if z > len {
                z = period - z;
            }
            return self.lo + z;
        }
        if reflect_l && w < self.lo {
            w = self.lo + self.lo - w;
        }
        if reflect_r && w > self.hi {
            w = self.hi + self.hi - w;
        }
        w
    }

    /// Whether the bridge from `x` to `w` dies at a killing end.
    fn killed<R: Rng>(&self, rng: &mut R, x: T, w: T) -> bool {
        let two = lit::<T>(2.0);
        for (b, beh, below) in [(self.lo, self.left, true), (self.hi, self.right, false)] {
            if beh != EndBehaviour::Kill {
                continue;
            }
            let (dx, dw) = if below { (x - b, w - b) } else { (b - x, b - w) };
            if dw <= T::zero() {
                return true;
            }
            let p = (-two * dx * dw / self.opts.dt).exp();
            let u: f64 = rng.random();
            if lit::<T>(u) < p {
                return true;
            }
        }
        false
    }

    /// Runs one path from image point `y0`, reporting every stretch of
    /// process time to `visit(t0, t1, original state, image point)`.
    /// Returns the end time, whether the path was killed and whether the step
    /// cap was hit.
    pub fn run<R: Rng, V: FnMut(T, T, T, T)>(&self, rng: &mut R, y0: T, mut visit: V) -> (T, bool, bool) {
        let horizon = self.opts.horizon;
        let dt = self.opts.dt;
        let half = lit::<T>(0.5);
        let k = self.opts.local_time_scale;
        let mut x = y0;
        let mut t = T::zero();
        let mut hits: Vec<(T, usize, T)> = Vec::with_capacity(4);
        for _ in 0..self.opts.max_steps {
            let z: f64 = rng.sample(StandardNormal);
            let w = x + self.sqrt_dt * lit::<T>(z);
            if self.killed(rng, x, w) {
                return (t, true, false);
            }
            let y = self.fold(w);
            if self.has_density {
                let rho = (self.image.density_at(x) + self.image.density_at(y)) * half;
                if rho > T::zero() {
                    let mid = (x + y) * half;
                    let t1 = t + k * rho * dt;
                    let state = state_of(&self.scale, mid);
                    if t1 >= horizon {
                        visit(t, horizon, state, mid);
                        return (horizon, false, false);
                    }
                    visit(t, t1, state, mid);
                    t = t1;
                }
            }
            let (a, b) = if x <= w { (x, w) } else { (w, x) };
            let first = self.levels.partition_point(|l| l.y < a - self.window);
            hits.clear();
            let d = w - x;
            for (i, l) in self.levels[first..].iter().enumerate() {
                if l.y > b + self.window {
                    break;
                }
                let reach = (x - l.y).abs() + (w - l.y).abs();
                let u: f64 = rng.random();
                let u = lit::<T>(u.max(f64::MIN_POSITIVE));
                let lt = (d * d - lit::<T>(2.0) * dt * u.ln()).sqrt() - reach;
                if lt > T::zero() {
                    hits.push(((x - l.y).abs(), first + i, lt));
                }
            }
            if hits.len() > 1 {
                hits.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite distances"));
            }
            for &(_, i, lt) in &hits {
                let l = self.levels[i];
                let t1 = t + l.mass * lt;
                if t1 >= horizon {
                    visit(t, horizon, l.state, l.image);
                    return (horizon, false, false);
                }
                visit(t, t1, l.state, l.image);
                t = t1;
            }
            x = y;
        }
        (t, false, true)
    }

    pub fn sample_path<R: Rng>(&self, rng: &mut R, x0: T) -> PathSample<T> {
        let y0 = self.scale.eval(x0);
        let mut p =
            PathSample { times: vec![], image: vec![], states: vec![], end: self.opts.horizon, lifetime: None, truncated: false };
        let (end, killed, truncated) = self.run(rng, y0, |t0, _, state, img| {
            if p.image.last().is_some_and(|last| *last == img) {
                return;
            }
            p.times.push(t0);
            p.image.push(img);
            p.states.push(state);
        });
        p.end = end;
        p.lifetime = killed.then_some(end);
        p.truncated = truncated;
        p
    }
}

/// Monte-Carlo estimate of `E_{x0} ∫_0^ζ e^{−λt} f(X_t) dt` with the
/// time-changed Brownian motion.
pub fn estimate_timechange<T: Scalar, F: Fn(T) -> T + Sync>(
    pair: &QuasiPair<T>,
    x0: T,
    f: F,
    lambda: T,
    opts: SimOptions<T>,
    paths: usize,
    seed: u64,
) -> Result<LaplaceEstimate, SimError> {
    check_lambda(lambda, opts.horizon)?;
    if paths == 0 {
        return Err(SimError::BadParameter("paths must be positive"));
    }
    let sampler = TimeChangeSampler::new(pair, opts)?;
    let y0 = pair.scale().eval(x0);
    if !pair.measure().interval.contains(x0) || !y0.is_finite() {
        return Err(SimError::Outside { x: x0.to_f64().unwrap_or(f64::NAN) });
    }
    let results: Vec<(T, T, bool)> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let mut acc = T::zero();
            let mut sup = T::zero();
            let (_, _, truncated) = sampler.run(&mut rng, y0, |t0, t1, state, _| {
                let fx = f(state);
                sup = sup.max(fx.abs());
                acc = acc + discounted(lambda, t0, t1, fx);
            });
            (acc, sup, truncated)
        })
        .collect();
    let values: Vec<T> = results.iter().map(|r| r.0).collect();
    let sup = results.iter().fold(T::zero(), |a, r| a.max(r.1));
    let truncated = results.iter().filter(|r| r.2).count();
    Ok(summarize(&values, lambda, opts.horizon, sup, truncated))
}

/// `∫_0^{end} e^{−λt} f(X_t) dt` along a recorded path.
pub fn laplace_of_path<T: Scalar, F: Fn(T) -> T>(path: &PathSample<T>, f: &F, lambda: T) -> T {
    let n = path.times.len();
    let mut acc = T::zero();
    for i in 0..n {
        let t1 = if i + 1 < n { path.times[i + 1] } else { path.end };
        acc = acc + discounted(lambda, path.times[i], t1, f(path.states[i]));
    }
    acc
}

/// Laplace functional estimated from recorded paths.
pub fn laplace_functional<T: Scalar, F: Fn(T) -> T>(paths: &[PathSample<T>], f: F, lambda: T, horizon: T) -> LaplaceEstimate {
    let values: Vec<T> = paths.iter().map(|p| laplace_of_path(p, &f, lambda)).collect();
    let sup = paths.iter().flat_map(|p| p.states.iter()).fold(T::zero(), |a, x| a.max(f(*x).abs()));
    let truncated = paths.iter().filter(|p| p.truncated).count();
    summarize(&values, lambda, horizon, sup, truncated)
}

/// Records `paths` chain paths from `x0`.
pub fn simulate_chain<T: Scalar>(
    pair: &QuasiPair<T>,
    x0: T,
    horizon: T,
    paths: usize,
    seed: u64,
) -> Result<Vec<PathSample<T>>, SimError> {
    let sampler = ChainSampler::new(pair)?;
    sampler.index_of(x0)?;
    (0..paths).into_par_iter().map(|i| sampler.sample_path(&mut rng_for(seed, i), x0, horizon)).collect()
}

/// Records `paths` time-changed Brownian paths from `x0`.
pub fn simulate_timechange<T: Scalar>(
    pair: &QuasiPair<T>,
    x0: T,
    opts: SimOptions<T>,
    paths: usize,
    seed: u64,
) -> Result<Vec<PathSample<T>>, SimError> {
    let sampler = TimeChangeSampler::new(pair, opts)?;
    if !pair.measure().interval.contains(x0) {
        return Err(SimError::Outside { x: x0.to_f64().unwrap_or(f64::NAN) });
    }
    Ok((0..paths).into_par_iter().map(|i| sampler.sample_path(&mut rng_for(seed, i), x0)).collect())
}

/// Transitions between two original states across a jump or flat of `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpCount<T> {
    pub from: T,
    pub to: T,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport<T> {
    pub transitions: usize,
    /// Transitions whose image step passes over support of `m̂`.
    pub violations: usize,
    pub worst: Option<(T, T)>,
    pub jumps: Vec<JumpCount<T>>,
}

/// Checks that recorded paths never skip over support of `m̂`: between
/// consecutive image positions `a < b` the open interval `(a + res, b − res)`
/// must not meet the image support. Also tallies transitions that cross a
/// jump or flat of the scale.
pub fn path_property_audit<T: Scalar>(paths: &[PathSample<T>], pair: &QuasiPair<T>, resolution: T) -> AuditReport<T> {
    let support: SupportSet<T> = pair.image_measure().support();
    let mut marks: Vec<T> = pair.scale().jumps().iter().map(|j| j.x).collect();
    for fl in pair.scale().flats() {
        marks.push(fl.a);
        marks.push(fl.b);
    }
    let mut transitions = 0;
    let mut violations = 0;
    let mut worst: Option<(T, T)> = None;
    let mut jumps: Vec<JumpCount<T>> = Vec::new();
    for p in paths {
        for i in 1..p.image.len() {
            let (ya, yb) = (p.image[i - 1], p.image[i]);
            if ya == yb {
                continue;
            }
            transitions += 1;
            let (lo, hi) = if ya < yb { (ya, yb) } else { (yb, ya) };
            if hi - lo > resolution + resolution && support.meets_open(lo + resolution, hi - resolution) {
                violations += 1;
                if worst.is_none_or(|(a, b)| (b - a).abs() < hi - lo) {
                    worst = Some((ya, yb));
                }
            }
            let (xa, xb) = (p.states[i - 1], p.states[i]);
            let (xl, xh) = if xa < xb { (xa, xb) } else { (xb, xa) };
            let crosses = marks.iter().any(|m| (*m >= xl || approx_eq(*m, xl)) && (*m <= xh || approx_eq(*m, xh)));
            if crosses && xa != xb {
                match jumps.iter_mut().find(|j| approx_eq(j.from, xa) && approx_eq(j.to, xb)) {
                    Some(j) => j.count += 1,
                    None => jumps.push(JumpCount { from: xa, to: xb, count: 1 }),
                }
            }
        }
    }
    jumps.sort_by(|a, b| (a.from, a.to).partial_cmp(&(b.from, b.to)).expect("finite states"));
    AuditReport { transitions, violations, worst, jumps }
}

/// Fraction of the recorded time spent in each state, sorted by state.
pub fn occupation<T: Scalar>(paths: &[PathSample<T>]) -> Vec<(T, T)> {
    let mut spans: Vec<(T, T)> = Vec::new();
    for p in paths {
        let n = p.times.len();
        for i in 0..n {
            let t1 = if i + 1 < n { p.times[i + 1] } else { p.end };
            spans.push((p.states[i], t1 - p.times[i]));
        }
    }
    spans.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite states"));
    let mut out: Vec<(T, T)> = Vec::new();
    for (x, d) in spans {
        match out.last_mut() {
            Some(last) if approx_eq(last.0, x) => last.1 = last.1 + d,
            _ => out.push((x, d)),
        }
    }
    let total = out.iter().fold(T::zero(), |a, o| a + o.1);
    if total > T::zero() {
        for o in &mut out {
            o.1 = o.1 / total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn chain_paths_are_skip_free_and_reproducible() {
        let pair = fixtures::five_atom_pair();
        let a = simulate_chain(&pair, 1.2, 10.0, 50, 7).unwrap();
        let b = simulate_chain(&pair, 1.2, 10.0, 50, 7).unwrap();
        assert_eq!(a, b);
        let audit = path_property_audit(&a, &pair, 0.0);
        assert!(audit.transitions > 0);
        assert_eq!(audit.violations, 0);
        assert!(audit.jumps.iter().any(|j| j.from == 2.0 || j.to == 2.0));
    }

    #[test]
    fn constant_function_gives_discount_integral() {
        // Time runs until the horizon on every path.
        let pair = fixtures::unit_interval(true);
        let est =
            estimate_timechange(&pair, 0.5, |_| 1.0, 1.0, SimOptions { dt: 1e-3, horizon: 5.0, ..Default::default() }, 20, 3)
                .unwrap();
        let exact = 1.0 - (-5.0f64).exp();
        assert!((est.value - exact).abs() < 1e-2, "{est:?}");
    }

    #[test]
    fn fold_stays_in_interval() {
        let pair = fixtures::five_atom_pair();
        let s = TimeChangeSampler::new(&pair, SimOptions::default()).unwrap();
        for w in [-3.0, -0.1, 0.2, 4.6, 9.7, 13.0] {
            let y = s.fold(w);
            assert!((0.0..=4.5).contains(&y), "{w} -> {y}");
        }
    }
}

//! Independent ground truths: closed-form snapping-out kernels, nearest
//! neighbour chains on atomic image measures with tridiagonal resolvents,
//! and the fit of the normalization constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonic::{solve, HarmonicError, ImageProblem, SolveOptions};
use crate::measure::{Atom, Interval, SpeedMeasure};
use crate::pair::{validate_pair, PairError, PairOptions, QuasiPair};
use crate::scalar::{lit, Scalar};
use crate::scale::ScaleFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the image measure is not purely atomic with finitely many atoms")]
    NotAtomic,
    #[error("chain needs at least one state")]
    Empty,
    #[error("rates must be positive and finite")]
    BadRates,
    #[error("singular tridiagonal system")]
    Singular,
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error("fitted constants disagree: spread {spread}")]
    Inconsistent { spread: f64 },
}

/// `g(x, y)` of snapping-out Brownian motion with parameter `κ`. A point is
/// `(x, minus)` where `minus` marks the copy `0−` of the origin.
pub fn snapping_out_kernel<T: Scalar>(alpha: T, kappa: T, x: (T, bool), y: (T, bool)) -> T {
    let k = (alpha + alpha).sqrt();
    let left_side = |p: (T, bool)| p.0 < T::zero() || (p.0 == T::zero() && p.1);
    let key = |p: (T, bool)| (p.0, if p.1 { 0 } else { 1 });
    let (a, b) = if key(x) <= key(y) { (x, y) } else { (y, x) };
    let cosh2 = |z: T| (k * z).exp() + (-k * z).exp();
    let u_minus = if left_side(a) { (k * a.0).exp() / k } else { (k * a.0).exp() / k + cosh2(a.0) / kappa };
    let u_plus = if left_side(b) { (-k * b.0).exp() / k + cosh2(b.0) / kappa } else { (-k * b.0).exp() / k };
    u_minus * u_plus / (lit::<T>(2.0) / k + lit::<T>(2.0) / kappa)
}

/// What happens at the top of a truncated birth–death chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// The up-jump from the last state kills (minimal process).
    AbsorbingAtTop,
    /// The last state has no up-jump.
    ReflectingAtTop,
}

/// Birth–death chain on `0..K` given by speed masses `μ_k` and scale points
/// `s(0) = 0 < s(1) < ... < s(K)`; `b_k = 1/(2μ_k (s(k+1) − s(k)))` and
/// `a_k = 1/(2μ_k (s(k) − s(k−1)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdChain<T> {
    pub mu: Vec<T>,
    /// `K + 1` scale points; the last one is the exit point of the top state.
    pub scale: Vec<T>,
    pub truncation: Truncation,
}

impl<T: Scalar> BdChain<T> {
    /// From rates `b_0..b_{K−1}` and `a_1..a_{K−1}`:
    /// `μ_k = b_0⋯b_{k−1}/(a_1⋯a_k)`, `s(k+1) = s(k) + 1/(2μ_k b_k)`.
    pub fn from_rates(b: &[T], a: &[T], truncation: Truncation) -> Result<Self, OracleError> {
        let k = b.len();
        if k == 0 {
            return Err(OracleError::Empty);
        }
        if a.len() + 1 != k || b.iter().chain(a).any(|r| !(*r > T::zero()) || !r.is_finite()) {
            return Err(OracleError::BadRates);
        }
        let mut mu = vec![T::one()];
        for j in 1..k {
            let prev = mu[j - 1];
            mu.push(prev * b[j - 1] / a[j - 1]);
        }
        let mut scale = vec![T::zero()];
        for j in 0..k {
            let last = scale[j];
            scale.push(last + T::one() / (lit::<T>(2.0) * mu[j] * b[j]));
        }
        Ok(Self { mu, scale, truncation })
    }

    /// `μ_k = r^k`, `μ_k b_k = g^k`, `K` states.
    pub fn geometric(k: usize, r: T, g: T, truncation: Truncation) -> Self {
        let mu: Vec<T> = (0..k).map(|j| r.powi(j as i32)).collect();
        let mut scale = vec![T::zero()];
        for j in 0..k {
            let last = scale[j];
            scale.push(last + lit::<T>(0.5) / g.powi(j as i32));
        }
        Self { mu, scale, truncation }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Up rates `b_k` (the last one is the killing rate when absorbing).
    pub fn up_rates(&self) -> Vec<T> {
        (0..self.len()).map(|j| T::one() / (lit::<T>(2.0) * self.mu[j] * (self.scale[j + 1] - self.scale[j]))).collect()
    }

    /// Down rates `a_k`, `a_0 = 0`.
    pub fn down_rates(&self) -> Vec<T> {
        (0..self.len())
            .map(
                |j| {
                    if j == 0 {
                        T::zero()
                    } else {
                        T::one() / (lit::<T>(2.0) * self.mu[j] * (self.scale[j] - self.scale[j - 1]))
                    }
                },
            )
            .collect()
    }

    /// Tridiagonal `Q` as `(sub, diag, sup)`.
    pub fn q_matrix(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.len();
        let up = self.up_rates();
        let down = self.down_rates();
        let mut sub = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut sup = vec![T::zero(); n];
        for j in 0..n {
            let top = j + 1 == n;
            let b = if top && self.truncation == Truncation::ReflectingAtTop { T::zero() } else { up[j] };
            diag[j] = -(b + down[j]);
            sub[j] = down[j];
            sup[j] = if top { T::zero() } else { up[j] };
        }
        (sub, diag, sup)
    }

    /// The pair `(identity scale on [0, s(K)], Σ μ_k δ_{s(k)})`; the right end
    /// is included exactly when the truncation reflects.
    pub fn pair(&self) -> Result<QuasiPair<T>, OracleError> {
        let top = *self.scale.last().expect("non-empty");
        let iv = Interval {
            left: T::zero(),
            left_included: true,
            right: top,
            right_included: self.truncation == Truncation::ReflectingAtTop,
        };
        let atoms = self.mu.iter().zip(&self.scale).map(|(m, x)| Atom { x: *x, mass: *m }).collect();
        let m = SpeedMeasure::new(iv, atoms, vec![], vec![]).map_err(PairError::from)?;
        let s = ScaleFunction::identity(T::zero(), top);
        let opts = PairOptions { allow_left_atom: true, relaxed_support: true, ..Default::default() };
        Ok(validate_pair(s, m, opts)?)
    }
}

/// Solves `(λ − Q) x = f` for tridiagonal `Q = (sub, diag, sup)`.
pub fn tridiagonal_resolvent<T: Scalar>(q: &(Vec<T>, Vec<T>, Vec<T>), lambda: T, f: &[T]) -> Result<Vec<T>, OracleError> {
    let (sub, diag, sup) = q;
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    for j in 0..n {
        let a = if j > 0 { -sub[j] } else { T::zero() };
        let b = lambda - diag[j];
        let cc = -sup[j];
        let denom = if j > 0 { b - a * c[j - 1] } else { b };
        if denom == T::zero() || !denom.is_finite() {
            return Err(OracleError::Singular);
        }
        c[j] = cc / denom;
        d[j] = (f[j] - if j > 0 { a * d[j - 1] } else { T::zero() }) / denom;
    }
    let mut x = vec![T::zero(); n];
    for j in (0..n).rev() {
        x[j] = d[j] - if j + 1 < n { c[j] * x[j + 1] } else { T::zero() };
    }
    Ok(x)
}

/// Resolvent of a truncated birth–death chain.
pub fn bd_matrix_resolvent<T: Scalar>(chain: &BdChain<T>, lambda: T, f: &[T]) -> Result<Vec<T>, OracleError> {
    tridiagonal_resolvent(&chain.q_matrix(), lambda, f)
}

/// Largest relative entrywise difference between `Q` built from rates and
/// the discrete `½ D_m D_s` of the pair built from `(μ, s)`.
pub fn verify_generator_identity<T: Scalar>(b: &[T], a: &[T], chain: &BdChain<T>) -> T {
    let n = chain.len();
    let mut worst = T::zero();
    let rel = |x: T, y: T| if x == y { T::zero() } else { (x - y).abs() / x.abs().max(y.abs()) };
    for j in 0..n {
        // ½ D_m D_s f(k) = (1/(2μ_k)) [(f(k+1) − f(k))/Δs_k − (f(k) − f(k−1))/Δs_{k−1}]
        let up = T::one() / (lit::<T>(2.0) * chain.mu[j] * (chain.scale[j + 1] - chain.scale[j]));
        worst = worst.max(rel(up, b[j]));
        if j > 0 {
            let down = T::one() / (lit::<T>(2.0) * chain.mu[j] * (chain.scale[j] - chain.scale[j - 1]));
            worst = worst.max(rel(down, a[j - 1]));
        }
    }
    worst
}

/// Nearest-neighbour chain on the atoms of a purely atomic image measure,
/// with rates read off `½ D_m̂ D`: right `1/(2 m_j h⁺_j)`, left `1/(2 m_j h⁻_j)`.
/// Moves into a reflecting end without mass are dropped; moves into an
/// excluded finite end kill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicChain<T> {
    pub states: Vec<T>,
    pub masses: Vec<T>,
    /// `up[j]`: rate to `j+1`; for the last state the killing rate.
    pub up: Vec<T>,
    /// `down[j]`: rate to `j−1`; for the first state the killing rate.
    pub down: Vec<T>,
}

impl<T: Scalar> AtomicChain<T> {
    pub fn from_measure(m: &SpeedMeasure<T>) -> Result<Self, OracleError> {
        if !m.densities().is_empty() || !m.sequences().is_empty() || m.atoms().is_empty() {
            return Err(OracleError::NotAtomic);
        }
        let iv = m.interval;
        let states: Vec<T> = m.atoms().iter().map(|a| a.x).collect();
        let masses: Vec<T> = m.atoms().iter().map(|a| a.mass).collect();
        let n = states.len();
        let two = lit::<T>(2.0);
        let mut up = vec![T::zero(); n];
        let mut down = vec![T::zero(); n];
        for j in 0..n {
            up[j] = if j + 1 < n {
                T::one() / (two * masses[j] * (states[j + 1] - states[j]))
            } else if iv.right.is_finite() && !iv.right_included && iv.right > states[j] {
                T::one() / (two * masses[j] * (iv.right - states[j]))
            } else {
                T::zero()
            };
            down[j] = if j > 0 {
                T::one() / (two * masses[j] * (states[j] - states[j - 1]))
            } else if iv.left.is_finite() && !iv.left_included && iv.left < states[j] {
                T::one() / (two * masses[j] * (states[j] - iv.left))
            } else {
                T::zero()
            };
        }
        Ok(Self { states, masses, up, down })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn q_matrix(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.len();
        let mut sub = vec![T::zero(); n];
        let mut sup = vec![T::zero(); n];
        let diag: Vec<T> = (0..n).map(|j| -(self.up[j] + self.down[j])).collect();
        for j in 0..n {
            if j > 0 {
                sub[j] = self.down[j];
            }
            if j + 1 < n {
                sup[j] = self.up[j];
            }
        }
        (sub, diag, sup)
    }

    pub fn resolvent(&self, lambda: T, f: &[T]) -> Result<Vec<T>, OracleError> {
        tridiagonal_resolvent(&self.q_matrix(), lambda, f)
    }

    /// Total jump rate out of each state (including killing).
    pub fn holding_rates(&self) -> Vec<T> {
        self.up.iter().zip(&self.down).map(|(u, d)| *u + *d).collect()
    }
}

/// One fitted constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub label: String,
    pub alpha: f64,
    pub c: f64,
    /// Largest relative defect of `c · series − matrix` over all entries.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub fits: Vec<CalibrationFit>,
    /// Mean of the fitted constants.
    pub c_prob: f64,
    /// Largest deviation of a single fit from the mean.
    pub spread: f64,
}

/// Relative-weighted least-squares `c` with `c · series ≈ matrix` for every
/// column `R e_k`, on a purely atomic pair.
pub fn fit_constant<T: Scalar>(
    pair: &QuasiPair<T>,
    alpha: T,
    label: &str,
    opts: &SolveOptions<T>,
) -> Result<CalibrationFit, OracleError> {
    let chain = AtomicChain::from_measure(pair.image_measure())?;
    let sol = solve(&ImageProblem::from_pair(pair), alpha, opts)?;
    let n = chain.len();
    let mut num = T::zero();
    let mut den = T::zero();
    let mut pairs = Vec::with_capacity(n * n);
    for k in 0..n {
        let mut e = vec![T::zero(); n];
        e[k] = T::one();
        let col = chain.resolvent(alpha, &e)?;
        for j in 0..n {
            let s = sol.kernel(chain.states[j], chain.states[k])? * chain.masses[k];
            let t = col[j];
            if t == T::zero() {
                continue;
            }
            let w = T::one() / (t * t);
            num = num + w * s * t;
            den = den + w * s * s;
            pairs.push((s, t));
        }
    }
    let c = num / den;
    let residual = pairs.iter().fold(T::zero(), |acc, (s, t)| acc.max(((c * *s) - *t).abs() / t.abs()));
    Ok(CalibrationFit {
        label: label.to_string(),
        alpha: alpha.to_f64().unwrap_or(f64::NAN),
        c: c.to_f64().unwrap_or(f64::NAN),
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Fits the constant on every `(pair, α)` and checks that the fits agree
/// within `agree`.
pub fn calibrate_normalization<T: Scalar>(
    cases: &[(String, QuasiPair<T>)],
    alphas: &[T],
    agree: f64,
    opts: &SolveOptions<T>,
) -> Result<CalibrationReport, OracleError> {
    let jobs: Vec<(usize, T)> = (0..cases.len()).flat_map(|i| alphas.iter().map(move |a| (i, *a))).collect();
    let fits: Vec<CalibrationFit> =
        jobs.par_iter().map(|(i, a)| fit_constant(&cases[*i].1, *a, &cases[*i].0, opts)).collect::<Result<_, _>>()?;
    let mean = fits.iter().map(|f| f.c).sum::<f64>() / fits.len().max(1) as f64;
    let spread = fits.iter().fold(0.0f64, |acc, f| acc.max((f.c - mean).abs()));
    if spread > agree {
        return Err(OracleError::Inconsistent { spread });
    }
    Ok(CalibrationReport { fits, c_prob: mean, spread })
}

/// Built-in calibration family: birth–death chains in both truncations and
/// a three-atom pair whose scale jumps.
pub fn standard_family() -> Vec<(String, QuasiPair<f64>)> {
    let mut out = Vec::new();
    for (tr, name) in [(Truncation::AbsorbingAtTop, "absorbing"), (Truncation::ReflectingAtTop, "reflecting")] {
        out.push((format!("birth-death-20-{name}"), crate::fixtures::birth_death(20, tr).1));
    }
    out.push(("three-atom-jump".to_string(), crate::fixtures::three_atom_pair()));
    out
}

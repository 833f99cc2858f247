//! Gauss–Legendre panels with adaptive bisection.

use crate::scalar::{lit, Scalar};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Nodes are found by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = lit::<T>(n as f64);
        let pi = T::PI();
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess.
            let mut x = (pi * (lit::<T>(i as f64) + lit(0.75)) / (nf + lit(0.5))).cos();
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x = x - dx;
                if dx.abs() <= T::epsilon() * lit(4.0) {
                    let (_, d) = legendre(n, x);
                    dp = d;
                    break;
                }
            }
            let w = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Single-panel rule on `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        let mut s = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s = s + *w * f(mid + half * *x);
        }
        s * half
    }

    /// Mapped nodes and weights on `[a, b]`.
    pub fn points(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * *x, *w * half))
    }

    /// Adaptive bisection until two-level agreement within `rel_tol`
    /// (relative to the running magnitude) or `max_depth` is hit.
    pub fn adaptive<F: FnMut(T) -> T>(&self, a: T, b: T, rel_tol: T, max_depth: u32, f: &mut F) -> T {
        let whole = self.integrate(a, b, &mut *f);
        self.refine(a, b, whole, rel_tol, max_depth, f)
    }

    fn refine<F: FnMut(T) -> T>(&self, a: T, b: T, whole: T, rel_tol: T, depth: u32, f: &mut F) -> T {
        let mid = (a + b) * lit(0.5);
        let left = self.integrate(a, mid, &mut *f);
        let right = self.integrate(mid, b, &mut *f);
        let both = left + right;
        let err = (both - whole).abs();
        if depth == 0 || err <= rel_tol * both.abs() || err <= T::min_positive_value() {
            return both;
        }
        self.refine(a, mid, left, rel_tol, depth - 1, f) + self.refine(mid, b, right, rel_tol, depth - 1, f)
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = lit::<T>(k as f64);
        let p2 = ((lit::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nf = lit::<T>(n as f64);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        let gl = GaussLegendre::<f64>::new(20);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // degree 39 is integrated exactly
        let v = gl.integrate(0.0, 1.0, |x| x.powi(39));
        assert!((v - 1.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let gl = GaussLegendre::<f64>::new(10);
        let mut f = |x: f64| 1.0 / (1e-4 + x * x);
        let v = gl.adaptive(-1.0, 1.0, 1e-13, 40, &mut f);
        let exact = 2.0 * (1.0_f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() / exact < 1e-11, "{v} vs {exact}");
    }
}

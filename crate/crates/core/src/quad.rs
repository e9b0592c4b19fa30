//! Gauss-Legendre rules and a small adaptive integrator for complex integrands.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed Gauss rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(x, w)` pairs on `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(t, w)| (mid + half * t, w * half))
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.points(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

/// Result of [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub value: Complex64,
    /// False when some subinterval hit the depth limit before meeting its tolerance.
    pub converged: bool,
}

/// Adaptive bisection with an 8-point Gauss rule, comparing each panel with
/// its two halves. The absolute tolerance is shared in proportion to length.
pub fn adaptive<F: FnMut(f64) -> Complex64>(a: f64, b: f64, tol: f64, max_depth: u32, mut f: F) -> Adaptive {
    let rule = GaussRule::new(8);
    let whole = rule.integrate(a, b, &mut f);
    let mut converged = true;
    let value = recurse(&rule, a, b, whole, tol, max_depth, &mut f, &mut converged);
    Adaptive { value, converged }
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: FnMut(f64) -> Complex64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: u32,
    f: &mut F,
    converged: &mut bool,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, &mut *f);
    let right = rule.integrate(m, b, &mut *f);
    let refined = left + right;
    if (refined - whole).norm() <= tol {
        return refined;
    }
    if depth == 0 {
        *converged = false;
        return refined;
    }
    recurse(rule, a, m, left, 0.5 * tol, depth - 1, f, converged)
        + recurse(rule, m, b, right, 0.5 * tol, depth - 1, f, converged)
}

/// `(e^{c·len} - 1)/c`, accurate for small `|c·len|`; meant for `Re c <= 0`.
pub fn exp_integral(c: Complex64, len: f64) -> Complex64 {
    let z = c * len;
    if z.norm() < 1e-3 {
        // Taylor series of (e^z - 1)/z
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for j in 2..10 {
            term *= z / j as f64;
            sum += term;
        }
        sum * len
    } else {
        (z.exp() - 1.0) / c
    }
}

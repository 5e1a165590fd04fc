//! Gauss–Legendre rules and adaptive panel quadrature for vector-valued integrands.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    /// Nodes on `[-1, 1]`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule from Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * pn - pm) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                x = 0.0;
                dp = 1.0;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n == 1 {
            weights[0] = 2.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: Vec<f64>,
    /// Estimated absolute error (max over components).
    pub error: f64,
    pub evaluations: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn axpy(acc: &mut [f64], w: f64, x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += w * b;
    }
}

/// Adaptive bisection on `[a, b]` for an integrand returning a vector of fixed length.
///
/// A panel is accepted when its rule and the sum over its two halves agree to
/// within its share of `max(abs_tol, rel_tol * |I|)`, where `|I|` is the
/// max-norm of the coarse whole-interval estimate.
pub fn adaptive(
    f: &mut dyn FnMut(f64) -> Vec<f64>,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
) -> Result<Integral> {
    let mut evals = 0usize;
    let mut panel = |lo: f64, hi: f64, evals: &mut usize| -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for (x, w) in rule.mapped(lo, hi) {
            let v = f(x);
            *evals += 1;
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            axpy(&mut acc, w, &v);
        }
        acc
    };
    let whole = panel(a, b, &mut evals);
    let scale = max_abs(&whole);
    let tol = abs_tol.max(rel_tol * scale);
    let mut total = vec![0.0; whole.len()];
    let mut error = 0.0;
    // stack of (lo, hi, estimate, depth)
    let mut stack = vec![(a, b, whole, 0usize)];
    let len = (b - a).abs();
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid, &mut evals);
        let right = panel(mid, hi, &mut evals);
        let mut fine = left.clone();
        axpy(&mut fine, 1.0, &right);
        let diff = fine.iter().zip(&est).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let share = tol * (hi - lo).abs() / len;
        if diff <= share || depth >= max_depth {
            if depth >= max_depth && diff > share {
                return Err(Error::Quadrature(format!(
                    "panel [{lo:.6}, {hi:.6}] unresolved after {max_depth} bisections (error {diff:.3e})"
                )));
            }
            axpy(&mut total, 1.0, &fine);
            error += diff;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(Integral { value: total, error, evaluations: evals })
}

/// Nested adaptive integral over `x in [x0, x1]`, `y in [y0, y1]`.
pub fn adaptive_2d(
    f: &dyn Fn(f64, f64) -> Vec<f64>,
    x: (f64, f64),
    y: (f64, f64),
    rule: &GaussLegendre,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    let mut inner_error = 0.0f64;
    let mut inner_evals = 0usize;
    let mut failure: Option<Error> = None;
    let inner_abs = abs_tol / (x.1 - x.0).abs().max(1e-300) * 0.1;
    let mut outer = |xv: f64| -> Vec<f64> {
        let mut g = |yv: f64| f(xv, yv);
        match adaptive(&mut g, y.0, y.1, rule, inner_abs, rel_tol * 0.1, 40) {
            Ok(r) => {
                inner_error = inner_error.max(r.error);
                inner_evals += r.evaluations;
                r.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                vec![f64::NAN]
            }
        }
    };
    let out = adaptive(&mut outer, x.0, x.1, rule, abs_tol, rel_tol, 40);
    if let Some(e) = failure {
        return Err(e);
    }
    let mut r = out?;
    r.error += inner_error * (x.1 - x.0).abs();
    r.evaluations = inner_evals;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(7);
        for p in 0..14 {
            let got = gl.integrate(-1.0, 2.0, |x| x.powi(p));
            let want = (2f64.powi(p + 1) - (-1f64).powi(p + 1)) / (p + 1) as f64;
            assert!((got - want).abs() < 1e-11 * want.abs().max(1.0), "p={p}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..20 {
            let s: f64 = GaussLegendre::new(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let gl = GaussLegendre::new(10);
        let eps: f64 = 1e-3;
        let mut f = |x: f64| vec![eps / (x * x + eps * eps)];
        let r = adaptive(&mut f, -1.0, 1.0, &gl, 1e-10, 1e-10, 50).unwrap();
        let want = 2.0 * (1.0 / eps).atan();
        assert!((r.value[0] - want).abs() < 1e-8);
    }

    #[test]
    fn nested_gaussian() {
        let gl = GaussLegendre::new(10);
        let f = |x: f64, y: f64| vec![(-(x * x + y * y)).exp()];
        let r = adaptive_2d(&f, (-6.0, 6.0), (-6.0, 6.0), &gl, 1e-10, 1e-10).unwrap();
        assert!((r.value[0] - std::f64::consts::PI).abs() < 1e-8);
    }
}

//! Gaussian quadrature rules (Golub-Welsch) and adaptive Simpson integration.

use crate::error::{param, Result};
use crate::linalg::tridiagonal_eigen_first;
use crate::scalar::Scalar;

/// Nodes and weights of a quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> Rule<T> {
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affine map of a rule on `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> Rule<T> {
        let half = T::lit(0.5) * (b - a);
        let mid = T::lit(0.5) * (b + a);
        Rule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }
}

fn golub_welsch<T: Scalar>(alpha: &[T], beta: &[T], mu0: T) -> Result<Rule<T>> {
    let off: Vec<T> = beta.iter().map(|b| b.sqrt()).collect();
    let (nodes, first) = tridiagonal_eigen_first(alpha, &off)?;
    let weights = first.iter().map(|v| mu0 * *v * *v).collect();
    Ok(Rule { nodes, weights })
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> Result<Rule<T>> {
    if n == 0 {
        return Err(param("n", "need at least one node"));
    }
    let alpha = vec![T::zero(); n];
    let beta: Vec<T> = (1..n)
        .map(|k| {
            let k2 = T::of_usize(k * k);
            k2 / (T::lit(4.0) * k2 - T::one())
        })
        .collect();
    golub_welsch(&alpha, &beta, T::lit(2.0))
}

/// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite<T: Scalar>(n: usize) -> Result<Rule<T>> {
    if n == 0 {
        return Err(param("n", "need at least one node"));
    }
    let alpha = vec![T::zero(); n];
    let beta: Vec<T> = (1..n).map(|k| T::of_usize(k) / T::lit(2.0)).collect();
    golub_welsch(&alpha, &beta, T::PI().sqrt())
}

/// Gauss-Jacobi rule for the density proportional to `(1+x)^a (1-x)^b` on
/// `[-1, 1]`, with weights normalized to sum to one.
pub fn gauss_jacobi<T: Scalar>(n: usize, a: T, b: T) -> Result<Rule<T>> {
    if n == 0 {
        return Err(param("n", "need at least one node"));
    }
    if !(a > -T::one() && b > -T::one()) {
        return Err(param("a, b", "Jacobi exponents must exceed -1"));
    }
    // classical notation: weight (1-x)^al (1+x)^be
    let (al, be) = (b, a);
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let s = al + be;
    let mut alpha = Vec::with_capacity(n);
    alpha.push((be - al) / (s + two));
    for k in 1..n {
        let k = T::of_usize(k);
        let t = two * k + s;
        alpha.push((be * be - al * al) / (t * (t + two)));
    }
    let mut beta = Vec::with_capacity(n.saturating_sub(1));
    for k in 1..n {
        let kk = T::of_usize(k);
        let t = two * kk + s;
        let v = if k == 1 {
            four * (one + al) * (one + be) / ((s + two) * (s + two) * (s + T::lit(3.0)))
        } else {
            four * kk * (kk + al) * (kk + be) * (kk + s) / (t * t * (t + one) * (t - one))
        };
        beta.push(v);
    }
    golub_welsch(&alpha, &beta, one)
}

/// Adaptive Simpson integration of `f` over `[a, b]`, starting from `panels`
/// equal panels, each refined until the local error estimate is below its
/// share of `tol`.
pub fn adaptive_simpson<T: Scalar>(mut f: impl FnMut(T) -> T, a: T, b: T, panels: usize, tol: T) -> T {
    let panels = panels.max(1);
    let h = (b - a) / T::of_usize(panels);
    let ptol = tol / T::of_usize(panels);
    let mut total = T::zero();
    for p in 0..panels {
        let x0 = a + h * T::of_usize(p);
        let x1 = if p + 1 == panels { b } else { x0 + h };
        let xm = T::lit(0.5) * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let whole = (x1 - x0) / T::lit(6.0) * (f0 + T::lit(4.0) * fm + f1);
        total += simpson_rec(&mut f, x0, x1, f0, fm, f1, whole, ptol, 40);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Scalar>(f: &mut impl FnMut(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let m = T::lit(0.5) * (a + b);
    let lm = T::lit(0.5) * (a + m);
    let rm = T::lit(0.5) * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    let half = T::lit(0.5) * tol;
    simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1)
}

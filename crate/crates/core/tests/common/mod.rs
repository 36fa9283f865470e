//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use dwig_core::linalg::Matrix;
use dwig_core::quadrature::gauss_legendre;
use dwig_core::twstats::airy::airy;
use num_complex::Complex64 as C;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            d = -d;
        }
        d *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    d
}

fn fredholm(s: f64, len: f64, m: usize, kernel: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = gauss_legendre::<f64>(m).unwrap().mapped(s, s + len);
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let a = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    delta - sw[i] * kernel(rule.nodes[i], rule.nodes[j]) * sw[j]
                })
                .collect()
        })
        .collect();
    det(a)
}

/// `F_2(s) = det(I - K_Ai)` on `L^2(s, inf)` by Gauss-Legendre Nystrom.
pub fn fredholm_f2(s: f64) -> f64 {
    fredholm(s, 16.0, 80, |x, y| {
        let (ax, apx) = airy(x);
        let (ay, apy) = airy(y);
        if (x - y).abs() < 1e-12 {
            apx * apx - x * ax * ax
        } else {
            (ax * apy - apx * ay) / (x - y)
        }
    })
}

/// `F_1(s) = det(I - B)` with `B(x, y) = Ai((x + y)/2)/2` on `L^2(s, inf)`.
pub fn fredholm_f1(s: f64) -> f64 {
    fredholm(s, 24.0, 96, |x, y| 0.5 * airy(0.5 * (x + y)).0)
}

/// Mean and variance of a law from its CDF by Gauss-Legendre panels on `[lo, hi]`.
pub fn moments_from_cdf(cdf: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> (f64, f64) {
    let rule = gauss_legendre::<f64>(10).unwrap();
    let w = (hi - lo) / panels as f64;
    let (mut i0, mut i1) = (0.0, 0.0);
    for p in 0..panels {
        let r = rule.mapped(lo + p as f64 * w, lo + (p + 1) as f64 * w);
        for (x, wt) in r.nodes.iter().zip(&r.weights) {
            let f = cdf(*x);
            i0 += wt * f;
            i1 += wt * x * f;
        }
    }
    let mean = hi - i0;
    (mean, hi * hi - 2.0 * i1 - mean * mean)
}

/// All roots of a complex polynomial `c[0] + c[1] x + ... + c[n] x^n` by
/// Durand-Kerner iteration.
pub fn poly_roots(c: &[C]) -> Vec<C> {
    let n = c.len() - 1;
    let lead = c[n];
    let monic: Vec<C> = c.iter().map(|x| x / lead).collect();
    let eval = |x: C| monic.iter().rev().fold(C::new(0.0, 0.0), |acc, &k| acc * x + k);
    let seed = C::new(0.4, 0.9);
    let mut r: Vec<C> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut den = C::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= r[i] - r[j];
                }
            }
            let step = eval(r[i]) / den;
            r[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-16 {
            break;
        }
    }
    r
}

/// Stieltjes transform of the free convolution of the semicircle with the
/// two-atom law at `+-lambda`, from the cubic
/// `m^3 + 2 z m^2 + (z^2 - lambda^2 + 1) m + z = 0`, upper-half-plane root.
pub fn two_atom_m(lambda: f64, z: C) -> C {
    let one = C::new(1.0, 0.0);
    let roots = poly_roots(&[z, z * z - lambda * lambda + one, 2.0 * z, one]);
    *roots.iter().max_by(|a, b| a.im.total_cmp(&b.im)).unwrap()
}

/// Plain damped iteration `m <- (1 - a) m + a F(m)` from `m = i`.
pub fn damped_oracle(atoms: &[(f64, f64)], lambda: f64, z: C) -> C {
    let mut m = C::new(0.0, 1.0);
    for _ in 0..200_000 {
        let f: C = atoms.iter().map(|&(v, w)| w / (lambda * v - z - m)).sum();
        let next = 0.5 * m + 0.5 * f;
        if (next - m).norm() < 1e-16 {
            return next;
        }
        m = next;
    }
    m
}

/// Upper edge for an atomic measure by a dense scan followed by bisection.
pub fn edge_by_scan(atoms: &[(f64, f64)], lambda: f64) -> f64 {
    let vmax = atoms.iter().map(|a| a.0).fold(f64::MIN, f64::max);
    let f = |t: f64| atoms.iter().map(|&(v, w)| w / (lambda * v - t).powi(2)).sum::<f64>() - 1.0;
    let mut prev = lambda * vmax + 1e-9;
    let mut x = prev;
    while f(x) > 0.0 {
        prev = x;
        x += 1e-3;
    }
    let (mut lo, mut hi) = (prev, x);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    t - atoms.iter().map(|&(v, w)| w / (lambda * v - t)).sum::<f64>()
}

/// Number of eigenvalues of `h` below `x`, by Sylvester inertia of `h - x`.
pub fn count_below(h: &Matrix<f64>, x: f64) -> usize {
    let n = h.n();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| h[(i, j)] - if i == j { x } else { 0.0 }).collect()).collect();
    let mut neg = 0;
    for k in 0..n {
        let mut p = a[k][k];
        if p == 0.0 {
            p = 1e-300;
        }
        if p < 0.0 {
            neg += 1;
        }
        for i in k + 1..n {
            let f = a[i][k] / p;
            for j in k + 1..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    neg
}

/// Eigenvalues in descending order by bisection on the inertia count.
pub fn eigenvalues_by_bisection(h: &Matrix<f64>) -> Vec<f64> {
    let n = h.n();
    let r = h.inf_norm() + 1.0;
    (1..=n)
        .map(|k| {
            // k-th largest: count_below(x) <= n - k
            let (mut lo, mut hi) = (-r, r);
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if count_below(h, mid) <= n - k {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn semicircle_density(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Mass of `[x, 2]` under the semicircle law.
pub fn semicircle_tail(x: f64) -> f64 {
    let t = (x / 2.0).clamp(-1.0, 1.0);
    0.5 - (t * (1.0 - t * t).sqrt() + t.asin()) / std::f64::consts::PI
}

//! The deformed semicircle law: solving `m = int dnu(v)/(lambda gamma v - z - gamma^2 m)`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::measure::{Measure, SpectralPoint};
use crate::scalar::Scalar;

/// Grid size for the assumption check on atomic measures.
pub const ASSUMPTION_GRID: usize = 10_000;

/// Spectral parameters used for density extraction at a single energy.
pub const DENSITY_ETAS: (f64, f64) = (1e-5, 5e-6);

const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T> {
    /// Absolute tolerance on `|m - F(m)|`.
    pub tol: T,
    pub max_iter: usize,
    pub damping: T,
    pub fallback_damping: T,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            tol: T::lit(1e-12).max(T::epsilon() * T::lit(64.0)),
            max_iter: 20_000,
            damping: T::lit(0.5),
            fallback_damping: T::lit(0.1),
        }
    }
}

/// `m_fc` tabulated on an energy grid.
#[derive(Clone, Debug, Serialize)]
pub struct FreeConvolutionSolution<T> {
    pub lambda: T,
    pub gamma: T,
    pub eta: T,
    pub energies: Vec<T>,
    pub m: Vec<Complex<T>>,
    pub density: Vec<T>,
    /// Outer endpoints `[E_-, E_+]` of the support of the rescaled law.
    pub support: (T, T),
}

struct Eval<T> {
    f: Complex<T>,
    /// `gamma^2 int d^-2`, the derivative of the map
    df: Complex<T>,
    /// `gamma^2 int |d|^-2`
    contraction: T,
}

#[inline]
fn evaluate<T: Scalar>(nu: &Measure<T>, lg: T, g2: T, z: Complex<T>, m: Complex<T>) -> Eval<T> {
    let shift = z + m * g2;
    let mut f = Complex::new(T::zero(), T::zero());
    let mut df = f;
    let mut c = T::zero();
    for (v, w) in nu.nodes() {
        let d = Complex::new(lg * v - shift.re, -shift.im);
        let inv = d.inv();
        f += inv * w;
        df += inv * inv * w;
        c += w * inv.norm_sqr();
    }
    Eval { f, df: df * g2, contraction: c * g2 }
}

fn check_inputs<T: Scalar>(lambda: T, gamma: T, eta: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(param("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(param("gamma", format!("must be finite and > 0, got {gamma}")));
    }
    if !(eta > T::zero()) {
        return Err(param("eta", format!("must be > 0, got {eta}")));
    }
    Ok(())
}

struct Solver<'a, T> {
    nu: &'a Measure<T>,
    lg: T,
    g2: T,
    opts: SolveOptions<T>,
}

impl<T: Scalar> Solver<'_, T> {
    fn valid(&self, z: Complex<T>, m: Complex<T>) -> bool {
        if !(m.re.is_finite() && m.im.is_finite()) || m.im < T::lit(-1e-14) {
            return false;
        }
        let e = evaluate(self.nu, self.lg, self.g2, z, m);
        e.contraction <= T::one() + T::lit(1e-8)
    }

    fn newton(&self, z: Complex<T>, m0: Complex<T>) -> Option<Complex<T>> {
        let mut m = m0;
        let mut e = evaluate(self.nu, self.lg, self.g2, z, m);
        let mut res = (m - e.f).norm();
        for _ in 0..100 {
            if res <= self.opts.tol {
                return self.valid(z, m).then_some(m);
            }
            let jac = Complex::new(T::one(), T::zero()) - e.df;
            if jac.norm() == T::zero() {
                return None;
            }
            let step = (m - e.f) / jac;
            let mut t = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let cand = m - step * t;
                let ec = evaluate(self.nu, self.lg, self.g2, z, cand);
                let rc = (cand - ec.f).norm();
                if rc.is_finite() && rc < res {
                    m = cand;
                    e = ec;
                    res = rc;
                    accepted = true;
                    break;
                }
                t *= T::lit(0.5);
            }
            if !accepted {
                // no further decrease possible at working precision
                return (res <= self.opts.tol * T::lit(100.0) && self.valid(z, m)).then_some(m);
            }
        }
        (res <= self.opts.tol * T::lit(100.0) && self.valid(z, m)).then_some(m)
    }

    fn damped(&self, z: Complex<T>, m0: Complex<T>, alpha: T) -> Option<(Complex<T>, T)> {
        let mut m = m0;
        let mut res = T::infinity();
        for _ in 0..self.opts.max_iter {
            let e = evaluate(self.nu, self.lg, self.g2, z, m);
            res = (m - e.f).norm();
            if !res.is_finite() {
                return None;
            }
            if res <= self.opts.tol {
                return Some((m, res));
            }
            m = m * (T::one() - alpha) + e.f * alpha;
        }
        Some((m, res))
    }

    fn damped_with_fallback(&self, z: Complex<T>, m0: Complex<T>) -> Result<Complex<T>> {
        let mut best_res = T::infinity();
        for alpha in [self.opts.damping, self.opts.fallback_damping] {
            if let Some((m, res)) = self.damped(z, m0, alpha) {
                let polished = self.newton(z, m).or(if res <= self.opts.tol { Some(m) } else { None });
                if let Some(p) = polished {
                    if self.valid(z, p) {
                        return Ok(p);
                    }
                    return Err(Error::BranchViolation { re: z.re.to_f64_lossy(), im: z.im.to_f64_lossy() });
                }
                best_res = best_res.min(res);
            }
        }
        Err(Error::NoConvergence { re: z.re.to_f64_lossy(), im: z.im.to_f64_lossy(), residual: best_res.to_f64_lossy() })
    }

    /// Continuation in `eta` from a well conditioned starting height.
    fn continuation(&self, z: Complex<T>) -> Result<Complex<T>> {
        let i = Complex::new(T::zero(), T::one());
        let start = z.im.max(T::lit(0.5));
        let mut m = self.damped_with_fallback(Complex::new(z.re, start), i)?;
        let mut eta = start;
        while eta > z.im {
            eta = (eta * T::lit(0.25)).max(z.im);
            let zz = Complex::new(z.re, eta);
            m = match self.newton(zz, m) {
                Some(next) => next,
                None => self.damped_with_fallback(zz, m).or_else(|_| self.damped_with_fallback(zz, i))?,
            };
        }
        Ok(m)
    }

    fn solve(&self, z: Complex<T>, warm: Option<Complex<T>>) -> Result<Complex<T>> {
        if let Some(m0) = warm {
            if let Some(m) = self.newton(z, m0) {
                return Ok(m);
            }
        }
        self.continuation(z)
    }
}

/// Solves the fixed-point equation at `z` on the Stieltjes branch (`im m > 0`).
///
/// `warm` is an optional starting guess; the answer does not depend on it.
pub fn solve_point<T: Scalar>(
    nu: &Measure<T>,
    lambda: T,
    gamma: T,
    z: SpectralPoint<T>,
    warm: Option<Complex<T>>,
    opts: &SolveOptions<T>,
) -> Result<Complex<T>> {
    check_inputs(lambda, gamma, z.im)?;
    let solver = Solver { nu, lg: lambda * gamma, g2: gamma * gamma, opts: *opts };
    solver.solve(z.z(), warm)
}

/// Residual `|m - F(m)|` of a candidate solution.
pub fn fixed_point_residual<T: Scalar>(nu: &Measure<T>, lambda: T, gamma: T, z: SpectralPoint<T>, m: Complex<T>) -> T {
    let e = evaluate(nu, lambda * gamma, gamma * gamma, z.z(), m);
    (m - e.f).norm()
}

/// Solves on `n` equispaced energies in `[lo, hi]` at height `eta`. The density
/// is extracted by Richardson extrapolation of `im m / pi` from heights
/// `2 eta` and `eta`.
#[allow(clippy::too_many_arguments)]
pub fn solve_grid<T: Scalar>(
    nu: &Measure<T>,
    lambda: T,
    gamma: T,
    lo: T,
    hi: T,
    n: usize,
    eta: T,
    opts: &SolveOptions<T>,
) -> Result<FreeConvolutionSolution<T>> {
    check_inputs(lambda, gamma, eta)?;
    if n < 2 || !(hi > lo) {
        return Err(param("grid", "need n >= 2 and lo < hi"));
    }
    let h = (hi - lo) / T::of_usize(n - 1);
    let energies: Vec<T> = (0..n).map(|k| lo + h * T::of_usize(k)).collect();
    let solver = Solver { nu, lg: lambda * gamma, g2: gamma * gamma, opts: *opts };
    let two_eta = eta * T::lit(2.0);
    let chunks: Vec<Result<Vec<(Complex<T>, T)>>> = energies
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut warm: Option<(Complex<T>, Complex<T>)> = None;
            for &e in chunk {
                let z1 = Complex::new(e, eta);
                let z2 = Complex::new(e, two_eta);
                let m1 = solver.solve(z1, warm.map(|w| w.0))?;
                let m2 = solver.solve(z2, Some(warm.map_or(m1, |w| w.1)))?;
                warm = Some((m1, m2));
                let rho = ((T::lit(2.0) * m1.im - m2.im) / T::PI()).max(T::zero());
                out.push((m1, rho));
            }
            Ok(out)
        })
        .collect();
    let mut m = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for c in chunks {
        for (mi, ri) in c? {
            m.push(mi);
            density.push(ri);
        }
    }
    let support = match (edge_upper_unchecked(nu, lambda), edge_upper_unchecked(&nu.reflected(), lambda)) {
        (Ok(up), Ok(down)) => (-down * gamma, up * gamma),
        _ => {
            let peak = density.iter().copied().fold(T::zero(), T::max);
            let cut = peak * T::lit(1e-6);
            let first = density.iter().position(|&r| r > cut).unwrap_or(0);
            let last = density.iter().rposition(|&r| r > cut).unwrap_or(n - 1);
            (energies[first], energies[last])
        }
    };
    Ok(FreeConvolutionSolution { lambda, gamma, eta, energies, m, density, support })
}

/// Density of the (gamma-rescaled) law at energy `e`, by Richardson extrapolation
/// of `im m / pi` at heights `1e-5` and `5e-6`.
pub fn density_at<T: Scalar>(nu: &Measure<T>, lambda: T, gamma: T, e: T) -> Result<T> {
    let opts = SolveOptions::default();
    let (e1, e2) = (T::lit(DENSITY_ETAS.0), T::lit(DENSITY_ETAS.1));
    let m1 = solve_point(nu, lambda, gamma, SpectralPoint::new(e, e1), None, &opts)?;
    let m2 = solve_point(nu, lambda, gamma, SpectralPoint::new(e, e2), Some(m1), &opts)?;
    Ok(((T::lit(2.0) * m2.im - m1.im) / T::PI()).max(T::zero()))
}

/// Checks `inf_x int dnu(v)/(v-x)^2 > lambda^2` and returns the infimum.
pub fn check_assumption<T: Scalar>(nu: &Measure<T>, lambda: T) -> Result<T> {
    let inf = nu.inf_inverse_square_distance(ASSUMPTION_GRID);
    let l2 = lambda * lambda;
    if inf > l2 {
        Ok(inf)
    } else {
        Err(Error::AssumptionViolated { inf: inf.to_f64_lossy(), lambda2: l2.to_f64_lossy() })
    }
}

/// Largest root of `int dnu(v)/(lambda v - x)^2 = 1` on `(lambda v_max, inf)`.
pub fn edge_root<T: Scalar>(nu: &Measure<T>, lambda: T) -> Result<T> {
    let (_, vmax) = nu.support();
    let base = lambda * vmax;
    let g = |x: T| nu.integrate(|v| {
        let d = lambda * v - x;
        T::one() / (d * d)
    }) - T::one();
    let mut lo = base + T::lit(1e-12);
    if lo <= base {
        lo = base + base.abs().max(T::one()) * T::epsilon() * T::lit(4.0);
    }
    let mut hi = base + T::lit(10.0) + T::lit(10.0) * lambda;
    let glo = g(lo);
    if !(glo > T::zero()) {
        return Err(Error::Bracket(format!("no root: integral at the left bracket is {}", glo + T::one())));
    }
    if !(g(hi) < T::zero()) {
        return Err(Error::Bracket("integral exceeds one at the right bracket".into()));
    }
    for _ in 0..400 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

fn edge_upper_unchecked<T: Scalar>(nu: &Measure<T>, lambda: T) -> Result<T> {
    let theta = edge_root(nu, lambda)?;
    Ok(theta - nu.integrate(|v| T::one() / (lambda * v - theta)))
}

/// Endpoints `[E_-, E_+]` of the support of `nu boxplus` semicircle at scale `lambda`.
pub fn support_endpoints<T: Scalar>(nu: &Measure<T>, lambda: T) -> Result<(T, T)> {
    if !(lambda >= T::zero()) {
        return Err(param("lambda", "must be >= 0"));
    }
    check_assumption(nu, lambda)?;
    let up = edge_upper_unchecked(nu, lambda)?;
    let down = edge_upper_unchecked(&nu.reflected(), lambda)?;
    Ok((-down, up))
}

/// Small-`lambda0` expansion of `E_+` through fourth order.
pub fn asymptotic_eplus<T: Scalar>(nu: &Measure<T>, lambda0: T) -> Result<T> {
    let m1 = nu.mean();
    let c2 = nu.central_moment(2)?;
    let c3 = nu.central_moment(3)?;
    let c4 = nu.central_moment(4)?;
    let l = lambda0;
    Ok(T::lit(2.0) + l * m1 + l * l * c2 + l.powi(3) * c3 + l.powi(4) * (c4 - T::lit(2.25) * c2 * c2))
}

/// Least-squares fit `rho(E) ~ A (E_+ - E)^p` over `E_+ - E` in `[1e-4, 1e-2]`.
/// Returns `(A, p)`.
pub fn edge_exponent_fit<T: Scalar>(sol: &FreeConvolutionSolution<T>) -> Result<(T, T)> {
    let top = sol.support.1;
    let near = sol.energies.iter().filter(|&&e| (e - top).abs() <= T::lit(0.05)).count();
    if near < 20 {
        return Err(Error::InsufficientEdgePoints { found: near, needed: 20 });
    }
    let pts: Vec<(T, T)> = sol
        .energies
        .iter()
        .zip(&sol.density)
        .filter_map(|(&e, &r)| {
            let k = top - e;
            (k >= T::lit(1e-4) && k <= T::lit(1e-2) && r > T::zero()).then(|| (k.ln(), r.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientEdgePoints { found: pts.len(), needed: 3 });
    }
    let n = T::of_usize(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let p = sxy / sxx;
    Ok(((my - p * mx).exp(), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn semicircle_m(z: Complex<f64>) -> Complex<f64> {
        // root of m^2 + z m + 1 = 0 with im m > 0
        let s = (z * z - 4.0).sqrt();
        let a = (-z + s) / 2.0;
        if a.im > 0.0 { a } else { (-z - s) / 2.0 }
    }

    #[test]
    fn point_mass_gives_semicircle() {
        let nu = Measure::dirac(0.0);
        let o = SolveOptions::default();
        for &(e, eta) in &[(0.0, 1e-6), (1.5, 1e-3), (2.5, 1e-6), (-1.99, 1e-6), (0.3, 2.0)] {
            let m = solve_point(&nu, 0.0, 1.0, SpectralPoint::new(e, eta), None, &o).unwrap();
            let exact = semicircle_m(Complex::new(e, eta));
            assert!((m - exact).norm() < 1e-9, "{e} {eta}: {m} vs {exact}");
        }
        let m0 = solve_point(&nu, 0.0, 1.0, SpectralPoint::new(0.0, 1e-6), None, &o).unwrap();
        assert_abs_diff_eq!(m0.im, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn warm_start_does_not_change_answer() {
        let nu = Measure::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let o = SolveOptions::default();
        let z = SpectralPoint::new(2.1, 1e-6);
        let cold = solve_point(&nu, 0.5, 1.0, z, None, &o).unwrap();
        for warm in [Complex::new(-3.0, 0.0), Complex::new(0.0, 5.0), Complex::new(1.0, -1.0)] {
            let m = solve_point(&nu, 0.5, 1.0, z, Some(warm), &o).unwrap();
            assert!((m - cold).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_density_matches_semicircle() {
        let nu = Measure::<f64>::dirac(0.0);
        let sol = solve_grid(&nu, 0.0, 1.0, -3.0, 3.0, 601, 1e-6, &SolveOptions::default()).unwrap();
        for (e, r) in sol.energies.iter().zip(&sol.density) {
            let exact = if e.abs() < 2.0 { (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI) } else { 0.0 };
            if (e.abs() - 2.0).abs() > 0.05 {
                assert!((r - exact).abs() < 1e-6, "{e}: {r} vs {exact}");
            }
        }
        assert_abs_diff_eq!(sol.support.0, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.support.1, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let nu = Measure::dirac(0.0);
        let o = SolveOptions::default();
        assert!(solve_point(&nu, 0.0, 1.0, SpectralPoint::new(0.0, 0.0), None, &o).is_err());
        assert!(solve_point(&nu, -1.0, 1.0, SpectralPoint::new(0.0, 1.0), None, &o).is_err());
        assert!(solve_point(&nu, 0.0, 0.0, SpectralPoint::new(0.0, 1.0), None, &o).is_err());
    }

    #[test]
    fn edges_of_point_mass_and_shift() {
        assert_eq!(support_endpoints(&Measure::dirac(0.0), 0.0).map(|(a, b)| ((a + 2.0f64).abs() < 1e-12, (b - 2.0).abs() < 1e-12)), Ok((true, true)));
        let (lo, hi) = support_endpoints(&Measure::dirac(1.5), 0.4).unwrap();
        assert_abs_diff_eq!(hi, 2.6, epsilon = 1e-12);
        assert_abs_diff_eq!(lo, -1.4, epsilon = 1e-12);
    }

    #[test]
    fn two_cut_regime_is_rejected() {
        let nu = Measure::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(matches!(support_endpoints(&nu, 1.5), Err(Error::AssumptionViolated { .. })));
        assert!(support_endpoints(&nu, 0.9).is_ok());
        let j = Measure::jacobi(0.0, 2.0).unwrap();
        assert!(matches!(support_endpoints(&j, 2.0), Err(Error::AssumptionViolated { .. })));
    }

    #[test]
    fn asymptotic_eplus_rademacher() {
        let nu = Measure::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_abs_diff_eq!(asymptotic_eplus(&nu, 0.1).unwrap(), 2.009875, epsilon = 1e-12);
        assert_abs_diff_eq!(asymptotic_eplus(&Measure::dirac(0.7), 0.3).unwrap(), 2.21, epsilon = 1e-12);
    }

    #[test]
    fn f32_solver_runs() {
        let nu = Measure::<f32>::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let m = solve_point(&nu, 0.3, 1.0, SpectralPoint::new(0.2, 0.05), None, &SolveOptions::default()).unwrap();
        let nu64 = Measure::<f64>::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let m64 = solve_point(&nu64, 0.3, 1.0, SpectralPoint::new(0.2, 0.05), None, &SolveOptions::default()).unwrap();
        assert!((m.re as f64 - m64.re).abs() < 1e-4 && (m.im as f64 - m64.im).abs() < 1e-4);
    }
}

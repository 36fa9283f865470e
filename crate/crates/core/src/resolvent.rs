//! Green functions `G = (H - z)^{-1}`, resolvent identities and local-law
//! diagnostics.

use num_complex::Complex;
use serde::Serialize;

use crate::edgescale::EdgeScaling;
use crate::error::{param, Error, Result};
use crate::freeconv::{solve_point, SolveOptions};
use crate::linalg::{shifted_inverse, symmetric_eigenvalues, CMatrix, Matrix};
use crate::measure::{Measure, SpectralPoint};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Scalar;

/// `epsilon` used for the lower bound `eta >= N^{-1 + xi}` of the local law.
pub const XI: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct GreenEvaluation<T> {
    pub z: SpectralPoint<T>,
    pub g: CMatrix<T>,
    /// `tr G / N`
    pub m: Complex<T>,
}

pub fn green<T: Scalar>(h: &Matrix<T>, z: SpectralPoint<T>) -> Result<GreenEvaluation<T>> {
    if !(z.im > T::zero()) {
        return Err(param("z.im", "must be > 0"));
    }
    let g = shifted_inverse(h, z.z())?;
    let m = g.trace() / T::of_usize(h.n());
    Ok(GreenEvaluation { z, g, m })
}

/// A principal minor together with the original labels of its rows.
#[derive(Clone, Debug)]
pub struct Minor<T> {
    pub matrix: Matrix<T>,
    pub labels: Vec<usize>,
}

impl<T> Minor<T> {
    /// Position of an original label inside the minor.
    pub fn pos(&self, label: usize) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }
}

/// Removes the rows and columns in `t`.
pub fn minor<T: Scalar>(h: &Matrix<T>, t: &[usize]) -> Result<Minor<T>> {
    if let Some(&bad) = t.iter().find(|&&i| i >= h.n()) {
        return Err(param("T", format!("index {bad} out of range for N = {}", h.n())));
    }
    let labels: Vec<usize> = (0..h.n()).filter(|i| !t.contains(i)).collect();
    Ok(Minor { matrix: h.principal(&labels), labels })
}

/// `m^{(T)} = tr G^{(T)} / N` with the full-size normalization.
pub fn minor_m<T: Scalar>(g_minor: &CMatrix<T>, n_full: usize) -> Complex<T> {
    g_minor.trace() / T::of_usize(n_full)
}

/// Absolute residuals of the four exact resolvent identities.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals<T> {
    pub schur: T,
    pub basic: T,
    pub onesided: T,
    pub twosided: T,
}

impl<T: Scalar> IdentityResiduals<T> {
    pub fn max(&self) -> T {
        self.schur.max(self.basic).max(self.onesided).max(self.twosided)
    }
}

/// Evaluates the Schur complement formula at `i`, the basic identity for
/// `G_ij` removing `k`, and the one- and two-sided expansions of `G_ij`.
pub fn verify_identities<T: Scalar>(h: &Matrix<T>, z: SpectralPoint<T>, i: usize, j: usize, k: usize) -> Result<IdentityResiduals<T>> {
    let n = h.n();
    if i >= n || j >= n || k >= n {
        return Err(param("index", format!("indices must be < N = {n}")));
    }
    if i == j || i == k || j == k {
        return Err(Error::IndexCollision(format!("identities need distinct i, j, k; got ({i}, {j}, {k})")));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let c = |x: T| Complex::new(x, T::zero());
    let g = green(h, z)?.g;
    let mi = minor(h, &[i])?;
    let gi = green(&mi.matrix, z)?.g;
    let mj = minor(h, &[j])?;
    let gj = green(&mj.matrix, z)?.g;
    let mk = minor(h, &[k])?;
    let gk = green(&mk.matrix, z)?.g;
    let mij = minor(h, &[i, j])?;
    let gij = green(&mij.matrix, z)?.g;

    // Schur complement at i
    let mut quad = zero;
    for (a, &ka) in mi.labels.iter().enumerate() {
        for (b, &kb) in mi.labels.iter().enumerate() {
            quad += c(h[(i, ka)]) * gi[(a, b)] * c(h[(kb, i)]);
        }
    }
    let schur = (g[(i, i)] - (c(h[(i, i)]) - z.z() - quad).inv()).norm();

    let (pi, pj) = (mk.pos(i).expect("kept"), mk.pos(j).expect("kept"));
    let basic = (g[(i, j)] - gk[(pi, pj)] - g[(i, k)] * g[(k, j)] / g[(k, k)]).norm();

    let pj_in_i = mi.pos(j).expect("kept");
    let mut s1 = zero;
    for (a, &ka) in mi.labels.iter().enumerate() {
        s1 += c(h[(i, ka)]) * gi[(a, pj_in_i)];
    }
    let pi_in_j = mj.pos(i).expect("kept");
    let mut s2 = zero;
    for (a, &ka) in mj.labels.iter().enumerate() {
        s2 += gj[(pi_in_j, a)] * c(h[(ka, j)]);
    }
    let onesided = (g[(i, j)] + g[(i, i)] * s1).norm().max((g[(i, j)] + g[(j, j)] * s2).norm());

    let mut q2 = zero;
    for (a, &ka) in mij.labels.iter().enumerate() {
        for (b, &kb) in mij.labels.iter().enumerate() {
            q2 += c(h[(i, ka)]) * gij[(a, b)] * c(h[(kb, j)]);
        }
    }
    let twosided = (g[(i, j)] + g[(i, i)] * gi[(pj_in_i, pj_in_i)] * (c(h[(i, j)]) - q2)).norm();

    Ok(IdentityResiduals { schur, basic, onesided, twosided })
}

/// `max_i | sum_j |G_ij|^2 - im G_ii / eta |`
pub fn ward_residual<T: Scalar>(ge: &GreenEvaluation<T>) -> T {
    let n = ge.g.n();
    (0..n)
        .map(|i| {
            let s: T = ge.g.row(i).iter().map(|x| x.norm_sqr()).sum();
            (s - ge.g[(i, i)].im / ge.z.im).abs()
        })
        .fold(T::zero(), T::max)
}

/// Local-law residuals, each normalized by its predicted size.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LocalLawResiduals<T> {
    /// `|m - m_fc_hat| N eta`
    pub r_m: T,
    /// `max_{i != j} |G_ij| / Pi`
    pub r_offdiag: T,
    /// `max_i |G_ii - g_i| / Pi`
    pub r_diag: T,
    /// `sqrt(im m_fc_hat / (N eta)) + 1/(N eta)`
    pub pi: T,
}

fn scaled<T: Scalar>(h: &Matrix<T>, gamma: T) -> Matrix<T> {
    let mut s = h.clone();
    s.scale(gamma);
    s
}

/// Compares the Green function of `gamma H` with the deterministic
/// approximation built from `m_fc_hat`. `v` is the potential of `H`.
pub fn local_law_residuals<T: Scalar>(h: &Matrix<T>, v: &[T], scaling: &EdgeScaling<T>, z: SpectralPoint<T>) -> Result<LocalLawResiduals<T>> {
    let n = h.n();
    if v.len() != n {
        return Err(param("v", "potential length must equal N"));
    }
    let nn = T::of_usize(n);
    let min_eta = nn.powf(T::lit(-1.0 + XI));
    if z.im < min_eta {
        return Err(Error::EtaTooSmall { eta: z.im.to_f64_lossy(), min: min_eta.to_f64_lossy() });
    }
    let nu = Measure::empirical(v)?;
    let (lambda, gamma) = (scaling.lambda, scaling.gamma);
    let m_hat = solve_point(&nu, lambda, gamma, z, None, &SolveOptions::default())?;
    let ge = green(&scaled(h, gamma), z)?;
    let n_eta = nn * z.im;
    let pi = (m_hat.im / n_eta).sqrt() + T::one() / n_eta;
    let r_m = (ge.m - m_hat).norm() * n_eta;
    let mut off = T::zero();
    let mut diag = T::zero();
    for i in 0..n {
        let gi = (Complex::new(lambda * gamma * v[i], T::zero()) - z.z() - m_hat * gamma * gamma).inv();
        diag = diag.max((ge.g[(i, i)] - gi).norm());
        for j in 0..n {
            if i != j {
                off = off.max(ge.g[(i, j)].norm());
            }
        }
    }
    Ok(LocalLawResiduals { r_m, r_offdiag: off / pi, r_diag: diag / pi, pi })
}

/// Optical-theorem diagnostic on `G = (gamma H - z)^{-1}`:
/// `(z + gamma^2 m - tau) (G^2)_ii + (G^3)_ii / N`, at row `i` or averaged.
pub fn optical_residual<T: Scalar>(h: &Matrix<T>, z: SpectralPoint<T>, scaling: &EdgeScaling<T>, i: Option<usize>) -> Result<Complex<T>> {
    Ok(optical_terms(h, z, scaling, i)?.residual)
}

/// The optical residual together with the diagonal contribution
/// `mean_i G_ii^2 / (2 A_3)` that the expansion drops with the `a = i` term.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OpticalTerms<T> {
    pub residual: Complex<T>,
    pub diagonal: Complex<T>,
}

pub fn optical_terms<T: Scalar>(h: &Matrix<T>, z: SpectralPoint<T>, scaling: &EdgeScaling<T>, i: Option<usize>) -> Result<OpticalTerms<T>> {
    let n = h.n();
    if let Some(i) = i {
        if i >= n {
            return Err(param("i", "index out of range"));
        }
    }
    let ge = green(&scaled(h, scaling.gamma), z)?;
    let g = &ge.g;
    let nn = T::of_usize(n);
    let g2 = scaling.gamma * scaling.gamma;
    let pref = z.z() + ge.m * g2 - Complex::new(scaling.tau, T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    let row_terms = |i: usize| {
        let gi = g.row(i);
        // G symmetric: (G^2)_ii = sum_s G_is^2, (G^3)_ii = g_i^T G g_i
        let sq: Complex<T> = gi.iter().fold(zero, |a, &x| a + x * x);
        let mut cube = zero;
        for k in 0..n {
            let gk = g.row(k);
            let mut dotk = zero;
            for s in 0..n {
                dotk += gk[s] * gi[s];
            }
            cube += gi[k] * dotk;
        }
        pref * sq + cube / nn
    };
    let a3 = Complex::new(T::lit(2.0) * scaling.a[3], T::zero());
    let (residual, diagonal) = match i {
        Some(i) => (row_terms(i), g[(i, i)] * g[(i, i)] / a3),
        None => {
            // averaged form via traces: tr G^2 and tr G^3
            let mut tr2 = zero;
            let mut tr3 = zero;
            let mut row = vec![zero; n];
            for a in 0..n {
                let ga = g.row(a);
                for (b, r) in row.iter_mut().enumerate() {
                    let gb = g.row(b);
                    let mut s = zero;
                    for c in 0..n {
                        s += ga[c] * gb[c];
                    }
                    *r = s;
                }
                tr2 += row[a];
                for (b, r) in row.iter().enumerate() {
                    tr3 += *r * ga[b];
                }
            }
            let diag: Complex<T> = (0..n).map(|i| g[(i, i)] * g[(i, i)]).fold(zero, |a, b| a + b);
            (pref * tr2 / nn + tr3 / (nn * nn), diag / a3 / nn)
        }
    };
    Ok(OpticalTerms { residual, diagonal })
}

/// Smooth cutoff equal to 1 below 1/9 and 0 above 2/9.
pub fn cutoff_k<T: Scalar>(x: T) -> T {
    let ninth = T::one() / T::lit(9.0);
    let t = (x - ninth) / ninth;
    if t <= T::zero() {
        return T::one();
    }
    if t >= T::one() {
        return T::zero();
    }
    let f = |s: T| (-T::one() / s).exp();
    let (a, b) = (f(t), f(T::one() - t));
    b / (a + b)
}

/// `(N/pi) int_{E1}^{E2} im m(y + i eta) dy` and the number of eigenvalues in
/// `(E1, E2]`, for a given spectrum.
pub fn dos_window_from_spectrum<T: Scalar>(ev: &[T], e1: T, e2: T, eta: T) -> Result<(T, usize)> {
    if !(e2 > e1) || !(eta > T::zero()) {
        return Err(param("window", "need E1 < E2 and eta > 0"));
    }
    let im_sum = |y: T| ev.iter().map(|&mu| eta / ((mu - y) * (mu - y) + eta * eta)).sum::<T>();
    let smoothed = adaptive_simpson(im_sum, e1, e2, 200, T::lit(1e-9)) / T::PI();
    let exact = ev.iter().filter(|&&mu| mu > e1 && mu <= e2).count();
    Ok((smoothed, exact))
}

pub fn dos_window<T: Scalar>(h: &Matrix<T>, e1: T, e2: T, eta: T) -> Result<(T, usize)> {
    dos_window_from_spectrum(&symmetric_eigenvalues(h)?, e1, e2, eta)
}

/// Scalar laws with known cumulants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ScalarLaw {
    Gaussian { sigma2: f64 },
    Rademacher { a: f64 },
}

impl ScalarLaw {
    /// Raw moments `E h^k`, `k = 0..=kmax`.
    pub fn moments(&self, kmax: usize) -> Vec<f64> {
        (0..=kmax)
            .map(|k| {
                if k % 2 == 1 {
                    return 0.0;
                }
                match *self {
                    ScalarLaw::Gaussian { sigma2 } => {
                        let df: f64 = (1..k).step_by(2).map(|j| j as f64).product();
                        sigma2.powi(k as i32 / 2) * df
                    }
                    ScalarLaw::Rademacher { a } => a.powi(k as i32),
                }
            })
            .collect()
    }

    /// Cumulants `kappa_1..=kappa_kmax` (index 0 unused) from the moments.
    pub fn cumulants(&self, kmax: usize) -> Vec<f64> {
        let m = self.moments(kmax);
        let mut kappa = vec![0.0; kmax + 1];
        for n in 1..=kmax {
            let mut s = m[n];
            for j in 1..n {
                s -= binom(n - 1, j - 1) * kappa[j] * m[n - j];
            }
            kappa[n] = s;
        }
        kappa
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn falling(j: usize, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (j - i) as f64)
}

/// `|E[h Q'(h)] - sum_{m=1}^{M} kappa_m/(m-1)! E[Q^{(m)}(h)]|` for a polynomial
/// `Q` with coefficients `q[0] + q[1] h + ...` of degree at most five.
pub fn cumulant_expansion_residual(law: ScalarLaw, q: &[f64], m_max: usize) -> Result<f64> {
    if q.len() > 6 {
        return Err(param("Q", "polynomial degree must be at most 5"));
    }
    match law {
        ScalarLaw::Gaussian { sigma2 } if !(sigma2 > 0.0) => return Err(param("sigma2", "must be > 0")),
        ScalarLaw::Rademacher { a } if !(a > 0.0) => return Err(param("a", "must be > 0")),
        _ => {}
    }
    let kmax = m_max.max(q.len()) + 1;
    let mom = law.moments(kmax);
    let kappa = law.cumulants(kmax);
    let lhs: f64 = q.iter().enumerate().map(|(j, c)| c * j as f64 * mom[j]).sum();
    let mut rhs = 0.0;
    let mut fact = 1.0;
    for m in 1..=m_max {
        if m > 1 {
            fact *= (m - 1) as f64;
        }
        let e: f64 = q.iter().enumerate().filter(|(j, _)| *j >= m).map(|(j, c)| c * falling(j, m) * mom[j - m]).sum();
        rhs += kappa.get(m).copied().unwrap_or(0.0) / fact * e;
    }
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_wigner, EntryLaw};
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn random_h(n: usize, seed: u64) -> Matrix<f64> {
        sample_wigner(n, EntryLaw::Gaussian, 1.0, false, &mut stream(seed, "h", 0)).unwrap()
    }

    #[test]
    fn green_of_scalar_and_diagonal() {
        let z = SpectralPoint::new(0.3, 0.2);
        let g = green(&Matrix::diagonal(&[1.5]), z).unwrap();
        assert!((g.g[(0, 0)] - (Complex::new(1.5, 0.0) - z.z()).inv()).norm() < 1e-15);
        let d = [1.0, -2.0, 0.5];
        let g = green(&Matrix::diagonal(&d), z).unwrap();
        for i in 0..3 {
            assert!((g.g[(i, i)] - (Complex::new(d[i], 0.0) - z.z()).inv()).norm() < 1e-15);
        }
        assert!(green(&Matrix::diagonal(&d), SpectralPoint::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn minors_keep_labels() {
        let h = Matrix::from_fn(3, |i, j| (3 * i + j) as f64);
        let m = minor(&h, &[1]).unwrap();
        assert_eq!(m.labels, vec![0, 2]);
        assert_eq!(m.matrix.as_slice(), &[0.0, 2.0, 6.0, 8.0]);
        assert_eq!(minor(&h, &[]).unwrap().matrix, h);
        assert!(minor(&h, &[3]).is_err());
    }

    #[test]
    fn identities_on_random_matrix() {
        let h = random_h(20, 1);
        let r = verify_identities(&h, SpectralPoint::new(0.4, 0.1), 2, 7, 11).unwrap();
        assert!(r.max() < 1e-10, "{r:?}");
        assert!(matches!(verify_identities(&h, SpectralPoint::new(0.4, 0.1), 2, 2, 11), Err(Error::IndexCollision(_))));
    }

    #[test]
    fn ward_identity() {
        let h = random_h(40, 2);
        let ge = green(&h, SpectralPoint::new(1.9, 0.01)).unwrap();
        assert!(ward_residual(&ge) < 1e-9);
        assert!(ge.m.im > 0.0);
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff_k(0.0), 1.0);
        assert_eq!(cutoff_k(0.11), 1.0);
        assert_eq!(cutoff_k(0.23), 0.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let x = 1.0 / 9.0 + k as f64 / 900.0;
            let v = cutoff_k(x);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        assert_abs_diff_eq!(cutoff_k(1.5 / 9.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dos_window_limits() {
        let h = random_h(50, 3);
        let (s, e) = dos_window(&h, -10.0, 10.0, 1e-3).unwrap();
        assert_eq!(e, 50);
        assert!((s - 50.0).abs() < 0.5);
        let (s, e) = dos_window(&h, 20.0, 30.0, 1e-3).unwrap();
        assert_eq!(e, 0);
        assert!(s.abs() < 0.1);
        assert!(dos_window(&h, 1.0, 0.0, 1e-3).is_err());
    }

    #[test]
    fn dos_window_closed_form() {
        let ev = [-0.3f64, 0.1, 0.4];
        let eta = 0.05;
        let (s, _) = dos_window_from_spectrum(&ev, -0.2, 0.35, eta).unwrap();
        let exact: f64 = ev.iter().map(|mu| (((0.35 - mu) / eta).atan() - ((-0.2 - mu) / eta).atan()) / std::f64::consts::PI).sum();
        assert_abs_diff_eq!(s, exact, epsilon = 1e-8);
    }

    #[test]
    fn cumulants_of_rademacher() {
        let k = ScalarLaw::Rademacher { a: 0.5 }.cumulants(6);
        assert_abs_diff_eq!(k[2], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(k[4], -2.0 * 0.5f64.powi(4), epsilon = 1e-15);
        assert_abs_diff_eq!(k[6], 16.0 * 0.5f64.powi(6), epsilon = 1e-15);
        let g = ScalarLaw::Gaussian { sigma2: 2.0 }.cumulants(6);
        assert_abs_diff_eq!(g[2], 2.0, epsilon = 1e-14);
        assert!(g[4].abs() < 1e-12 && g[6].abs() < 1e-11);
    }

    #[test]
    fn cumulant_expansion_examples() {
        let g = ScalarLaw::Gaussian { sigma2: 0.7 };
        assert_eq!(cumulant_expansion_residual(g, &[0.0, 0.0, 0.0, 1.0], 2).unwrap(), 0.0);
        assert!(cumulant_expansion_residual(g, &[0.3, -1.0, 0.5, 2.0, 0.1, -0.7], 2).unwrap() < 1e-12);
        let r = ScalarLaw::Rademacher { a: 1.0 };
        assert!(cumulant_expansion_residual(r, &[0.0, 0.0, 1.0], 4).unwrap() < 1e-12);
        // truncation below the degree leaves the fourth-cumulant term
        let q5 = [0.0, 0.0, 0.0, 0.0, 1.0];
        let full = cumulant_expansion_residual(r, &q5, 4).unwrap();
        let cut = cumulant_expansion_residual(r, &q5, 2).unwrap();
        assert!(full < 1e-12);
        assert_abs_diff_eq!(cut, 2.0 / 6.0 * 24.0, epsilon = 1e-12);
        assert!(cumulant_expansion_residual(r, &[0.0; 7], 2).is_err());
    }
}

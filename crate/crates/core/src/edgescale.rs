//! Edge rescaling constants `zeta, gamma, tau` and the coefficient identities
//! along the Ornstein-Uhlenbeck flow `lambda(t) = lambda0 exp(-t/2)`.

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::freeconv::{check_assumption, edge_root};
use crate::measure::Measure;
use crate::scalar::Scalar;

/// Default finite-difference step for time derivatives.
pub const FD_STEP: f64 = 1e-5;

/// Rescaling constants for `(nu_hat, lambda)`.
///
/// `a[n]` holds `A_n = int 1/(lambda gamma v - tau)^n` and `a_prime[n]` the
/// same integral with `v` in the numerator, for `n = 1..=4` (index 0 unused).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeScaling<T> {
    pub lambda: T,
    pub zeta: T,
    pub gamma: T,
    pub tau: T,
    pub e_plus_hat: T,
    pub l_plus_hat: T,
    pub a: [T; 5],
    pub a_prime: [T; 5],
}

/// Residuals of the exact identities satisfied by a valid scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals<T> {
    pub a2: T,
    pub a3: T,
    pub tau: T,
    pub gamma_relation: T,
    pub recurrence: T,
}

impl<T: Scalar> IdentityResiduals<T> {
    pub fn max(&self) -> T {
        self.a2.max(self.a3).max(self.tau).max(self.gamma_relation).max(self.recurrence)
    }
}

/// Computes the scaling constants. Checks the no-outlier assumption first.
pub fn build<T: Scalar>(nu: &Measure<T>, lambda: T) -> Result<EdgeScaling<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(param("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    check_assumption(nu, lambda)?;
    build_unchecked(nu, lambda)
}

fn build_unchecked<T: Scalar>(nu: &Measure<T>, lambda: T) -> Result<EdgeScaling<T>> {
    let zeta = edge_root(nu, lambda)?;
    let gap = nu.nodes().map(|(v, _)| zeta - lambda * v).fold(T::infinity(), T::min);
    if !(gap > T::lit(1e-6)) {
        return Err(Error::Bracket(format!("zeta - lambda v = {gap} is not separated from the support")));
    }
    let s3 = nu.integrate(|v| (lambda * v - zeta).powi(-3));
    let gamma = (-s3).powf(-T::one() / T::lit(3.0));
    let tau = gamma * zeta;
    let e_plus_hat = zeta - nu.integrate(|v| T::one() / (lambda * v - zeta));
    let l_plus_hat = gamma * e_plus_hat;
    let lg = lambda * gamma;
    let mut a = [T::zero(); 5];
    let mut a_prime = [T::zero(); 5];
    for (v, w) in nu.nodes() {
        let inv = T::one() / (lg * v - tau);
        let mut p = T::one();
        for n in 1..5 {
            p *= inv;
            a[n] += w * p;
            a_prime[n] += w * v * p;
        }
    }
    Ok(EdgeScaling { lambda, zeta, gamma, tau, e_plus_hat, l_plus_hat, a, a_prime })
}

impl<T: Scalar> EdgeScaling<T> {
    /// `|gamma - (-A_3)^{-1/6}|`
    pub fn gamma_relation_residual(&self) -> T {
        (self.gamma - (-self.a[3]).powf(-T::one() / T::lit(6.0))).abs()
    }

    pub fn identity_residuals(&self) -> IdentityResiduals<T> {
        let g = self.gamma;
        let lg = self.lambda * g;
        let recurrence = (2..5)
            .map(|n| (lg * self.a_prime[n] - self.tau * self.a[n] - self.a[n - 1]).abs())
            .fold(T::zero(), T::max);
        IdentityResiduals {
            a2: (self.a[2] - g.powi(-2)).abs(),
            a3: (self.a[3] + g.powi(-6)).abs(),
            tau: (self.tau - g * self.zeta).abs(),
            gamma_relation: self.gamma_relation_residual(),
            recurrence,
        }
    }
}

/// Free function form of [`EdgeScaling::gamma_relation_residual`].
pub fn verify_gamma_relation<T: Scalar>(s: &EdgeScaling<T>) -> T {
    s.gamma_relation_residual()
}

/// Scaling at time `t` of the flow, `lambda = lambda0 exp(-t/2)`.
pub fn flow_scaling<T: Scalar>(nu: &Measure<T>, lambda0: T, t: T) -> Result<EdgeScaling<T>> {
    if !(t >= T::zero()) {
        return Err(param("t", format!("must be >= 0, got {t}")));
    }
    build(nu, lambda0 * (-t / T::lit(2.0)).exp())
}

/// Time derivatives along the flow, by central differences of step `h`.
#[derive(Clone, Debug, Serialize)]
pub struct FlowDerivatives<T> {
    pub t: T,
    pub h: T,
    pub scaling: EdgeScaling<T>,
    pub gamma_dot: T,
    /// `d/dt (lambda gamma)`
    pub lambda_gamma_dot: T,
    pub tau_dot: T,
    pub a3_dot: T,
    /// `d/dt A_1`, i.e. `d/dt m_fc_hat(L_plus_hat)`
    pub a1_dot: T,
    /// `-2 gamma gamma_dot A_1 + gamma^2 d/dt(lambda gamma) A'_2`
    pub z_dot_formula: T,
    /// finite difference of `L_plus_hat(t)`
    pub z_dot_fd: T,
}

/// Computes [`FlowDerivatives`]. The stencil may reach `t - h < 0`, where the
/// flow is continued by the same formula for `lambda(t)`.
pub fn flow_derivatives<T: Scalar>(nu: &Measure<T>, lambda0: T, t: T, h: T) -> Result<FlowDerivatives<T>> {
    if !(t >= T::zero()) {
        return Err(param("t", format!("must be >= 0, got {t}")));
    }
    if !(h > T::zero()) {
        return Err(param("h", "finite-difference step must be > 0"));
    }
    let lam = |s: T| lambda0 * (-s / T::lit(2.0)).exp();
    let scaling = build(nu, lam(t))?;
    let plus = build_unchecked(nu, lam(t + h))?;
    let minus = build_unchecked(nu, lam(t - h))?;
    let d = |f: &dyn Fn(&EdgeScaling<T>) -> T| (f(&plus) - f(&minus)) / (T::lit(2.0) * h);
    let gamma_dot = d(&|s| s.gamma);
    let lambda_gamma_dot = d(&|s| s.lambda * s.gamma);
    let tau_dot = d(&|s| s.tau);
    let a3_dot = d(&|s| s.a[3]);
    let a1_dot = d(&|s| s.a[1]);
    let z_dot_fd = d(&|s| s.l_plus_hat);
    let g = scaling.gamma;
    let z_dot_formula = -T::lit(2.0) * g * gamma_dot * scaling.a[1] + g * g * lambda_gamma_dot * scaling.a_prime[2];
    Ok(FlowDerivatives { t, h, scaling, gamma_dot, lambda_gamma_dot, tau_dot, a3_dot, a1_dot, z_dot_formula, z_dot_fd })
}

/// `(formula, finite difference)` values of `dz/dt` at `t`.
pub fn dot_z<T: Scalar>(nu: &Measure<T>, lambda0: T, t: T, h: T) -> Result<(T, T)> {
    let d = flow_derivatives(nu, lambda0, t, h)?;
    Ok((d.z_dot_formula, d.z_dot_fd))
}

/// The four expansion coefficients whose cancellation drives the flow argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coefficients<T> {
    pub c2: T,
    pub c3: T,
    pub c0: T,
    pub c0_prime: T,
    /// Finite difference of `m_fc_hat(L_plus_hat)` in `t`, which `c0` must match.
    pub a1_dot: T,
}

pub fn coefficients<T: Scalar>(nu: &Measure<T>, lambda0: T, t: T) -> Result<Coefficients<T>> {
    coefficients_with_step(nu, lambda0, t, T::lit(FD_STEP))
}

pub fn coefficients_with_step<T: Scalar>(nu: &Measure<T>, lambda0: T, t: T, h: T) -> Result<Coefficients<T>> {
    let d = flow_derivatives(nu, lambda0, t, h)?;
    let s = &d.scaling;
    let (g, a, ap) = (s.gamma, &s.a, &s.a_prime);
    let two = T::lit(2.0);
    let lgd = d.lambda_gamma_dot;
    let c2 = -lgd * g * g * ap[2] + d.z_dot_fd + two * d.gamma_dot * g * a[1];
    let c0_prime = -lgd * (ap[3] - a[3] * ap[4] / a[4]) + d.gamma_dot / g * (g.powi(-2) - two * a[3] * a[3] / a[4]);
    let c3 = two * g * g * c0_prime;
    let c0 = -lgd * (ap[2] - a[2] * ap[4] / a[4]) - two * d.gamma_dot * a[2] * a[3] / (g * a[4]);
    Ok(Coefficients { c2, c3, c0, c0_prime, a1_dot: d.a1_dot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeconv::{solve_point, support_endpoints, SolveOptions};
    use crate::measure::SpectralPoint;
    use approx::assert_abs_diff_eq;

    fn two_atom() -> Measure<f64> {
        Measure::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn zero_lambda_is_semicircle() {
        let s = build(&two_atom(), 0.0).unwrap();
        assert_abs_diff_eq!(s.zeta, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.tau, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.e_plus_hat, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.l_plus_hat, 2.0, epsilon = 1e-12);
        assert!(s.gamma_relation_residual() < 1e-14);
    }

    #[test]
    fn point_mass_shifts() {
        let c = 0.8;
        let s = build(&Measure::dirac(c), 0.3).unwrap();
        assert_abs_diff_eq!(s.zeta, 1.0 + 0.3 * c, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.e_plus_hat, 2.0 + 0.3 * c, epsilon = 1e-12);
        assert!(s.gamma_relation_residual() < 1e-12);
    }

    #[test]
    fn identities_hold_for_two_atoms() {
        let s = build(&two_atom(), 0.5).unwrap();
        assert!(s.gamma > 0.0 && s.gamma <= 1.0);
        let r = s.identity_residuals();
        assert!(r.max() < 1e-10, "{r:?}");
        assert!(r.recurrence < 1e-12);
    }

    #[test]
    fn a1_is_m_hat_at_the_edge() {
        let nu = two_atom();
        let s = build(&nu, 0.5).unwrap();
        // m(L + i eta) = A_1 + c sqrt(eta) + O(eta): extrapolate in sqrt(eta)
        let at = |eta: f64| solve_point(&nu, 0.5, s.gamma, SpectralPoint::new(s.l_plus_hat, eta), None, &SolveOptions::default()).unwrap();
        let m = at(1e-7 / 4.0) * 2.0 - at(1e-7);
        assert!((m.re - s.a[1]).abs() < 1e-5 && m.im.abs() < 1e-5, "{m} vs {}", s.a[1]);
    }

    #[test]
    fn e_plus_hat_is_population_edge_for_population_measure() {
        let nu = two_atom();
        let s = build(&nu, 0.5).unwrap();
        let (_, e) = support_endpoints(&nu, 0.5).unwrap();
        assert_abs_diff_eq!(s.e_plus_hat, e, epsilon = 1e-12);
    }

    #[test]
    fn long_flow_returns_to_semicircle() {
        let s = flow_scaling(&two_atom(), 0.5, 60.0).unwrap();
        assert_abs_diff_eq!(s.zeta, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.e_plus_hat, 2.0, epsilon = 1e-12);
        let n = 500.0f64;
        let s = flow_scaling(&two_atom(), 0.5, 4.0 * n.ln()).unwrap();
        assert!((s.gamma - 1.0).abs() < 10.0 / (n * n));
        assert!(flow_scaling(&two_atom(), 0.5, -1.0).is_err());
    }

    #[test]
    fn dot_z_formula_matches_fd() {
        let (f, fd) = dot_z(&two_atom(), 0.5, 1.0, FD_STEP).unwrap();
        assert!((f - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{f} vs {fd}");
        let (f, fd) = dot_z(&two_atom(), 0.0, 1.0, FD_STEP).unwrap();
        assert_eq!((f, fd), (0.0, 0.0));
    }

    #[test]
    fn coefficients_cancel() {
        for &t in &[0.0, 0.5, 2.0] {
            let c = coefficients(&two_atom(), 0.5, t).unwrap();
            assert!(c.c2.abs() < 1e-5 && c.c3.abs() < 1e-5 && c.c0_prime.abs() < 1e-5, "{c:?}");
            assert!((c.c0 - c.a1_dot).abs() < 1e-5, "{c:?}");
        }
        let c = coefficients(&two_atom(), 0.0, 1.0).unwrap();
        assert_eq!((c.c2, c.c3, c.c0, c.c0_prime), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn assumption_failure_is_reported() {
        let j = Measure::jacobi(0.0, 2.0).unwrap();
        assert!(matches!(build(&j, 2.0), Err(Error::AssumptionViolated { .. })));
        assert!(build(&j, 0.5).is_ok());
    }
}

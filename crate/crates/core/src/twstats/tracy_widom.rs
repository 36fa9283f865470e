//! Tracy-Widom distributions via the Hastings-McLeod solution of Painleve II,
//! and the limit laws used for edge statistics.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::airy::airy;
use crate::error::{param, Error, Result};
use crate::quadrature::{gauss_hermite, gauss_legendre, Rule};
use crate::stats::normal_cdf;

/// Table range and spacing.
pub const TABLE_LO: f64 = -10.0;
pub const TABLE_HI: f64 = 6.0;
pub const TABLE_STEP: f64 = 0.01;
/// Starting point of the backward integration.
pub const S0: f64 = 8.0;
const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Beta {
    One,
    Two,
}

impl TryFrom<u8> for Beta {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        match b {
            1 => Ok(Beta::One),
            2 => Ok(Beta::Two),
            _ => Err(param("beta", format!("must be 1 or 2, got {b}"))),
        }
    }
}

/// A CDF value and whether `s` was outside the tabulated range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdfValue {
    pub value: f64,
    pub clamped: bool,
}

/// `F_1`, `F_2` and their derivatives on the grid `TABLE_LO + k TABLE_STEP`.
#[derive(Clone, Debug)]
pub struct TwTable {
    pub s: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    df1: Vec<f64>,
    df2: Vec<f64>,
}

/// State `(q, q', int q^2, int (x-s) q^2, int q)` with integrals over `(s, inf)`.
type State = [f64; 5];

/// Below this point `q` follows its left-tail expansion instead of the ODE,
/// whose backward integration eventually leaves the Hastings-McLeod solution.
pub const LEFT_SWITCH: f64 = -8.0;

/// `q(s) ~ sqrt(-s/2) (1 + 1/(8 s^3) - 73/(128 s^6))` as `s -> -inf`.
pub fn q_left_tail(s: f64) -> (f64, f64) {
    let r = (-s / 2.0).sqrt();
    let c = 1.0 + 1.0 / (8.0 * s.powi(3)) - 73.0 / (128.0 * s.powi(6));
    let dc = -3.0 / (8.0 * s.powi(4)) + 438.0 / (128.0 * s.powi(7));
    (r * c, -c / (4.0 * r) + r * dc)
}

fn rhs(s: f64, y: &State) -> State {
    let q = if s < LEFT_SWITCH { q_left_tail(s).0 } else { y[0] };
    [y[1], s * q + 2.0 * q * q * q, -q * q, -y[2], -q]
}

fn axpy(y: &State, h: f64, k: &[(&State, f64)]) -> State {
    let mut out = *y;
    for (kk, c) in k {
        for i in 0..5 {
            out[i] += h * c * kk[i];
        }
    }
    out
}

/// One Dormand-Prince 5(4) step. Returns the fifth-order solution and the
/// scaled error norm.
fn dp45_step(s: f64, y: &State, h: f64) -> (State, f64) {
    let k1 = rhs(s, y);
    let k2 = rhs(s + h / 5.0, &axpy(y, h, &[(&k1, 1.0 / 5.0)]));
    let k3 = rhs(s + 3.0 * h / 10.0, &axpy(y, h, &[(&k1, 3.0 / 40.0), (&k2, 9.0 / 40.0)]));
    let k4 = rhs(s + 4.0 * h / 5.0, &axpy(y, h, &[(&k1, 44.0 / 45.0), (&k2, -56.0 / 15.0), (&k3, 32.0 / 9.0)]));
    let k5 = rhs(
        s + 8.0 * h / 9.0,
        &axpy(y, h, &[(&k1, 19372.0 / 6561.0), (&k2, -25360.0 / 2187.0), (&k3, 64448.0 / 6561.0), (&k4, -212.0 / 729.0)]),
    );
    let k6 = rhs(
        s + h,
        &axpy(y, h, &[(&k1, 9017.0 / 3168.0), (&k2, -355.0 / 33.0), (&k3, 46732.0 / 5247.0), (&k4, 49.0 / 176.0), (&k5, -5103.0 / 18656.0)]),
    );
    let y5 = axpy(y, h, &[(&k1, 35.0 / 384.0), (&k3, 500.0 / 1113.0), (&k4, 125.0 / 192.0), (&k5, -2187.0 / 6784.0), (&k6, 11.0 / 84.0)]);
    let k7 = rhs(s + h, &y5);
    let y4 = axpy(
        y,
        h,
        &[(&k1, 5179.0 / 57600.0), (&k3, 7571.0 / 16695.0), (&k4, 393.0 / 640.0), (&k5, -92097.0 / 339200.0), (&k6, 187.0 / 2100.0), (&k7, 1.0 / 40.0)],
    );
    let mut err: f64 = 0.0;
    for i in 0..5 {
        let sc = ATOL + RTOL * y[i].abs().max(y5[i].abs());
        err = err.max(((y5[i] - y4[i]) / sc).abs());
    }
    (y5, err)
}

/// Integrates from `s` to `target` (either direction) with step control.
fn integrate(mut s: f64, mut y: State, target: f64, h: &mut f64) -> State {
    let dir = (target - s).signum();
    while (target - s) * dir > 1e-15 {
        let mut step = h.abs().min((target - s).abs()) * dir;
        loop {
            let (yn, err) = dp45_step(s, &y, step);
            if err <= 1.0 {
                s += step;
                y = yn;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                *h = (step.abs() * grow).min(0.1);
                break;
            }
            step *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
        }
    }
    y
}

/// Initial data at `S0`: Airy values and tail integrals by Gauss-Legendre.
fn initial_state() -> State {
    let (a, ap) = airy(S0);
    let rule: Rule<f64> = gauss_legendre(80).expect("nodes").mapped(S0, S0 + 12.0);
    let u = rule.integrate(|x| airy(x).0.powi(2));
    let i = rule.integrate(|x| (x - S0) * airy(x).0.powi(2));
    let j = rule.integrate(|x| airy(x).0);
    [a, ap, u, i, j]
}

impl TwTable {
    pub fn build() -> Self {
        let n = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1;
        let mut h = 1e-3;
        let mut y = integrate(S0, initial_state(), TABLE_HI, &mut h);
        let mut rows = Vec::with_capacity(n);
        let mut s = TABLE_HI;
        for k in 0..n {
            if k > 0 {
                let next = TABLE_HI - k as f64 * TABLE_STEP;
                if next < LEFT_SWITCH && s >= LEFT_SWITCH {
                    y = integrate(s, y, LEFT_SWITCH, &mut h);
                    s = LEFT_SWITCH;
                }
                y = integrate(s, y, next, &mut h);
                s = next;
                if s < LEFT_SWITCH {
                    let (q, dq) = q_left_tail(s);
                    y[0] = q;
                    y[1] = dq;
                }
            }
            rows.push((s, y));
        }
        rows.reverse();
        let mut t = TwTable { s: vec![], f1: vec![], f2: vec![], df1: vec![], df2: vec![] };
        for (s, y) in rows {
            let f2 = (-y[3]).exp();
            let f1 = (-(y[3] + y[4]) / 2.0).exp();
            t.s.push(s);
            t.f1.push(f1);
            t.f2.push(f2);
            t.df1.push(f1 * (y[0] + y[2]) / 2.0);
            t.df2.push(f2 * y[2]);
        }
        t
    }

    /// Cubic Hermite interpolation using the exact derivatives.
    pub fn eval(&self, beta: Beta, s: f64) -> CdfValue {
        let (f, df) = match beta {
            Beta::One => (&self.f1, &self.df1),
            Beta::Two => (&self.f2, &self.df2),
        };
        if s.is_nan() {
            return CdfValue { value: f64::NAN, clamped: true };
        }
        if s <= TABLE_LO {
            return CdfValue { value: f[0], clamped: s < TABLE_LO };
        }
        if s >= TABLE_HI {
            let value = if s > TABLE_HI { 1.0 } else { f[f.len() - 1] };
            return CdfValue { value, clamped: s > TABLE_HI };
        }
        let pos = (s - TABLE_LO) / TABLE_STEP;
        let k = (pos.floor() as usize).min(self.s.len() - 2);
        let h = self.s[k + 1] - self.s[k];
        let t = (s - self.s[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * f[k]
            + (t3 - 2.0 * t2 + t) * h * df[k]
            + (-2.0 * t3 + 3.0 * t2) * f[k + 1]
            + (t3 - t2) * h * df[k + 1];
        CdfValue { value: v.clamp(0.0, 1.0), clamped: false }
    }
}

/// The shared table, built on first use.
pub fn table() -> &'static TwTable {
    static TABLE: OnceLock<TwTable> = OnceLock::new();
    TABLE.get_or_init(TwTable::build)
}

/// Tracy-Widom CDF `F_beta(s)`.
pub fn tw_cdf(beta: Beta, s: f64) -> CdfValue {
    table().eval(beta, s)
}

pub fn f1(s: f64) -> f64 {
    tw_cdf(Beta::One, s).value
}

pub fn f2(s: f64) -> f64 {
    tw_cdf(Beta::Two, s).value
}

fn hermite_rule() -> &'static Rule<f64> {
    static RULE: OnceLock<Rule<f64>> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(64).expect("nodes"))
}

/// Limit laws for the rescaled largest eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LimitLaw {
    Tw1,
    Tw2,
    Gaussian { variance: f64 },
    /// Law of `X_F + X_G` with `X_F ~ F_1` and independent `X_G ~ N(0, variance)`.
    Tw1GaussConv { variance: f64 },
}

impl LimitLaw {
    pub fn name(&self) -> &'static str {
        match self {
            LimitLaw::Tw1 => "tw1",
            LimitLaw::Tw2 => "tw2",
            LimitLaw::Gaussian { .. } => "gaussian",
            LimitLaw::Tw1GaussConv { .. } => "tw1_gauss_conv",
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        match *self {
            LimitLaw::Tw1 => f1(s),
            LimitLaw::Tw2 => f2(s),
            LimitLaw::Gaussian { variance } => {
                if variance > 0.0 {
                    normal_cdf(s / variance.sqrt())
                } else if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LimitLaw::Tw1GaussConv { variance } => {
                if variance <= 0.0 {
                    return f1(s);
                }
                let r = hermite_rule();
                let sd = (2.0 * variance).sqrt();
                r.integrate(|x| f1(s - sd * x)) / std::f64::consts::PI.sqrt()
            }
        }
    }

    /// Mean and variance from the CDF by quadrature over `[lo, hi]`.
    pub fn moments(&self) -> (f64, f64) {
        let spread = match *self {
            LimitLaw::Gaussian { variance } | LimitLaw::Tw1GaussConv { variance } => 12.0 * variance.max(0.0).sqrt(),
            _ => 0.0,
        };
        let (lo, hi) = (TABLE_LO - spread, TABLE_HI + 2.0 + spread);
        let panels = 400;
        let rule: Rule<f64> = gauss_legendre(8).expect("nodes");
        let w = (hi - lo) / panels as f64;
        let (mut int_f, mut int_sf) = (0.0, 0.0);
        for p in 0..panels {
            let r = rule.mapped(lo + p as f64 * w, lo + (p + 1) as f64 * w);
            for (x, wt) in r.nodes.iter().zip(&r.weights) {
                let f = self.cdf(*x);
                int_f += wt * f;
                int_sf += wt * x * f;
            }
        }
        // E X = hi - int F,  E X^2 = hi^2 - 2 int s F
        let mean = hi - int_f;
        let second = hi * hi - 2.0 * int_sf;
        (mean, second - mean * mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails() {
        // 1 - F_1(6) is about 1.9e-6
        assert!((f1(6.0) - 1.0).abs() < 3e-6 && (f2(6.0) - 1.0).abs() < 1e-6);
        assert!(f1(-10.0) < 1e-6 && f2(-10.0) < 1e-6);
        assert!(tw_cdf(Beta::One, 7.0).clamped && tw_cdf(Beta::One, 7.0).value == 1.0);
        assert!(tw_cdf(Beta::Two, -11.0).clamped);
        assert!(Beta::try_from(4).is_err());
    }

    #[test]
    fn monotone_on_core() {
        let t = table();
        for k in 1..t.s.len() {
            if t.s[k] >= -8.0 && t.s[k] <= 4.0 {
                assert!(t.f1[k] > t.f1[k - 1] && t.f2[k] > t.f2[k - 1]);
            }
        }
    }

    #[test]
    fn known_moments() {
        // the clamped right tail beyond s = 6 costs about 1e-5 in the variance
        let (m1, v1) = LimitLaw::Tw1.moments();
        assert!((m1 + 1.2065335746).abs() < 1e-6, "{m1}");
        assert!((v1 - 1.6077810345).abs() < 3e-5, "{v1}");
        let (m2, v2) = LimitLaw::Tw2.moments();
        assert!((m2 + 1.7710868074).abs() < 1e-6, "{m2}");
        assert!((v2 - 0.8131947928).abs() < 3e-5, "{v2}");
    }

    #[test]
    fn limit_laws() {
        assert_eq!(LimitLaw::Gaussian { variance: 1.0 }.cdf(0.0), 0.5);
        for &s in &[-3.0, -1.2, 0.4] {
            assert_eq!(LimitLaw::Tw1GaussConv { variance: 0.0 }.cdf(s), f1(s));
        }
        let conv = LimitLaw::Tw1GaussConv { variance: 1.0 };
        let mut prev = 0.0;
        for k in 0..200 {
            let v = conv.cdf(-10.0 + 0.08 * k as f64);
            assert!(v >= prev);
            prev = v;
        }
        let (_, var) = conv.moments();
        let (_, v1) = LimitLaw::Tw1.moments();
        assert!((var - v1 - 1.0).abs() < 1e-3);
        assert_eq!(conv.name(), "tw1_gauss_conv");
    }
}

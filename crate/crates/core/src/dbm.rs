//! Matrix Ornstein-Uhlenbeck flow `dh_ij = dB_ij / sqrt(N) - h_ij dt / 2`
//! with no Brownian term on the diagonal.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::edgescale::flow_scaling;
use crate::ensemble::{eigenvalues, sample_deformed, sample_goe_zero_diagonal, EnsembleSpec};
use crate::error::{param, Result};
use crate::linalg::Matrix;
use crate::measure::{Measure, SpectralPoint};
use crate::resolvent::green;
use crate::rng::stream;
use crate::stats::ks_two_sample;

/// `epsilon` in `eta = N^{-2/3 - epsilon}`.
pub const EPSILON: f64 = 0.01;

/// Variance of the noise added by one exact step of length `dt`.
pub fn ou_noise_variance(dt: f64) -> f64 {
    -(-dt).exp_m1()
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub h: Matrix<f64>,
    pub spec: EnsembleSpec,
    /// The potential of the initial matrix.
    pub v: Vec<f64>,
    rng: ChaCha8Rng,
}

impl FlowState {
    /// Samples `H(0)` from the spec; the same stream then drives the flow.
    pub fn new(spec: &EnsembleSpec, mut rng: ChaCha8Rng) -> Result<Self> {
        let (h, v) = sample_deformed(spec, &mut rng)?;
        Ok(FlowState { t: 0.0, h, spec: spec.clone(), v, rng })
    }

    pub fn from_matrix(h: Matrix<f64>, spec: &EnsembleSpec, v: Vec<f64>, rng: ChaCha8Rng) -> Self {
        FlowState { t: 0.0, h, spec: spec.clone(), v, rng }
    }

    /// Exact transition over `dt > 0`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(param("dt", format!("must be finite and > 0, got {dt}")));
        }
        let n = self.h.n();
        let decay = (-dt / 2.0).exp();
        let sd = (ou_noise_variance(dt) / n as f64).sqrt();
        for i in 0..n {
            self.h[(i, i)] *= decay;
            for j in i + 1..n {
                let xi: f64 = self.rng.sample(StandardNormal);
                let x = decay * self.h[(i, j)] + sd * xi;
                self.h[(i, j)] = x;
                self.h[(j, i)] = x;
            }
        }
        self.t += dt;
        Ok(())
    }
}

/// Consuming form of [`FlowState::step`].
pub fn evolve(mut state: FlowState, dt: f64) -> Result<FlowState> {
    state.step(dt)?;
    Ok(state)
}

/// Observables recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub gamma: f64,
    pub l_plus_hat: f64,
    pub z: Complex<f64>,
    /// `m` of `gamma(t) H(t)` at `z`, if requested.
    pub m: Option<Complex<f64>>,
    /// `N^{2/3} (gamma mu_1 - L_plus_hat)`
    pub edge: f64,
}

/// Follows one trajectory and records the edge statistic and, when
/// `with_m`, the Stieltjes transform at `z(t) = L_plus_hat(t) + y + i eta`.
pub fn flow_track(spec: &EnsembleSpec, times: &[f64], y: f64, with_m: bool, rng: ChaCha8Rng) -> Result<Vec<TrackPoint>> {
    let n = spec.n as f64;
    if y.abs() > n.powf(-2.0 / 3.0 + EPSILON) {
        return Err(param("y", "|y| must not exceed N^{-2/3 + epsilon}"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(param("times", "must be nonnegative and strictly increasing"));
    }
    let mut state = FlowState::new(spec, rng)?;
    let nu = Measure::empirical(&state.v)?;
    let eta = n.powf(-2.0 / 3.0 - EPSILON);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > state.t {
            state.step(t - state.t)?;
        }
        let s = flow_scaling(&nu, spec.lambda0, t)?;
        let mut scaled = state.h.clone();
        scaled.scale(s.gamma);
        let z = Complex::new(s.l_plus_hat + y, eta);
        let m = if with_m { Some(green(&scaled, SpectralPoint::new(z.re, z.im))?.m) } else { None };
        let top = eigenvalues(&scaled)?.top();
        out.push(TrackPoint { t, gamma: s.gamma, l_plus_hat: s.l_plus_hat, z, m, edge: n.powf(2.0 / 3.0) * (top - s.l_plus_hat) });
    }
    Ok(out)
}

/// [`flow_track`] with the resolvent observable.
pub fn flow_edge_track(spec: &EnsembleSpec, times: &[f64], y: f64, rng: ChaCha8Rng) -> Result<Vec<TrackPoint>> {
    flow_track(spec, times, y, true, rng)
}

/// Two-sample KS distance between the largest eigenvalue of zero-diagonal GOE
/// matrices and of independent ones evolved for time `t`.
pub fn goe_invariance_check(n: usize, t: f64, n_samples: usize, seed: u64) -> Result<f64> {
    if n_samples == 0 {
        return Err(param("n_samples", "must be >= 1"));
    }
    let spec = EnsembleSpec::new(n, 0.0, crate::ensemble::Potential::Fixed { values: vec![0.0; n] });
    let before: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| Ok(eigenvalues(&sample_goe_zero_diagonal(n, &mut stream(seed, "goe-invariance/before", i))?)?.top()))
        .collect();
    let after: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "goe-invariance/after", i);
            let h = sample_goe_zero_diagonal(n, &mut rng)?;
            let mut state = FlowState::from_matrix(h, &spec, vec![0.0; n], rng);
            if t > 0.0 {
                state.step(t)?;
            }
            Ok(eigenvalues(&state.h)?.top())
        })
        .collect();
    ks_two_sample(&before?, &after?)
}

/// Largest eigenvalues of `evolve(H0, t)` and of independent draws of
/// `sample_interpolated(spec, t)`.
pub fn interpolation_samples(spec: &EnsembleSpec, t: f64, n_samples: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let flowed: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut st = FlowState::new(spec, stream(seed, "interp/flow", i))?;
            if t > 0.0 {
                st.step(t)?;
            }
            Ok(eigenvalues(&st.h)?.top())
        })
        .collect();
    let direct: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| Ok(eigenvalues(&crate::ensemble::sample_interpolated(spec, t, &mut stream(seed, "interp/direct", i))?)?.top()))
        .collect();
    Ok((flowed?, direct?))
}

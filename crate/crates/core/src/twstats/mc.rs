//! Monte Carlo harness for the rescaled largest eigenvalues.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tracy_widom::LimitLaw;
use crate::edgescale::{self, EdgeScaling};
use crate::ensemble::{deform, draw_potential, eigenvalues, sample_wigner, EnsembleSpec, EntryLaw, Potential};
use crate::error::{param, Result};
use crate::freeconv::{edge_root, support_endpoints};
use crate::measure::Measure;
use crate::rng::stream;
use crate::stats::ks_statistic;

/// Output of [`mc_edge`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MCRunResult {
    pub spec: EnsembleSpec,
    pub n_samples: usize,
    pub top_k: usize,
    /// `samples[i][j] = gamma0 N^{2/3} (mu_{j+1} - E_+hat)` for sample `i`.
    pub samples: Vec<Vec<f64>>,
    pub e_plus_hat: Vec<f64>,
    pub gamma0: Vec<f64>,
    /// KS distance of the top-eigenvalue column to `F_1`.
    pub ks: f64,
    pub runtime_s: f64,
}

impl MCRunResult {
    /// Column `j` (0-based) of the samples.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[j]).collect()
    }

    pub fn top(&self) -> Vec<f64> {
        self.column(0)
    }
}

fn scaling_for(v: &[f64], lambda0: f64) -> Result<EdgeScaling<f64>> {
    if lambda0 == 0.0 {
        return edgescale::build(&Measure::dirac(0.0), 0.0);
    }
    edgescale::build(&Measure::empirical(v)?, lambda0)
}

fn edge_sample(spec: &EnsembleSpec, index: u64, top_k: usize, fixed: Option<&EdgeScaling<f64>>) -> Result<(Vec<f64>, f64, f64)> {
    let mut rng = stream(spec.seed, "mc-edge", index);
    let v = draw_potential(spec, &mut rng);
    let owned;
    let sc = match fixed {
        Some(s) => s,
        None => {
            owned = scaling_for(&v, spec.lambda0)?;
            &owned
        }
    };
    let w = sample_wigner(spec.n, spec.entry_law, spec.c2, spec.zero_diagonal, &mut rng)?;
    let mu = eigenvalues(&deform(&w, &v, spec.lambda0))?.eigenvalues;
    let n23 = (spec.n as f64).powf(2.0 / 3.0);
    let row = mu[..top_k].iter().map(|&m| sc.gamma * n23 * (m - sc.e_plus_hat)).collect();
    Ok((row, sc.e_plus_hat, sc.gamma))
}

/// Samples `gamma0 N^{2/3} (mu_j - E_+hat)` for `j <= top_k`, with `gamma0` and
/// `E_+hat` computed from the empirical law of each draw of `V`. Sample `i` uses
/// its own random stream, so the output does not depend on `parallel` or on the
/// number of worker threads.
pub fn mc_edge(spec: &EnsembleSpec, n_samples: usize, top_k: usize, parallel: bool) -> Result<MCRunResult> {
    spec.validate()?;
    if n_samples == 0 {
        return Err(param("n_samples", "must be >= 1"));
    }
    if top_k == 0 || top_k > spec.n {
        return Err(param("top_k", format!("must be in 1..={}", spec.n)));
    }
    let start = Instant::now();
    let fixed = match &spec.potential {
        Potential::Fixed { values } => Some(scaling_for(values, spec.lambda0)?),
        Potential::Iid { .. } if spec.lambda0 == 0.0 => Some(scaling_for(&[], 0.0)?),
        Potential::Iid { .. } => None,
    };
    let run = |i: u64| edge_sample(spec, i, top_k, fixed.as_ref());
    let rows: Result<Vec<_>> = if parallel {
        (0..n_samples as u64).into_par_iter().map(run).collect()
    } else {
        (0..n_samples as u64).map(run).collect()
    };
    let rows = rows?;
    let mut samples = Vec::with_capacity(n_samples);
    let mut e_plus_hat = Vec::with_capacity(n_samples);
    let mut gamma0 = Vec::with_capacity(n_samples);
    for (r, e, g) in rows {
        samples.push(r);
        e_plus_hat.push(e);
        gamma0.push(g);
    }
    let top: Vec<f64> = samples.iter().map(|r| r[0]).collect();
    let ks = ks_statistic(&top, |s| LimitLaw::Tw1.cdf(s))?;
    Ok(MCRunResult {
        spec: spec.clone(),
        n_samples,
        top_k,
        samples,
        e_plus_hat,
        gamma0,
        ks,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Which limit applies to `lambda0 = sigma0 N^{-delta}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `delta > 1/6`: Tracy-Widom.
    TracyWidom,
    /// `delta = 1/6`: Tracy-Widom convolved with a Gaussian.
    Convolution,
    /// `delta < 1/6`: Gaussian at scale `N^{-1/2} lambda0`.
    Gaussian,
}

/// Tolerance for treating `delta` as exactly `1/6`.
pub const CRITICAL_DELTA_TOL: f64 = 1e-5;

impl Regime {
    pub fn classify(delta: f64) -> Self {
        let c = 1.0 / 6.0;
        if (delta - c).abs() <= CRITICAL_DELTA_TOL {
            Regime::Convolution
        } else if delta > c {
            Regime::TracyWidom
        } else {
            Regime::Gaussian
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeConfig {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub entry_law: EntryLaw,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig { n_samples: 1000, seed: 0, entry_law: EntryLaw::Gaussian, parallel: true }
    }
}

/// Result of one matrix size in [`regime_test`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub n: usize,
    pub lambda0: f64,
    pub regime: Regime,
    /// Population upper edge used as the centering.
    pub e_plus: f64,
    pub law: LimitLaw,
    pub ks: f64,
    /// KS distances of the same statistic to the other two candidate laws.
    pub alternatives: Vec<(LimitLaw, f64)>,
    pub samples: Vec<f64>,
}

/// The three candidate laws for the statistic of the given regime.
pub fn candidate_laws(nu: &Measure<f64>, sigma0: f64, lambda0: f64) -> Result<[LimitLaw; 3]> {
    let m2 = nu.central_moment(2)?;
    let gaussian_var = if lambda0 > 0.0 {
        let theta = edge_root(nu, lambda0)?;
        let mfc = nu.integrate(|v| 1.0 / (lambda0 * v - theta));
        (1.0 - mfc * mfc) / (lambda0 * lambda0)
    } else {
        m2
    };
    Ok([
        LimitLaw::Tw1,
        LimitLaw::Tw1GaussConv { variance: sigma0 * sigma0 * m2 },
        LimitLaw::Gaussian { variance: gaussian_var },
    ])
}

/// Runs the largest-eigenvalue statistic of `lambda0 V + W`, `V` iid from `nu`
/// and `lambda0 = sigma0 N^{-delta}`, for each `N`, and compares it with the
/// limit law of the regime selected by `delta`. The statistic is
/// `N^{2/3}(mu_1 - E_+)` unless `delta < 1/6`, where it is
/// `N^{1/2} lambda0^{-1} (mu_1 - E_+)`.
pub fn regime_test(nu: &Measure<f64>, sigma0: f64, delta: f64, ns: &[usize], cfg: &RegimeConfig) -> Result<Vec<RegimeVerdict>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(param("delta", "must be finite and >= 0"));
    }
    if !(sigma0 >= 0.0) || !sigma0.is_finite() {
        return Err(param("sigma0", "must be finite and >= 0"));
    }
    if cfg.n_samples == 0 {
        return Err(param("n_samples", "must be >= 1"));
    }
    let regime = Regime::classify(delta);
    if regime == Regime::Gaussian && sigma0 == 0.0 {
        return Err(param("sigma0", "must be > 0 when delta < 1/6"));
    }
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let lambda0 = sigma0 * (n as f64).powf(-delta);
        let spec = EnsembleSpec::new(n, lambda0, Potential::Iid { measure: nu.clone() })
            .with_law(cfg.entry_law)
            .with_seed(cfg.seed);
        spec.validate()?;
        let e_plus = support_endpoints(nu, lambda0)?.1;
        let scale = match regime {
            Regime::Gaussian => (n as f64).sqrt() / lambda0,
            _ => (n as f64).powf(2.0 / 3.0),
        };
        let run = |i: u64| -> Result<f64> {
            let mut rng = stream(cfg.seed, &format!("regime/{n}"), i);
            let v = draw_potential(&spec, &mut rng);
            let w = sample_wigner(n, spec.entry_law, spec.c2, spec.zero_diagonal, &mut rng)?;
            Ok(scale * (eigenvalues(&deform(&w, &v, lambda0))?.top() - e_plus))
        };
        let samples: Result<Vec<f64>> = if cfg.parallel {
            (0..cfg.n_samples as u64).into_par_iter().map(run).collect()
        } else {
            (0..cfg.n_samples as u64).map(run).collect()
        };
        let samples = samples?;
        let laws = candidate_laws(nu, sigma0, lambda0)?;
        let pick = match regime {
            Regime::TracyWidom => 0,
            Regime::Convolution => 1,
            Regime::Gaussian => 2,
        };
        let mut ks = 0.0;
        let mut alternatives = Vec::with_capacity(2);
        for (j, law) in laws.iter().enumerate() {
            let d = ks_statistic(&samples, |s| law.cdf(s))?;
            if j == pick {
                ks = d;
            } else {
                alternatives.push((*law, d));
            }
        }
        out.push(RegimeVerdict { n, lambda0, regime, e_plus, law: laws[pick], ks, alternatives, samples });
    }
    Ok(out)
}

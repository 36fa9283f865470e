//! Classical eigenvalue locations and rigidity statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edgescale;
use crate::ensemble::{eigenvalues, sample_deformed, EnsembleSpec, Potential};
use crate::error::{param, Error, Result};
use crate::freeconv::{solve_grid, FreeConvolutionSolution, SolveOptions};
use crate::measure::Measure;
use crate::rng::stream;
use crate::stats::{median, quantile};

/// Grid resolution used when the report solves for the density itself.
pub const RIGIDITY_GRID: usize = 4001;
const RIGIDITY_ETA: f64 = 1e-7;

/// Piecewise model of the density on `[lo, hi]`: linear in interior cells and
/// square-root in the two cells touching the support edges.
struct Cumulative {
    x: Vec<f64>,
    rho: Vec<f64>,
    /// Mass of `[x_i, hi]`, normalized to 1 at `x_0`.
    tail: Vec<f64>,
}

fn cell_mass(x: &[f64], rho: &[f64], i: usize) -> f64 {
    let w = x[i + 1] - x[i];
    let last = x.len() - 2;
    if i == 0 && i == last {
        0.5 * (rho[0] + rho[1]) * w
    } else if i == 0 {
        2.0 / 3.0 * rho[1] * w
    } else if i == last {
        2.0 / 3.0 * rho[i] * w
    } else {
        0.5 * (rho[i] + rho[i + 1]) * w
    }
}

impl Cumulative {
    fn new(sol: &FreeConvolutionSolution<f64>) -> Result<Self> {
        let (lo, hi) = sol.support;
        if !(hi > lo) {
            return Err(param("solution", "empty support"));
        }
        let mut x = vec![lo];
        let mut rho = vec![0.0];
        for (&e, &r) in sol.energies.iter().zip(&sol.density) {
            if e > lo && e < hi {
                x.push(e);
                rho.push(r.max(0.0));
            }
        }
        x.push(hi);
        rho.push(0.0);
        if x.len() < 4 {
            return Err(param("solution", "too few grid points inside the support"));
        }
        let peak = rho.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(param("solution", "density vanishes on the support"));
        }
        let interior = &rho[1..rho.len() - 1];
        let cut = 1e-6 * peak;
        let first = interior.iter().position(|&r| r > cut).expect("peak > 0");
        let last = interior.iter().rposition(|&r| r > cut).expect("peak > 0");
        if interior[first..=last].iter().any(|&r| r <= cut) {
            return Err(Error::MultiCut);
        }
        let n = x.len();
        let mut tail = vec![0.0; n];
        for i in (0..n - 1).rev() {
            tail[i] = tail[i + 1] + cell_mass(&x, &rho, i);
        }
        let total = tail[0];
        tail.iter_mut().for_each(|t| *t /= total);
        let rho = rho.into_iter().map(|r| r / total).collect();
        Ok(Cumulative { x, rho, tail })
    }

    /// Point `y` with mass `q` above it.
    fn invert(&self, q: f64) -> f64 {
        let n = self.x.len();
        if q <= 0.0 {
            return self.x[n - 1];
        }
        if q >= 1.0 {
            return self.x[0];
        }
        // tail is decreasing in i; find the cell with tail[i] >= q > tail[i+1]
        let i = self.tail.partition_point(|&t| t >= q).saturating_sub(1).min(n - 2);
        let (a, b) = (self.x[i], self.x[i + 1]);
        let w = b - a;
        // mass of [y, b] that is still needed
        let need = (q - self.tail[i + 1]).max(0.0);
        if i == n - 2 {
            // rho ~ rho_a sqrt((b - y)/w), mass (2/3) rho_a (b - y)^{3/2} / w^{1/2}
            let d = (1.5 * need * w.sqrt() / self.rho[i]).powf(2.0 / 3.0);
            return (b - d).clamp(a, b);
        }
        if i == 0 {
            // rho ~ rho_b sqrt((y - a)/w); mass of [a, y] is cell - need
            let have = (cell_mass(&self.x, &self.rho, 0) - need).max(0.0);
            let d = (1.5 * have * w.sqrt() / self.rho[1]).powf(2.0 / 3.0);
            return (a + d).clamp(a, b);
        }
        // linear density rho(y) = rho_b + s (b - y) with s = (rho_a - rho_b)/w;
        // int_y^b rho = rho_b d + s d^2 / 2 with d = b - y
        let (ra, rb) = (self.rho[i], self.rho[i + 1]);
        let s = (ra - rb) / w;
        let d = if s.abs() < 1e-14 * (ra + rb).max(1e-300) / w {
            need / rb
        } else {
            let disc = (rb * rb + 2.0 * s * need).max(0.0);
            2.0 * need / (rb + disc.sqrt())
        };
        (b - d).clamp(a, b)
    }
}

/// Classical locations `gamma_k` defined by `int_{gamma_k}^inf rho = (k - 1/2)/N`,
/// so `gamma_1` sits just below the upper edge.
pub fn classical_locations(sol: &FreeConvolutionSolution<f64>, n: usize, ks: &[usize]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(param("N", "must be >= 1"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(param("k", format!("{k} is outside 1..={n}")));
    }
    let c = Cumulative::new(sol)?;
    Ok(ks.iter().map(|&k| c.invert((k as f64 - 0.5) / n as f64)).collect())
}

/// Solves for the gamma-rescaled law of `nu` at `lambda` on its support.
pub fn rescaled_solution(nu: &Measure<f64>, lambda: f64, grid: usize) -> Result<(FreeConvolutionSolution<f64>, f64)> {
    let sc = edgescale::build(nu, lambda)?;
    let (lo, hi) = crate::freeconv::support_endpoints(nu, lambda)?;
    let (lo, hi) = (lo * sc.gamma, hi * sc.gamma);
    let sol = solve_grid(nu, lambda, sc.gamma, lo, hi, grid, RIGIDITY_ETA, &SolveOptions::default())?;
    Ok((sol, sc.gamma))
}

/// Per-`k` summary of `N^{2/3} k^{1/3} |gamma mu_k - gamma_k|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigidityReport {
    pub n: usize,
    pub n_samples: usize,
    pub ks: Vec<usize>,
    pub median: Vec<f64>,
    pub p95: Vec<f64>,
    /// `N^{0.2}`
    pub threshold: f64,
    /// Some `k` had a 95th percentile above the threshold.
    pub flagged: bool,
}

fn rigidity_sample(spec: &EnsembleSpec, index: u64, k_max: usize, fixed: Option<&(Vec<f64>, f64)>) -> Result<Vec<f64>> {
    let n = spec.n;
    let mut rng = stream(spec.seed, "rigidity", index);
    let (h, v) = sample_deformed(spec, &mut rng)?;
    let owned;
    let (locs, gamma) = match fixed {
        Some(c) => (&c.0, c.1),
        None => {
            let nu = Measure::empirical(&v)?;
            let (sol, gamma) = rescaled_solution(&nu, spec.lambda0, RIGIDITY_GRID)?;
            owned = classical_locations(&sol, n, &(1..=k_max).collect::<Vec<_>>())?;
            (&owned, gamma)
        }
    };
    let mu = eigenvalues(&h)?.eigenvalues;
    let n23 = (n as f64).powf(2.0 / 3.0);
    Ok((1..=k_max)
        .map(|k| {
            let kh = k.min(n - k) as f64;
            n23 * kh.cbrt() * (gamma * mu[k - 1] - locs[k - 1]).abs()
        })
        .collect())
}

/// Rigidity statistics for the top `k_max` eigenvalues. Classical locations come
/// from the empirical law of each sample's potential (computed once when the
/// potential is fixed).
pub fn rigidity_report(spec: &EnsembleSpec, n_samples: usize, k_max: usize) -> Result<RigidityReport> {
    spec.validate()?;
    if n_samples == 0 {
        return Err(param("n_samples", "must be >= 1"));
    }
    if k_max == 0 || k_max > spec.n / 2 {
        return Err(param("k_max", format!("must be in 1..={}", spec.n / 2)));
    }
    let ks: Vec<usize> = (1..=k_max).collect();
    let fixed = match &spec.potential {
        Potential::Fixed { values } => {
            let nu = Measure::empirical(values)?;
            let (sol, gamma) = rescaled_solution(&nu, spec.lambda0, RIGIDITY_GRID)?;
            Some((classical_locations(&sol, spec.n, &ks)?, gamma))
        }
        Potential::Iid { .. } if spec.lambda0 == 0.0 => {
            let nu = Measure::dirac(0.0);
            let (sol, gamma) = rescaled_solution(&nu, 0.0, RIGIDITY_GRID)?;
            Some((classical_locations(&sol, spec.n, &ks)?, gamma))
        }
        Potential::Iid { .. } => None,
    };
    let rows: Result<Vec<Vec<f64>>> =
        (0..n_samples as u64).into_par_iter().map(|i| rigidity_sample(spec, i, k_max, fixed.as_ref())).collect();
    let rows = rows?;
    let mut med = Vec::with_capacity(k_max);
    let mut p95 = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        med.push(median(&col));
        p95.push(quantile(&col, 0.95));
    }
    let threshold = (spec.n as f64).powf(0.2);
    let flagged = p95.iter().any(|&p| p > threshold);
    Ok(RigidityReport { n: spec.n, n_samples, ks, median: med, p95, threshold, flagged })
}

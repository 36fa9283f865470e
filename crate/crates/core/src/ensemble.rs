//! Wigner and deformed Wigner ensembles.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::measure::Measure;
use crate::rng::fnv1a64;

/// Distribution of the Wigner entries before scaling by `N^{-1/2}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryLaw {
    #[default]
    Gaussian,
    Rademacher,
}

/// The diagonal potential `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Potential {
    /// `v_i` drawn iid from the measure.
    Iid { measure: Measure<f64> },
    /// Deterministic values, one per row.
    Fixed { values: Vec<f64> },
}

impl Potential {
    /// `v_i = +1, -1, +1, ...`
    pub fn alternating(n: usize) -> Self {
        Potential::Fixed { values: (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect() }
    }

    pub fn two_atom() -> Self {
        Potential::Iid { measure: Measure::atomic(vec![(-1.0, 0.5), (1.0, 0.5)]).expect("valid") }
    }
}

fn default_c2() -> f64 {
    1.0
}

/// Recipe for `H = lambda0 V + W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(alias = "N")]
    pub n: usize,
    pub lambda0: f64,
    pub potential: Potential,
    #[serde(default)]
    pub entry_law: EntryLaw,
    /// Diagonal entries of `W` have variance `(1 + c2)/N`.
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default)]
    pub zero_diagonal: bool,
    #[serde(default)]
    pub seed: u64,
}

impl EnsembleSpec {
    /// Gaussian entries with a full GOE diagonal.
    pub fn new(n: usize, lambda0: f64, potential: Potential) -> Self {
        EnsembleSpec { n, lambda0, potential, entry_law: EntryLaw::Gaussian, c2: 1.0, zero_diagonal: false, seed: 0 }
    }

    pub fn with_law(mut self, law: EntryLaw) -> Self {
        self.entry_law = law;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_zero_diagonal(mut self, on: bool) -> Self {
        self.zero_diagonal = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(param("n", "matrix size must be at least 2"));
        }
        if !(self.lambda0 >= 0.0) || !self.lambda0.is_finite() {
            return Err(param("lambda0", "must be finite and >= 0"));
        }
        if !(self.c2 >= -1.0) || !self.c2.is_finite() {
            return Err(param("c2", "must be >= -1"));
        }
        if let Potential::Fixed { values } = &self.potential {
            if values.len() != self.n {
                return Err(param("potential", format!("fixed potential has {} values, expected {}", values.len(), self.n)));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(param("potential", "fixed potential must be finite"));
            }
        }
        Ok(())
    }

    /// Stable hash of the JSON form.
    pub fn hash(&self) -> u64 {
        fnv1a64(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}

/// Eigenvalues `mu_1 >= ... >= mu_N` of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub source_hash: u64,
    pub sample_index: u64,
}

impl Spectrum {
    pub fn top(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn with_source(mut self, hash: u64, index: u64) -> Self {
        self.source_hash = hash;
        self.sample_index = index;
        self
    }
}

fn entry<R: Rng + ?Sized>(law: EntryLaw, rng: &mut R) -> f64 {
    match law {
        EntryLaw::Gaussian => rng.sample(StandardNormal),
        EntryLaw::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Wigner matrix with off-diagonal variance `1/N` and diagonal variance
/// `(1 + c2)/N` (zero if `zero_diagonal`). Entries are drawn row by row over
/// the upper triangle.
pub fn sample_wigner<R: Rng + ?Sized>(n: usize, law: EntryLaw, c2: f64, zero_diagonal: bool, rng: &mut R) -> Result<Matrix<f64>> {
    if n < 2 {
        return Err(param("n", "matrix size must be at least 2"));
    }
    if !(c2 >= -1.0) {
        return Err(param("c2", "must be >= -1"));
    }
    let s = 1.0 / (n as f64).sqrt();
    let sd = ((1.0 + c2) / n as f64).sqrt();
    let mut h = Matrix::zeros(n);
    for i in 0..n {
        let x = entry(law, rng);
        h[(i, i)] = if zero_diagonal { 0.0 } else { sd * x };
        for j in i + 1..n {
            let x = s * entry(law, rng);
            h[(i, j)] = x;
            h[(j, i)] = x;
        }
    }
    Ok(h)
}

/// GOE with the diagonal set to zero, the invariant law of the flow.
pub fn sample_goe_zero_diagonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix<f64>> {
    sample_wigner(n, EntryLaw::Gaussian, -1.0, true, rng)
}

pub fn draw_potential<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Vec<f64> {
    match &spec.potential {
        Potential::Iid { measure } => measure.sample(spec.n, rng),
        Potential::Fixed { values } => values.clone(),
    }
}

/// `lambda0 V + W` for given `V` and `W`.
pub fn deform(w: &Matrix<f64>, v: &[f64], lambda0: f64) -> Matrix<f64> {
    let mut h = w.clone();
    for (i, vi) in v.iter().enumerate() {
        h[(i, i)] += lambda0 * vi;
    }
    h
}

/// One draw of `H = lambda0 V + W`; `V` is drawn before `W`.
pub fn sample_deformed<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<(Matrix<f64>, Vec<f64>)> {
    spec.validate()?;
    let v = draw_potential(spec, rng);
    let w = sample_wigner(spec.n, spec.entry_law, spec.c2, spec.zero_diagonal, rng)?;
    Ok((deform(&w, &v, spec.lambda0), v))
}

/// Full spectrum in descending order.
pub fn eigenvalues(h: &Matrix<f64>) -> Result<Spectrum> {
    let asym = h.max_asymmetry();
    if asym > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut ev = symmetric_eigenvalues(h)?;
    ev.reverse();
    Ok(Spectrum { eigenvalues: ev, source_hash: 0, sample_index: 0 })
}

/// One draw of `lambda0 e^{-t/2} V + e^{-t/2} W + (1 - e^{-t})^{1/2} W_goe`
/// with `W_goe` zero on the diagonal.
pub fn sample_interpolated<R: Rng + ?Sized>(spec: &EnsembleSpec, t: f64, rng: &mut R) -> Result<Matrix<f64>> {
    if !(t >= 0.0) {
        return Err(param("t", "must be >= 0"));
    }
    let (mut h, _) = sample_deformed(spec, rng)?;
    h.scale((-t / 2.0).exp());
    let g = sample_goe_zero_diagonal(spec.n, rng)?;
    h.axpy((1.0 - (-t).exp()).sqrt(), &g);
    Ok(h)
}

/// Writes spectra as CSV rows `sample_index,k,mu_k` (k starting at 1).
pub fn write_spectra_csv<W: Write>(mut out: W, spectra: &[Spectrum]) -> std::io::Result<()> {
    writeln!(out, "sample_index,k,mu")?;
    for s in spectra {
        for (k, mu) in s.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{},{:.17e}", s.sample_index, k + 1, mu)?;
        }
    }
    Ok(())
}

const MAGIC: &[u8; 4] = b"DWSP";
const BINARY_VERSION: u32 = 1;

/// Binary column format, little endian: magic `DWSP`, `u32` version, `u64` N,
/// `u64` count, then per spectrum a `u64` sample index followed by N `f64`.
pub fn write_spectra_binary<W: Write>(mut out: W, spectra: &[Spectrum]) -> std::io::Result<()> {
    let n = spectra.first().map_or(0, |s| s.eigenvalues.len());
    if spectra.iter().any(|s| s.eigenvalues.len() != n) {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "spectra of different sizes"));
    }
    out.write_all(MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(n as u64).to_le_bytes())?;
    out.write_all(&(spectra.len() as u64).to_le_bytes())?;
    for s in spectra {
        out.write_all(&s.sample_index.to_le_bytes())?;
        for mu in &s.eigenvalues {
            out.write_all(&mu.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_spectra_binary<R: Read>(mut input: R) -> std::io::Result<Vec<Spectrum>> {
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a spectra file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != BINARY_VERSION {
        return Err(bad("unsupported spectra file version"));
    }
    input.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut b8)?;
        let sample_index = u64::from_le_bytes(b8);
        let mut ev = Vec::with_capacity(n);
        for _ in 0..n {
            input.read_exact(&mut b8)?;
            ev.push(f64::from_le_bytes(b8));
        }
        out.push(Spectrum { eigenvalues: ev, source_hash: 0, sample_index });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_spectra() {
        let d = Matrix::diagonal(&[3.0, 1.0, 2.0]);
        assert_eq!(eigenvalues(&d).unwrap().eigenvalues, vec![3.0, 2.0, 1.0]);
        let m = Matrix::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let ev = eigenvalues(&m).unwrap().eigenvalues;
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[1], -1.0, epsilon = 1e-15);
        let bad = Matrix::from_row_major(2, vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(eigenvalues(&bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn wigner_is_reproducible_and_symmetric() {
        let a = sample_wigner(2, EntryLaw::Gaussian, 1.0, false, &mut stream(1, "w", 0)).unwrap();
        let b = sample_wigner(2, EntryLaw::Gaussian, 1.0, false, &mut stream(1, "w", 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[(0, 1)], a[(1, 0)]);
    }

    #[test]
    fn wigner_moments() {
        let n = 400;
        let h = sample_wigner(n, EntryLaw::Gaussian, 1.0, false, &mut stream(2, "w", 0)).unwrap();
        let off: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| h[(i, j)]).collect();
        let m = off.iter().sum::<f64>() / off.len() as f64;
        let var = off.iter().map(|x| x * x).sum::<f64>() / off.len() as f64;
        assert!(m.abs() < 4.0 / ((n * n) as f64 / 2.0 * n as f64).sqrt());
        assert!((var * n as f64 - 1.0).abs() < 0.05);
        let r = sample_wigner(50, EntryLaw::Rademacher, 0.0, false, &mut stream(2, "w", 1)).unwrap();
        assert!(r.as_slice().iter().all(|x| (x.abs() - 1.0 / 50f64.sqrt()).abs() < 1e-15));
        let z = sample_wigner(50, EntryLaw::Rademacher, 1.0, true, &mut stream(2, "w", 1)).unwrap();
        assert!((0..50).all(|i| z[(i, i)] == 0.0));
    }

    #[test]
    fn goe_edge_near_two() {
        let n = 1000;
        let mean: f64 = (0..20)
            .map(|s| eigenvalues(&sample_wigner(n, EntryLaw::Gaussian, 1.0, false, &mut stream(3, "goe", s)).unwrap()).unwrap().top())
            .sum::<f64>()
            / 20.0;
        assert!((mean / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let n = 60;
        let c = 0.7;
        let spec = EnsembleSpec::new(n, 0.4, Potential::Fixed { values: vec![c; n] });
        let (h, v) = sample_deformed(&spec, &mut stream(4, "d", 0)).unwrap();
        assert_eq!(v, vec![c; n]);
        let mut rng = stream(4, "d", 0);
        let w = sample_wigner(n, EntryLaw::Gaussian, 1.0, false, &mut rng).unwrap();
        let a = eigenvalues(&h).unwrap().eigenvalues;
        let b = eigenvalues(&w).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, y + 0.4 * c, epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_and_frobenius_invariants() {
        let spec = EnsembleSpec::new(120, 0.5, Potential::two_atom());
        let (h, _) = sample_deformed(&spec, &mut stream(5, "d", 0)).unwrap();
        let ev = eigenvalues(&h).unwrap().eigenvalues;
        let tr: f64 = (0..120).map(|i| h[(i, i)]).sum();
        let fro: f64 = h.as_slice().iter().map(|x| x * x).sum();
        assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-8 * 120.0);
        assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro).abs() < 1e-8 * 120.0);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = EnsembleSpec::new(10, 0.5, Potential::two_atom()).with_law(EntryLaw::Rademacher).with_seed(9);
        let s = serde_json::to_string(&spec).unwrap();
        let back: EnsembleSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
        let parsed: EnsembleSpec = serde_json::from_str(r#"{"N":4,"lambda0":0,"potential":{"kind":"fixed","values":[0,0,0,0]}}"#).unwrap();
        assert_eq!(parsed.c2, 1.0);
        assert!(!parsed.zero_diagonal);
        let wrong = EnsembleSpec::new(3, 0.0, Potential::Fixed { values: vec![1.0] });
        assert!(wrong.validate().is_err());
    }

    #[test]
    fn binary_round_trip() {
        let spectra = vec![
            Spectrum { eigenvalues: vec![1.5, -0.25], source_hash: 0, sample_index: 0 },
            Spectrum { eigenvalues: vec![2.0, 1.0], source_hash: 0, sample_index: 7 },
        ];
        let mut buf = Vec::new();
        write_spectra_binary(&mut buf, &spectra).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 2 * (8 + 16));
        assert_eq!(read_spectra_binary(&buf[..]).unwrap(), spectra);
    }
}

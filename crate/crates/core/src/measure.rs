//! Probability measures on the real line and their Stieltjes transforms.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::quadrature::gauss_jacobi;
use crate::scalar::Scalar;

/// Number of Gauss-Jacobi nodes used to integrate against a Jacobi density.
pub const JACOBI_NODES: usize = 160;

/// Locations closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;

/// A point `E + i eta` of the upper half plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> SpectralPoint<T> {
    pub fn new(re: T, im: T) -> Self {
        SpectralPoint { re, im }
    }

    pub fn z(&self) -> Complex<T> {
        Complex::new(self.re, self.im)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind<T> {
    Atomic,
    Grid { lo: T, hi: T, values: Vec<T> },
    Jacobi { a: T, b: T },
}

/// A probability measure: finitely many atoms, a density tabulated on a uniform
/// grid, or a centered Jacobi density on `[-1, 1]`.
///
/// Integrals are evaluated through a fixed node/weight discretization: the
/// atoms themselves, the trapezoid rule, or a Gauss-Jacobi rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr<T>", into = "MeasureRepr<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Measure<T> {
    kind: Kind<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum MeasureRepr<T> {
    Atomic { atoms: Vec<(T, T)> },
    Grid { lo: T, hi: T, values: Vec<T> },
    Jacobi { a: T, b: T },
}

impl<T: Scalar> TryFrom<MeasureRepr<T>> for Measure<T> {
    type Error = Error;
    fn try_from(r: MeasureRepr<T>) -> Result<Self> {
        match r {
            MeasureRepr::Atomic { atoms } => Measure::atomic(atoms),
            MeasureRepr::Grid { lo, hi, values } => Measure::grid(lo, hi, values),
            MeasureRepr::Jacobi { a, b } => Measure::jacobi(a, b),
        }
    }
}

impl<T: Scalar> From<Measure<T>> for MeasureRepr<T> {
    fn from(m: Measure<T>) -> Self {
        match m.kind {
            Kind::Atomic => MeasureRepr::Atomic { atoms: m.nodes.into_iter().zip(m.weights).collect() },
            Kind::Grid { lo, hi, values } => MeasureRepr::Grid { lo, hi, values },
            Kind::Jacobi { a, b } => MeasureRepr::Jacobi { a, b },
        }
    }
}

impl<T: Scalar> Measure<T> {
    /// Atomic measure from `(location, weight)` pairs. Atoms are sorted and
    /// locations within `MERGE_TOL` merged.
    pub fn atomic(atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("atomic measure needs at least one atom".into()));
        }
        let mut atoms = atoms;
        for &(x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::InvalidMeasure("non-finite atom".into()));
            }
            if w < T::zero() {
                return Err(Error::InvalidMeasure(format!("negative weight {w}")));
            }
        }
        let total: T = atoms.iter().map(|a| a.1).sum();
        if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let tol = T::lit(MERGE_TOL);
        let mut nodes: Vec<T> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<T> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match nodes.last() {
                Some(&last) if (x - last).abs() <= tol => *weights.last_mut().expect("paired") += w,
                _ => {
                    nodes.push(x);
                    weights.push(w);
                }
            }
        }
        Ok(Measure { kind: Kind::Atomic, nodes, weights })
    }

    /// Point mass at `c`.
    pub fn dirac(c: T) -> Self {
        Measure { kind: Kind::Atomic, nodes: vec![c], weights: vec![T::one()] }
    }

    /// Empirical measure of the values, duplicates merged.
    pub fn empirical(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidMeasure("empirical measure of an empty list".into()));
        }
        let w = T::one() / T::of_usize(values.len());
        let mut sorted: Vec<T> = values.to_vec();
        if sorted.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite value".into()));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let tol = T::lit(MERGE_TOL);
        let mut nodes: Vec<T> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in sorted {
            match nodes.last() {
                Some(&last) if (x - last).abs() <= tol => *counts.last_mut().expect("paired") += 1,
                _ => {
                    nodes.push(x);
                    counts.push(1);
                }
            }
        }
        let weights = counts.into_iter().map(|c| T::of_usize(c) * w).collect();
        Ok(Measure { kind: Kind::Atomic, nodes, weights })
    }

    /// Density tabulated at `values.len()` equispaced points of `[lo, hi]`.
    /// The trapezoid integral must equal one within 1e-8.
    pub fn grid(lo: T, hi: T, values: Vec<T>) -> Result<Self> {
        let m = Self::grid_unchecked(lo, hi, values)?;
        let mass: T = m.weights.iter().copied().sum();
        if (mass - T::one()).abs() > T::lit(1e-8).max(T::epsilon() * T::lit(1e3)) {
            return Err(Error::InvalidMeasure(format!("grid density integrates to {mass}, expected 1")));
        }
        Ok(m)
    }

    /// Like [`Measure::grid`] but rescales the values to unit mass.
    pub fn grid_normalized(lo: T, hi: T, values: Vec<T>) -> Result<Self> {
        let m = Self::grid_unchecked(lo, hi, values)?;
        let mass: T = m.weights.iter().copied().sum();
        if mass <= T::zero() {
            return Err(Error::InvalidMeasure("grid density has zero mass".into()));
        }
        let Kind::Grid { values, .. } = m.kind else { unreachable!() };
        Self::grid_unchecked(lo, hi, values.into_iter().map(|v| v / mass).collect())
    }

    fn grid_unchecked(lo: T, hi: T, values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidMeasure("grid density needs at least two values".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidMeasure("grid requires finite lo < hi".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidMeasure("grid density values must be finite and nonnegative".into()));
        }
        let n = values.len();
        let h = (hi - lo) / T::of_usize(n - 1);
        let nodes = (0..n).map(|k| lo + h * T::of_usize(k)).collect();
        let half = T::lit(0.5);
        let weights = values
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == 0 || k == n - 1 { half * h * v } else { h * v })
            .collect();
        Ok(Measure { kind: Kind::Grid { lo, hi, values }, nodes, weights })
    }

    /// Density proportional to `(1+v)^a (1-v)^b` on `[-1, 1]`.
    pub fn jacobi(a: T, b: T) -> Result<Self> {
        if !(a > -T::one() && b > -T::one()) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidMeasure(format!("Jacobi exponents must be finite and > -1, got a={a}, b={b}")));
        }
        let rule = gauss_jacobi(JACOBI_NODES, a, b)?;
        Ok(Measure { kind: Kind::Jacobi { a, b }, nodes: rule.nodes, weights: rule.weights })
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, Kind::Atomic)
    }

    /// Atoms as `(location, weight)`; for densities, the quadrature nodes.
    pub fn nodes(&self) -> impl ExactSizeIterator<Item = (T, T)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Smallest and largest point of the support.
    pub fn support(&self) -> (T, T) {
        match &self.kind {
            Kind::Atomic => (self.nodes[0], *self.nodes.last().expect("nonempty")),
            Kind::Grid { lo, hi, .. } => (*lo, *hi),
            Kind::Jacobi { .. } => (-T::one(), T::one()),
        }
    }

    /// `int f dnu`
    #[inline]
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        let mut s = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += *w * f(*x);
        }
        s
    }

    #[inline]
    pub fn integrate_complex(&self, mut f: impl FnMut(T) -> Complex<T>) -> Complex<T> {
        let mut s = Complex::new(T::zero(), T::zero());
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += f(*x) * *w;
        }
        s
    }

    /// Stieltjes transform `int dnu(v)/(v - z)`.
    pub fn stieltjes(&self, z: SpectralPoint<T>) -> Result<Complex<T>> {
        if !(z.im > T::zero()) {
            return Err(param("z.im", format!("Stieltjes transform needs im z > 0, got {}", z.im)));
        }
        let z = z.z();
        Ok(self.integrate_complex(|v| (Complex::new(v, T::zero()) - z).inv()))
    }

    pub fn mean(&self) -> T {
        self.integrate(|v| v)
    }

    /// `k`-th central moment, `k <= 8`.
    pub fn central_moment(&self, k: u32) -> Result<T> {
        if k > 8 {
            return Err(param("k", "central moments are supported up to order 8"));
        }
        let mu = self.mean();
        Ok(self.integrate(|v| (v - mu).powi(k as i32)))
    }

    /// Image under `v -> -v`.
    pub fn reflected(&self) -> Self {
        let kind = match &self.kind {
            Kind::Atomic => Kind::Atomic,
            Kind::Grid { lo, hi, values } => Kind::Grid { lo: -*hi, hi: -*lo, values: values.iter().rev().copied().collect() },
            Kind::Jacobi { a, b } => Kind::Jacobi { a: *b, b: *a },
        };
        let mut pairs: Vec<(T, T)> = self.nodes().map(|(x, w)| (-x, w)).collect();
        pairs.reverse();
        Measure { kind, nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
    }

    /// `inf_x int dnu(v)/(v - x)^2` over the convex hull of the support.
    ///
    /// For densities the integral is infinite wherever the density is positive,
    /// so only the endpoints can be finite; atomic measures are scanned on a
    /// uniform grid of `grid` points.
    pub fn inf_inverse_square_distance(&self, grid: usize) -> T {
        let inf = T::infinity();
        match &self.kind {
            Kind::Atomic => {
                if self.nodes.len() == 1 {
                    return inf;
                }
                let (lo, hi) = self.support();
                let grid = grid.max(2);
                let h = (hi - lo) / T::of_usize(grid - 1);
                let mut best = inf;
                for k in 0..grid {
                    let x = lo + h * T::of_usize(k);
                    let mut s = T::zero();
                    let mut hit = false;
                    for (v, w) in self.nodes() {
                        let d = v - x;
                        if d.abs() <= T::epsilon() * (T::one() + x.abs()) {
                            hit = true;
                            break;
                        }
                        s += w / (d * d);
                    }
                    if !hit {
                        best = best.min(s);
                    }
                }
                best
            }
            Kind::Jacobi { a, b } => {
                let one = T::one();
                let at = |e: T, o: T| {
                    // endpoint with exponent e, other exponent o
                    if e <= one {
                        inf
                    } else {
                        (e + o + one) * (e + o) / (T::lit(4.0) * e * (e - one))
                    }
                };
                at(*a, *b).min(at(*b, *a))
            }
            Kind::Grid { values, .. } => {
                let n = values.len();
                let mut best = inf;
                for &(end, skip) in &[(0usize, 0usize), (n - 1, n - 1)] {
                    if values[end] > T::zero() {
                        continue;
                    }
                    let x = self.nodes[end];
                    let s = self
                        .nodes()
                        .enumerate()
                        .filter(|(k, _)| *k != skip)
                        .map(|(_, (v, w))| w / ((v - x) * (v - x)))
                        .sum::<T>();
                    best = best.min(s);
                }
                best
            }
        }
    }

    /// Independent draws from the measure.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        match &self.kind {
            Kind::Atomic => {
                let mut cdf = Vec::with_capacity(self.weights.len());
                let mut acc = 0.0;
                for w in &self.weights {
                    acc += w.to_f64_lossy();
                    cdf.push(acc);
                }
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() * acc;
                        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                        self.nodes[k]
                    })
                    .collect()
            }
            Kind::Jacobi { a, b } => {
                let dist = Beta::new(a.to_f64_lossy() + 1.0, b.to_f64_lossy() + 1.0).expect("validated exponents");
                (0..n).map(|_| T::lit(2.0 * dist.sample(rng) - 1.0)).collect()
            }
            Kind::Grid { lo, hi, values } => {
                let vals: Vec<f64> = values.iter().map(|v| v.to_f64_lossy()).collect();
                let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
                let h = (hi - lo) / (vals.len() - 1) as f64;
                let mut cdf = Vec::with_capacity(vals.len() - 1);
                let mut acc = 0.0;
                for k in 0..vals.len() - 1 {
                    acc += 0.5 * h * (vals[k] + vals[k + 1]);
                    cdf.push(acc);
                }
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() * acc;
                        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                        let before = if k == 0 { 0.0 } else { cdf[k - 1] };
                        let r = u - before;
                        let (f0, f1) = (vals[k], vals[k + 1]);
                        let slope = (f1 - f0) / h;
                        let x = if slope.abs() < 1e-14 * (1.0 + f0.abs()) {
                            if f0 > 0.0 {
                                r / f0
                            } else {
                                0.5 * h
                            }
                        } else {
                            // solve f0 x + slope x^2 / 2 = r
                            (-f0 + (f0 * f0 + 2.0 * slope * r).max(0.0).sqrt()) / slope
                        };
                        T::lit(lo + h * k as f64 + x.clamp(0.0, h))
                    })
                    .collect()
            }
        }
    }
}

impl<T: Scalar> std::str::FromStr for Measure<T>
where
    T: for<'de> Deserialize<'de>,
{
    type Err = serde_json::Error;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        serde_json::from_str(s)
    }
}

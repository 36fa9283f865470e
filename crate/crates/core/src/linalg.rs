//! Dense linear algebra: symmetric eigenvalues and complex-symmetric inversion.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![T::default(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    /// Builds a matrix from row-major data of length `n * n`.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Invalid(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(Matrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Principal submatrix on the given (sorted, distinct) indices.
    pub fn principal(&self, keep: &[usize]) -> Self {
        Matrix::from_fn(keep.len(), |a, b| self[(keep[a], keep[b])])
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diagonal(d: &[T]) -> Self {
        Matrix::from_fn(d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: T, other: &Matrix<T>) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * *b;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// Spectral norm bound used for relative tolerances (max row sum).
    pub fn inf_norm(&self) -> T {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix<T>,
}

/// Eigenvalues of a symmetric matrix in ascending order.
///
/// Only the lower triangle is trusted to be consistent with the upper one; callers
/// check symmetry beforehand when the input is untrusted.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    let mut work = a.clone();
    let (mut d, mut e, _) = tridiagonalize(&mut work, false);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(d)
}

pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    let n = a.n();
    let mut work = a.clone();
    let (mut d, mut e, q) = tridiagonalize(&mut work, true);
    let mut z = q.expect("accumulated");
    tridiagonal_ql(&mut d, &mut e, Some((&mut z.data, n)))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, |r, c| z[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `off` (length `d.len() - 1`), together with the first component
/// of each normalized eigenvector. Sorted ascending.
pub fn tridiagonal_eigen_first<T: Scalar>(d: &[T], off: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = d.len();
    let mut dd = d.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut first = vec![T::zero(); n];
    if n > 0 {
        first[0] = T::one();
    }
    tridiagonal_ql(&mut dd, &mut e, Some((&mut first, n)))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dd[i].partial_cmp(&dd[j]).unwrap_or(std::cmp::Ordering::Equal));
    Ok((order.iter().map(|&i| dd[i]).collect(), order.iter().map(|&i| first[i]).collect()))
}

/// Householder vector for `x`: returns `(alpha, v, beta)` with
/// `(I - beta v v^T) x = alpha e_1`, or `None` if `x = 0`.
fn reflector<T: Scalar>(x: Vec<T>) -> Option<(T, Vec<T>, T)> {
    let norm = x.iter().fold(T::zero(), |s, v| s.hypot(*v));
    if norm == T::zero() {
        return None;
    }
    let alpha = if x[0] > T::zero() { -norm } else { norm };
    let mut v = x;
    v[0] -= alpha;
    let beta = T::lit(2.0) / dot(&v, &v);
    Some((alpha, v, beta))
}

/// `beta * B v` for the trailing block starting at `k0`, lower storage.
fn block_matvec<T: Scalar>(a: &Matrix<T>, k0: usize, v: &[T], beta: T) -> Vec<T> {
    let m = v.len();
    let mut p = vec![T::zero(); m];
    for i in 0..m {
        let row = &a.row(k0 + i)[k0..k0 + 1 + i];
        let vi = v[i];
        let mut acc = T::zero();
        for j in 0..i {
            acc += row[j] * v[j];
            p[j] += row[j] * vi;
        }
        p[i] += acc + row[i] * vi;
    }
    p.iter_mut().for_each(|x| *x *= beta);
    p
}

/// `row -= vi w + wi v`, then `p2 += vi2 row` and returns `row . v2` with the
/// last entry of `row` excluded from the dot product and counted once in `p2`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn update_and_dot<T: Scalar>(row: &mut [T], v: &[T], w: &[T], vi: T, wi: T, v2: &[T], p2: &mut [T], vi2: T) -> T {
    let len = row.len();
    let mut acc = [T::zero(); 4];
    let body = len - 1;
    let (head, last) = row.split_at_mut(body);
    let chunks = body / 4 * 4;
    for c in (0..chunks).step_by(4) {
        let r = &mut head[c..c + 4];
        let (vv, ww, v2c) = (&v[c..c + 4], &w[c..c + 4], &v2[c..c + 4]);
        let pp = &mut p2[c..c + 4];
        for l in 0..4 {
            let x = r[l] - (vi * ww[l] + wi * vv[l]);
            r[l] = x;
            acc[l] += x * v2c[l];
            pp[l] += x * vi2;
        }
    }
    for j in chunks..body {
        let x = head[j] - (vi * w[j] + wi * v[j]);
        head[j] = x;
        acc[0] += x * v2[j];
        p2[j] += x * vi2;
    }
    let x = last[0] - (vi * w[body] + wi * v[body]);
    last[0] = x;
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + x * vi2
}

/// Householder reduction to tridiagonal form. Returns the diagonal, the
/// off-diagonal (`e[k]` couples `k` and `k+1`, last entry zero) and optionally
/// the orthogonal factor `Q` with `A = Q T Q^T`.
///
/// Only the lower triangle is read and updated. Each step applies the rank-2
/// update and forms the next matrix-vector product in the same sweep.
fn tridiagonalize<T: Scalar>(a: &mut Matrix<T>, want_q: bool) -> (Vec<T>, Vec<T>, Option<Matrix<T>>) {
    let n = a.n();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let mut reflectors: Vec<(usize, T, Vec<T>)> = Vec::new();
    let half = T::lit(0.5);
    // Some(None): the column below the diagonal is already zero
    let mut pending: Option<Option<(Vec<T>, T, Vec<T>)>> = None;

    for k in 0..n.saturating_sub(2) {
        d[k] = a[(k, k)];
        let m = n - k - 1;
        let step = match pending.take() {
            Some(s) => s,
            None => reflector((k + 1..n).map(|i| a[(i, k)]).collect()).map(|(alpha, v, beta)| {
                e[k] = alpha;
                let p = block_matvec(a, k + 1, &v, beta);
                (v, beta, p)
            }),
        };
        let Some((v, beta, mut w)) = step else {
            e[k] = T::zero();
            continue;
        };
        let kk = half * beta * dot(&w, &v);
        for i in 0..m {
            w[i] -= kk * v[i];
        }
        // first column of the block, which yields the next reflector
        for i in 0..m {
            let r = k + 1 + i;
            let upd = v[i] * w[0] + w[i] * v[0];
            a.data[r * n + k + 1] -= upd;
        }
        let next = if k + 3 <= n - 1 {
            let x: Vec<T> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            Some(reflector(x))
        } else {
            None
        };
        let mut nv: Option<(&[T], Vec<T>)> = match &next {
            Some(Some((alpha, v2, _))) => {
                e[k + 1] = *alpha;
                Some((v2.as_slice(), vec![T::zero(); m - 1]))
            }
            _ => None,
        };
        for i in 1..m {
            let vi = v[i];
            let wi = w[i];
            let r = k + 1 + i;
            let row = &mut a.data[r * n + k + 2..r * n + k + 2 + i];
            match nv.as_mut() {
                Some((v2, p2)) => {
                    let vi2 = v2[i - 1];
                    let acc = update_and_dot(row, &v[1..=i], &w[1..=i], vi, wi, &v2[..i], &mut p2[..i], vi2);
                    p2[i - 1] += acc;
                }
                None => {
                    for ((x, vj), wj) in row.iter_mut().zip(&v[1..=i]).zip(&w[1..=i]) {
                        *x -= vi * *wj + wi * *vj;
                    }
                }
            }
        }
        let p2 = nv.map(|(_, p2)| p2);
        pending = match next {
            Some(Some((_, v2, beta2))) => {
                let mut p2 = p2.expect("formed with v2");
                p2.iter_mut().for_each(|x| *x *= beta2);
                Some(Some((v2, beta2, p2)))
            }
            Some(None) => Some(None),
            None => None,
        };
        if want_q {
            reflectors.push((k, beta, v));
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        d[n - 1] = a[(n - 1, n - 1)];
        e[n - 2] = a[(n - 1, n - 2)];
    } else if n == 1 {
        d[0] = a[(0, 0)];
    }

    let q = if want_q {
        let mut q = Matrix::identity(n);
        let mut tmp = vec![T::zero(); n];
        for (k, beta, v) in reflectors.iter().rev() {
            // rows k+1.. of Q -= beta v (v^T Q[k+1.., :])
            tmp.iter_mut().for_each(|t| *t = T::zero());
            for (i, vi) in v.iter().enumerate() {
                let row = q.row(k + 1 + i);
                for j in 0..n {
                    tmp[j] += *vi * row[j];
                }
            }
            for (i, vi) in v.iter().enumerate() {
                let s = *beta * *vi;
                let row = q.row_mut(k + 1 + i);
                for j in 0..n {
                    row[j] -= s * tmp[j];
                }
            }
        }
        Some(q)
    } else {
        None
    };
    (d, e, q)
}

/// Implicit QL iteration with Wilkinson-type shifts on a symmetric tridiagonal
/// matrix. `e[i]` couples `i` and `i+1`. When `z = Some((rows, n))` is given,
/// the plane rotations are applied to the columns of the `rows x n` row-major
/// block `rows`.
fn tridiagonal_ql<T: Scalar>(d: &mut [T], e: &mut [T], mut z: Option<(&mut [T], usize)>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let sgn = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sgn);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some((ref mut zz, cols)) = z {
                    let rows = zz.len() / cols;
                    for k in 0..rows {
                        let base = k * cols;
                        let f = zz[base + i + 1];
                        zz[base + i + 1] = s * zz[base + i] + c * f;
                        zz[base + i] = c * zz[base + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Square complex matrix, row-major.
pub type CMatrix<T> = Matrix<Complex<T>>;

impl<T: Scalar> Matrix<Complex<T>> {
    pub fn c_identity(n: usize) -> Self {
        Matrix::from_fn(n, |i, j| if i == j { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) })
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.n).map(|i| self[(i, i)]).fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }
}

/// Inverse of the complex symmetric matrix `A - z I` for real symmetric `A`
/// and `im z != 0`, via an unpivoted `L D L^T` factorization.
///
/// Every leading principal block of `A - z I` has a nonzero imaginary part on
/// its numerical range, so no pivot vanishes.
pub fn shifted_inverse<T: Scalar>(a: &Matrix<T>, z: Complex<T>) -> Result<CMatrix<T>> {
    let n = a.n();
    let zero = Complex::new(T::zero(), T::zero());
    // lower triangle of L stored row-major, unit diagonal implied
    let mut l = CMatrix::<T>::zeros(n);
    let mut d = vec![zero; n];
    let mut w = vec![zero; n];
    for j in 0..n {
        {
            let lj = l.row(j);
            let mut acc = zero;
            for k in 0..j {
                w[k] = lj[k] * d[k];
                acc += lj[k] * w[k];
            }
            d[j] = Complex::new(a[(j, j)], T::zero()) - z - acc;
        }
        if d[j].norm() == T::zero() || !d[j].re.is_finite() {
            return Err(Error::Singular(j));
        }
        let inv = d[j].inv();
        for i in j + 1..n {
            let li = &l.row(i)[..j];
            let mut acc = Complex::new(a[(i, j)], T::zero());
            for k in 0..j {
                acc -= li[k] * w[k];
            }
            l[(i, j)] = acc * inv;
        }
    }
    // X = L^{-1}, unit lower triangular
    let mut x = CMatrix::<T>::zeros(n);
    for i in 0..n {
        x[(i, i)] = Complex::new(T::one(), T::zero());
        for k in 0..i {
            let lik = l[(i, k)];
            if lik == zero {
                continue;
            }
            let (head, tail) = x.data.split_at_mut(i * n);
            let xk = &head[k * n..k * n + k + 1];
            let xi = &mut tail[..k + 1];
            for c in 0..=k {
                xi[c] -= lik * xk[c];
            }
        }
    }
    // G = X^T D^{-1} X, accumulated on the lower triangle
    let mut g = CMatrix::<T>::zeros(n);
    let mut s = vec![zero; n];
    for k in 0..n {
        let xk = &x.row(k)[..=k];
        let dinv = d[k].inv();
        for c in 0..=k {
            s[c] = xk[c] * dinv;
        }
        for i in 0..=k {
            let xi = xk[i];
            let row = &mut g.row_mut(i)[..=i];
            for c in 0..=i {
                row[c] += xi * s[c];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_matrix(n: usize) -> Matrix<f64> {
        let mut m = Matrix::from_fn(n, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            ((a * 1.3 + b * 0.7).sin() + 0.1 * (a * b).cos()) / (1.0 + (a - b).abs())
        });
        m[(0, 0)] += 2.0;
        m
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = Matrix::diagonal(&[3.0, -1.0, 2.0]);
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert_eq!(ev, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn tridiagonal_toeplitz_has_known_spectrum() {
        let n = 40;
        let m = Matrix::from_fn(n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
        let ev = symmetric_eigenvalues(&m).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 * (std::f64::consts::PI * (n - k) as f64 / (n + 1) as f64).cos();
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenpairs_have_small_backward_error() {
        let a = test_matrix(37);
        let eig = symmetric_eigen(&a).unwrap();
        let norm = a.inf_norm();
        for c in 0..37 {
            let x: Vec<f64> = (0..37).map(|r| eig.vectors[(r, c)]).collect();
            let ax = a.matvec(&x);
            let res = ax.iter().zip(&x).map(|(y, xi)| (y - eig.values[c] * xi).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-12 * norm, "residual {res}");
            let nx = x.iter().map(|v| v * v).sum::<f64>();
            assert_abs_diff_eq!(nx, 1.0, epsilon = 1e-12);
        }
        let trace: f64 = (0..37).map(|i| a[(i, i)]).sum();
        assert_abs_diff_eq!(eig.values.iter().sum::<f64>(), trace, epsilon = 1e-10);
    }

    #[test]
    fn f32_eigenvalues_agree_with_f64() {
        let a = test_matrix(12);
        let a32 = Matrix::from_fn(12, |i, j| a[(i, j)] as f32);
        let e64 = symmetric_eigenvalues(&a).unwrap();
        let e32 = symmetric_eigenvalues(&a32).unwrap();
        for (x, y) in e64.iter().zip(&e32) {
            assert!((x - *y as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn shifted_inverse_is_inverse() {
        let n = 30;
        let a = test_matrix(n);
        let z = Complex::new(0.3, 0.01);
        let g = shifted_inverse(&a, z).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex::new(0.0, 0.0);
                for k in 0..n {
                    let hik = Complex::new(a[(i, k)], 0.0) - if i == k { z } else { Complex::new(0.0, 0.0) };
                    s += hik * g[(k, j)];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s - Complex::new(target, 0.0)).norm() < 1e-9, "({i},{j}) {s}");
            }
        }
    }

    #[test]
    fn shifted_inverse_trace_matches_spectrum() {
        let a = test_matrix(25);
        let z = Complex::new(-0.4, 0.05);
        let g = shifted_inverse(&a, z).unwrap();
        let ev = symmetric_eigenvalues(&a).unwrap();
        let tr: Complex<f64> = ev.iter().map(|&l| (Complex::new(l, 0.0) - z).inv()).sum();
        assert!((g.trace() - tr).norm() < 1e-10);
    }
}

//! Dense symmetric and Hermitian linear algebra.
//!
//! * [`cholesky`]: semidefinite-tolerant Cholesky with a jitter ladder.
//! * [`eigvals_sym`] / [`eigh_sym`]: Householder tridiagonalization followed by
//!   implicit QL with Wilkinson-type shifts (the EISPACK `tred2`/`tql2` pair).
//! * [`eigvals_herm`]: Hermitian spectra through the real embedding
//!   `[[Re, −Im], [Im, Re]]`, whose spectrum is the Hermitian one doubled.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PAIRING_TOL: f64 = 1e-8;

fn scale_of(data: &[f64]) -> f64 {
    data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Dense real symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Validates symmetry to `1e-12` relative to the largest entry.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        let tol = SYMMETRY_TOL * scale_of(&data).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (data[i * dim + j] - data[j * dim + i]).abs() > tol {
                    return Err(Error::invalid(
                        "matrix",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(SymMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Builds the matrix from its upper triangle, mirroring into the lower.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        SymMatrix { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        scale_of(&self.data)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SymMatrix) -> SymMatrix {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut data = vec![0.0; dim * dim];
        for i1 in 0..n {
            for j1 in 0..n {
                let a = self.get(i1, j1);
                for i2 in 0..m {
                    for j2 in 0..m {
                        data[(i1 * m + i2) * dim + j1 * m + j2] = a * other.get(i2, j2);
                    }
                }
            }
        }
        SymMatrix { dim, data }
    }
}

/// Dense complex Hermitian matrix stored as real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermMatrix {
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl HermMatrix {
    pub fn new(dim: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, re.len())?;
        check_dim(dim * dim, im.len())?;
        let tol = SYMMETRY_TOL * scale_of(&re).max(scale_of(&im)).max(f64::MIN_POSITIVE);
        for i in 0..dim {
            if im[i * dim + i] != 0.0 {
                return Err(Error::invalid(
                    "matrix",
                    format!("imaginary diagonal at {i}"),
                ));
            }
            for j in 0..i {
                if (re[i * dim + j] - re[j * dim + i]).abs() > tol
                    || (im[i * dim + j] + im[j * dim + i]).abs() > tol
                {
                    return Err(Error::invalid(
                        "matrix",
                        format!("not Hermitian at ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(HermMatrix { dim, re, im })
    }

    pub fn from_real(m: &SymMatrix) -> Self {
        HermMatrix {
            dim: m.dim,
            re: m.data.clone(),
            im: vec![0.0; m.dim * m.dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.re[i * self.dim + i]).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|x| x * x).sum()
    }

    /// The real symmetric `2d × 2d` matrix `[[Re, −Im], [Im, Re]]`.
    pub fn embedding(&self) -> SymMatrix {
        let n = self.dim;
        let mut out = vec![0.0; 4 * n * n];
        embed_into(n, &self.re, &self.im, &mut out);
        SymMatrix {
            dim: 2 * n,
            data: out,
        }
    }
}

fn embed_into(n: usize, re: &[f64], im: &[f64], out: &mut [f64]) {
    let m = 2 * n;
    for i in 0..n {
        for j in 0..n {
            let (r, c) = (re[i * n + j], im[i * n + j]);
            out[i * m + j] = r;
            out[i * m + n + j] = -c;
            out[(n + i) * m + j] = c;
            out[(n + i) * m + n + j] = r;
        }
    }
}

/// Relative jitter steps tried in order; each is multiplied by `trace/dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub ladder: Vec<f64>,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            ladder: vec![0.0, 1e-12, 1e-10, 1e-8],
        }
    }
}

impl JitterPolicy {
    /// Only the unjittered attempt.
    pub fn exact() -> Self {
        JitterPolicy { ladder: vec![0.0] }
    }
}

/// Lower-triangular factor `L` with `L·Lᵀ = m + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Absolute jitter added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Row-major factor (upper triangle is zero).
    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.dim + j]
    }

    /// `out = L·z`.
    #[inline]
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.l[i * n..i * n + i + 1];
            *o = row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
        }
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim;
        SymMatrix::from_fn(n, |i, j| {
            let k = i.min(j) + 1;
            (0..k).map(|p| self.get(i, p) * self.get(j, p)).sum()
        })
    }
}

/// One factorization attempt; `Err(pivot)` carries the offending pivot.
fn factor_once(m: &SymMatrix, jitter: f64) -> std::result::Result<Vec<f64>, f64> {
    let n = m.dim;
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(m.get(i, i).abs())) + jitter;
    // pivots this small are rounding noise of an exactly singular PSD matrix
    let zero_tol = 64.0 * f64::EPSILON * max_diag * n as f64;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            let s = m.get(i, j) - dot;
            if i == j {
                let pivot = s + jitter;
                if pivot > zero_tol {
                    l[i * n + i] = pivot.sqrt();
                } else if pivot >= -zero_tol {
                    l[i * n + i] = 0.0;
                } else {
                    return Err(pivot);
                }
            } else {
                let d = l[j * n + j];
                l[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
            }
        }
    }
    Ok(l)
}

pub fn cholesky(m: &SymMatrix, policy: &JitterPolicy) -> Result<Cholesky> {
    let n = m.dim;
    let unit = if n == 0 {
        0.0
    } else {
        m.trace().abs() / n as f64
    };
    let mut worst = 0.0f64;
    for step in &policy.ladder {
        let jitter = step * unit;
        match factor_once(m, jitter) {
            Ok(l) => return Ok(Cholesky { dim: n, l, jitter }),
            Err(pivot) => worst = worst.min(pivot),
        }
    }
    Err(Error::NotPsd { pivot: worst })
}

/// In-place symmetric eigen decomposition.
///
/// `a` (row-major `n × n`) is overwritten; with `want_vectors` it holds the
/// orthonormal eigenvectors as columns on return. `d` receives the ascending
/// eigenvalues, `e` is scratch of length `n`.
pub fn symmetric_eigen(
    a: &mut [f64],
    n: usize,
    d: &mut [f64],
    e: &mut [f64],
    want_vectors: bool,
) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    tred2(a, n, d, e, want_vectors);
    tql2(a, n, d, e, want_vectors)?;
    sort_ascending(a, n, d, want_vectors);
    Ok(())
}

fn tred2(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    if !want_vectors {
        for j in 0..n {
            d[j] = v[j * n + j];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let cap = 50 * n.max(1);
    let mut iterations = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > cap {
                    return Err(Error::NoConvergence {
                        iterations,
                        index: l,
                    });
                }
                // Wilkinson-type shift from the leading 2×2 block
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let h = v[k * n + i + 1];
                            v[k * n + i + 1] = s * v[k * n + i] + c * h;
                            v[k * n + i] = c * v[k * n + i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn sort_ascending(v: &mut [f64], n: usize, d: &mut [f64], want_vectors: bool) {
    // selection sort keeps eigenvector columns aligned; n is small
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if *dj < p {
                k = j;
                p = *dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if want_vectors {
                for r in 0..n {
                    v.swap(r * n + i, r * n + k);
                }
            }
        }
    }
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn eigvals_sym(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.dim;
    let mut a = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    symmetric_eigen(&mut a, n, &mut d, &mut e, false)?;
    Ok(d)
}

/// Eigenvalues with orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Row-major `n × n`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    /// `Q·Λ·Qᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.values.len();
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[i * n + k] * self.values[k] * self.vectors[j * n + k])
                .sum()
        })
    }
}

pub fn eigh_sym(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim;
    let mut a = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    symmetric_eigen(&mut a, n, &mut d, &mut e, true)?;
    Ok(SymEigen {
        values: d,
        vectors: a,
    })
}

/// Collapses the doubled spectrum of a Hermitian embedding.
fn halve_paired(spectrum: &[f64], out: &mut [f64]) -> Result<()> {
    let scale = scale_of(spectrum).max(1.0);
    for (k, pair) in spectrum.chunks_exact(2).enumerate() {
        let deviation = (pair[1] - pair[0]).abs();
        if deviation > PAIRING_TOL * scale {
            return Err(Error::Pairing {
                deviation,
                index: k,
            });
        }
        out[k] = 0.5 * (pair[0] + pair[1]);
    }
    Ok(())
}

/// Ascending eigenvalues of a complex Hermitian matrix.
pub fn eigvals_herm(m: &HermMatrix) -> Result<Vec<f64>> {
    let doubled = eigvals_sym(&m.embedding())?;
    let mut out = vec![0.0; m.dim];
    halve_paired(&doubled, &mut out)?;
    Ok(out)
}

/// Reusable buffers for eigenvalue computations in hot loops.
#[derive(Debug, Clone, Default)]
pub struct EigenWorkspace {
    a: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
}

impl EigenWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ascending eigenvalues of the symmetric row-major `data` into `out`.
    pub fn sym(&mut self, n: usize, data: &[f64], out: &mut [f64]) -> Result<()> {
        self.a.clear();
        self.a.extend_from_slice(data);
        self.e.resize(n, 0.0);
        symmetric_eigen(&mut self.a, n, out, &mut self.e, false)
    }

    /// Ascending eigenvalues of the Hermitian `re + i·im` into `out`.
    pub fn herm(&mut self, n: usize, re: &[f64], im: &[f64], out: &mut [f64]) -> Result<()> {
        let m = 2 * n;
        self.a.resize(m * m, 0.0);
        embed_into(n, re, im, &mut self.a);
        self.d.resize(m, 0.0);
        self.e.resize(m, 0.0);
        symmetric_eigen(&mut self.a, m, &mut self.d, &mut self.e, false)?;
        halve_paired(&self.d, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identity() {
        let c = cholesky(&SymMatrix::identity(3), &JitterPolicy::default()).unwrap();
        assert_eq!(c.jitter(), 0.0);
        assert_eq!(c.reconstruct(), SymMatrix::identity(3));
        assert_eq!(c.factor(), SymMatrix::identity(3).data());
    }

    #[test]
    fn cholesky_hand_example() {
        let m = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let c = cholesky(&m, &JitterPolicy::default()).unwrap();
        assert_eq!(c.factor(), &[2.0, 0.0, 1.0, 1.0]);
        assert_eq!(c.reconstruct(), m);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match cholesky(&m, &JitterPolicy::default()) {
            Err(Error::NotPsd { pivot }) => assert!(pivot < -2.9),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_accepts_singular_psd() {
        // rank one: all-ones
        let m = SymMatrix::from_fn(4, |_, _| 3.0);
        let c = cholesky(&m, &JitterPolicy::exact()).unwrap();
        let r = c.reconstruct();
        for (a, b) in r.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_examples() {
        assert_eq!(
            eigvals_sym(&SymMatrix::diag(&[3.0, 1.0, 2.0])).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        let refl = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let ev = eigvals_sym(&refl).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
        assert_eq!(eigvals_sym(&SymMatrix::diag(&[4.5])).unwrap(), vec![4.5]);
    }

    #[test]
    fn reconstruction_residual() {
        let m = SymMatrix::from_fn(5, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 1.5 + if i == j { 0.3 } else { 0.0 }
        });
        let eig = eigh_sym(&m).unwrap();
        let r = eig.reconstruct();
        let resid = r
            .data()
            .iter()
            .zip(m.data())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(resid <= 1e-10 * m.max_abs());
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hermitian_examples() {
        let pauli_y = HermMatrix::new(2, vec![0.0; 4], vec![0.0, 1.0, -1.0, 0.0]).unwrap();
        let ev = eigvals_herm(&pauli_y).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
        let diag = HermMatrix::new(2, vec![5.0, 0.0, 0.0, 7.0], vec![0.0; 4]).unwrap();
        let ev = eigvals_herm(&diag).unwrap();
        assert!((ev[0] - 5.0).abs() < 1e-14 && (ev[1] - 7.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_validation() {
        assert!(HermMatrix::new(2, vec![0.0; 4], vec![0.0, 1.0, 1.0, 0.0]).is_err());
        assert!(HermMatrix::new(1, vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn workspace_matches_owned() {
        let m = SymMatrix::from_fn(4, |i, j| {
            (i + 2 * j) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 }
        });
        let mut ws = EigenWorkspace::new();
        let mut out = vec![0.0; 4];
        ws.sym(4, m.data(), &mut out).unwrap();
        assert_eq!(out, eigvals_sym(&m).unwrap());
    }

    #[test]
    fn kron_layout() {
        let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let b = SymMatrix::from_rows(&[vec![5.0, 7.0], vec![7.0, 11.0]]).unwrap();
        let k = a.kron(&b);
        assert_eq!(k.get(0, 3), 2.0 * 7.0);
        assert_eq!(k.get(3, 2), 3.0 * 7.0);
        assert_eq!(k.get(1, 2), 2.0 * 7.0);
    }
}

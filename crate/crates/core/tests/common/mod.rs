//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use polarlab_core::rng::{NormalStream, RngSeed};

/// Fractional Brownian motion covariance on one axis, written out directly.
pub fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.abs().powf(2.0 * h) + t.abs().powf(2.0 * h) - (s - t).abs().powf(2.0 * h))
}

/// Number of eigenvalues of the symmetric `a` below `x`, from the signs of
/// the LDLᵀ pivots of `a − xI` (Sylvester inertia).
pub fn sym_count_below(a: &[f64], n: usize, x: f64) -> usize {
    let mut l = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    let mut neg = 0;
    for k in 0..n {
        let mut dk = a[k * n + k] - x;
        for j in 0..k {
            dk -= l[k * n + j] * l[k * n + j] * d[j];
        }
        if dk == 0.0 {
            dk = -1e-300;
        }
        d[k] = dk;
        if dk < 0.0 {
            neg += 1;
        }
        for i in k + 1..n {
            let mut v = a[i * n + k];
            for j in 0..k {
                v -= l[i * n + j] * l[k * n + j] * d[j];
            }
            l[i * n + k] = v / dk;
        }
    }
    neg
}

/// Same inertia count for a Hermitian matrix in complex arithmetic.
pub fn herm_count_below(a: &[Complex64], n: usize, x: f64) -> usize {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    let mut d = vec![0.0; n];
    let mut neg = 0;
    for k in 0..n {
        let mut dk = a[k * n + k].re - x;
        for j in 0..k {
            dk -= l[k * n + j].norm_sqr() * d[j];
        }
        if dk == 0.0 {
            dk = -1e-300;
        }
        d[k] = dk;
        if dk < 0.0 {
            neg += 1;
        }
        for i in k + 1..n {
            let mut v = a[i * n + k];
            for j in 0..k {
                v -= l[i * n + j] * l[k * n + j].conj() * d[j];
            }
            l[i * n + k] = v / dk;
        }
    }
    neg
}

/// Eigenvalues by bisection on an inertia count, ascending.
pub fn bisect_eigenvalues(n: usize, bound: f64, count_below: impl Fn(f64) -> usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * bound {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Seeded symmetric matrix with standard normal entries.
pub fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = NormalStream::new(RngSeed::new(seed));
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rng.next_normal();
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// Seeded Hermitian matrix as (re, im) parts.
pub fn random_hermitian(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = NormalStream::new(RngSeed::new(seed));
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for i in 0..n {
        re[i * n + i] = rng.next_normal();
        for j in i + 1..n {
            let (x, y) = (rng.next_normal(), rng.next_normal());
            re[i * n + j] = x;
            re[j * n + i] = x;
            im[i * n + j] = y;
            im[j * n + i] = -y;
        }
    }
    (re, im)
}

pub fn to_complex(re: &[f64], im: &[f64]) -> Vec<Complex64> {
    re.iter()
        .zip(im)
        .map(|(a, b)| Complex64::new(*a, *b))
        .collect()
}

/// Sample covariance with known zero mean, and its standard error under
/// Gaussianity: `Var(XY) = C_xx C_yy + C_xy²`.
pub fn zero_mean_cov(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.len() as f64
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

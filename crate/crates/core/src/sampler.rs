//! Exact Gaussian sampling on lattices.
//!
//! A [`Sampler`] factors the covariance of a `(kernel, grid)` pair once and
//! then turns standard normals from a replicate stream into field values,
//! component by component. Three factor shapes exist, all exact:
//!
//! * dense Cholesky of the full covariance matrix;
//! * Kronecker factors `⊗ L_j` for product-form (sheet) kernels;
//! * the closed-form Cholesky factor of Brownian motion on an increasing
//!   grid, `L_ij = √(t_j − t_{j−1})` for `j ≤ i`, applied as a running sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::kernels::{fbm_1d_covariance, Kernel, KernelVariant};
use crate::linalg::{cholesky, Cholesky, JitterPolicy, SymMatrix};
use crate::rng::{NormalStream, RngSeed};

/// Covariance matrix `C(p_i, p_j)` of a point list.
pub fn covariance_matrix(kernel: &Kernel, points: &[Vec<f64>]) -> Result<SymMatrix> {
    for p in points {
        kernel.check_point(p)?;
    }
    Ok(SymMatrix::from_fn(points.len(), |i, j| {
        kernel.covariance_unchecked(&points[i], &points[j])
    }))
}

#[derive(Debug, Clone)]
pub enum Factor {
    Dense(Cholesky),
    Kronecker {
        axes: Vec<Cholesky>,
        counts: Vec<usize>,
    },
    Increments {
        scales: Vec<f64>,
    },
}

impl Factor {
    pub fn len(&self) -> usize {
        match self {
            Factor::Dense(c) => c.dim(),
            Factor::Kronecker { counts, .. } => counts.iter().product(),
            Factor::Increments { scales } => scales.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest absolute jitter used by any underlying factorization.
    pub fn jitter(&self) -> f64 {
        match self {
            Factor::Dense(c) => c.jitter(),
            Factor::Kronecker { axes, .. } => axes.iter().map(Cholesky::jitter).fold(0.0, f64::max),
            Factor::Increments { .. } => 0.0,
        }
    }

    /// `out = L·z`. `scratch` is resized as needed.
    pub fn apply(&self, z: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        match self {
            Factor::Dense(c) => c.mul_vec(z, out),
            Factor::Increments { scales } => {
                let mut acc = 0.0;
                for ((o, s), zi) in out.iter_mut().zip(scales).zip(z) {
                    acc += s * zi;
                    *o = acc;
                }
            }
            Factor::Kronecker { axes, counts } => {
                out[..z.len()].copy_from_slice(z);
                let total: usize = counts.iter().product();
                for (j, l) in axes.iter().enumerate() {
                    let n = counts[j];
                    let stride: usize = counts[j + 1..].iter().product();
                    let outer = total / (n * stride);
                    scratch.resize(n, 0.0);
                    for o in 0..outer {
                        for s in 0..stride {
                            let base = o * n * stride + s;
                            for (i, v) in scratch.iter_mut().enumerate() {
                                *v = out[base + i * stride];
                            }
                            // in-place lower-triangular product, bottom row first
                            for i in (0..n).rev() {
                                let mut acc = 0.0;
                                for (m, x) in scratch.iter().enumerate().take(i + 1) {
                                    acc += l.get(i, m) * x;
                                }
                                out[base + i * stride] = acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Value of the field at an off-grid anchor drawn jointly with the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorValue {
    pub point: Vec<f64>,
    /// One value per component.
    pub values: Vec<f64>,
}

/// Values of a `d`-component field on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub components: usize,
    /// Row-major `[component][grid index]`.
    pub values: Vec<f64>,
    pub kernel: Kernel,
    pub seed: RngSeed,
    pub anchor: Option<AnchorValue>,
}

impl FieldSample {
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn value(&self, c: usize, i: usize) -> f64 {
        self.values[c * self.grid.len() + i]
    }

    /// The `ℝᵈ` value at grid index `i`.
    pub fn at(&self, i: usize) -> Vec<f64> {
        (0..self.components).map(|c| self.value(c, i)).collect()
    }
}

/// Largest point set factored densely (a 2¹²+1 grid with an anchor fits).
pub const DENSE_CAP: usize = 4200;

pub struct Sampler {
    kernel: Kernel,
    grid: GridSpec,
    anchor: Option<Vec<f64>>,
    factor: Factor,
}

impl Sampler {
    /// Picks the Kronecker path for sheets, the increment factor for
    /// Brownian motion and dense Cholesky otherwise.
    pub fn new(kernel: &Kernel, grid: &GridSpec) -> Result<Self> {
        kernel.check_rect(grid.rect())?;
        let factor = if let Some(hurst) = kernel.product_axes() {
            kronecker_factor(hurst, grid)?
        } else if matches!(kernel.variant(), KernelVariant::Bm) {
            increments_factor(grid)
        } else {
            dense_factor(kernel, &grid.points())?
        };
        Ok(Sampler {
            kernel: kernel.clone(),
            grid: grid.clone(),
            anchor: None,
            factor,
        })
    }

    /// Dense Cholesky regardless of kernel structure.
    pub fn dense(kernel: &Kernel, grid: &GridSpec) -> Result<Self> {
        kernel.check_rect(grid.rect())?;
        Ok(Sampler {
            kernel: kernel.clone(),
            grid: grid.clone(),
            anchor: None,
            factor: dense_factor(kernel, &grid.points())?,
        })
    }

    /// Dense sampler over the grid plus one extra point, so the anchor value
    /// is drawn exactly from the joint law. The anchor may lie off the grid.
    pub fn with_anchor(kernel: &Kernel, grid: &GridSpec, anchor: &[f64]) -> Result<Self> {
        kernel.check_rect(grid.rect())?;
        kernel.check_point(anchor)?;
        let mut points = grid.points();
        points.push(anchor.to_vec());
        Ok(Sampler {
            kernel: kernel.clone(),
            grid: grid.clone(),
            anchor: Some(anchor.to_vec()),
            factor: dense_factor(kernel, &points)?,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter()
    }

    /// Points per component, including the anchor if any.
    pub fn points_len(&self) -> usize {
        self.factor.len()
    }

    /// Draws `components` independent copies into `out`
    /// (`[component][point]`, anchor last when present). Component `c` uses
    /// draws `c·P .. (c+1)·P` of the replicate stream, `P = points_len()`.
    pub fn draw_into(
        &self,
        components: usize,
        seed: RngSeed,
        work: &mut SampleWork,
        out: &mut [f64],
    ) {
        let p = self.points_len();
        work.z.resize(components * p, 0.0);
        NormalStream::new(seed).fill_normals(&mut work.z);
        for c in 0..components {
            self.factor.apply(
                &work.z[c * p..(c + 1) * p],
                &mut out[c * p..(c + 1) * p],
                &mut work.scratch,
            );
        }
    }

    /// One component from caller-supplied standard normals.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let mut scratch = Vec::new();
        self.factor.apply(z, out, &mut scratch);
    }

    pub fn sample(&self, components: usize, seed: RngSeed) -> Result<FieldSample> {
        if components == 0 {
            return Err(Error::invalid("d", "need at least one component"));
        }
        let p = self.points_len();
        let n = self.grid.len();
        let mut raw = vec![0.0; components * p];
        self.draw_into(components, seed, &mut SampleWork::default(), &mut raw);
        let (values, anchor) = match &self.anchor {
            None => (raw, None),
            Some(point) => {
                let mut values = Vec::with_capacity(components * n);
                let mut at_anchor = Vec::with_capacity(components);
                for c in 0..components {
                    values.extend_from_slice(&raw[c * p..c * p + n]);
                    at_anchor.push(raw[c * p + n]);
                }
                (
                    values,
                    Some(AnchorValue {
                        point: point.clone(),
                        values: at_anchor,
                    }),
                )
            }
        };
        Ok(FieldSample {
            grid: self.grid.clone(),
            components,
            values,
            kernel: self.kernel.clone(),
            seed,
            anchor,
        })
    }
}

/// Scratch buffers reused across replicates.
#[derive(Debug, Default, Clone)]
pub struct SampleWork {
    z: Vec<f64>,
    scratch: Vec<f64>,
}

fn dense_factor(kernel: &Kernel, points: &[Vec<f64>]) -> Result<Factor> {
    if points.len() > DENSE_CAP {
        return Err(Error::CapExceeded {
            what: "dense covariance points",
            requested: points.len(),
            cap: DENSE_CAP,
        });
    }
    let c = covariance_matrix(kernel, points)?;
    Ok(Factor::Dense(cholesky(&c, &JitterPolicy::default())?))
}

fn kronecker_factor(hurst: &[f64], grid: &GridSpec) -> Result<Factor> {
    let mut axes = Vec::with_capacity(hurst.len());
    for (j, h) in hurst.iter().enumerate() {
        axes.push(cholesky(
            &axis_covariance(*h, grid, j),
            &JitterPolicy::default(),
        )?);
    }
    Ok(Factor::Kronecker {
        axes,
        counts: grid.counts().to_vec(),
    })
}

/// One-axis fBm covariance over the coordinates of `axis`.
pub fn axis_covariance(hurst: f64, grid: &GridSpec, axis: usize) -> SymMatrix {
    SymMatrix::from_fn(grid.counts()[axis], |i, k| {
        fbm_1d_covariance(hurst, grid.coord(axis, i), grid.coord(axis, k))
    })
}

fn increments_factor(grid: &GridSpec) -> Factor {
    let mut prev = 0.0;
    let scales = (0..grid.len())
        .map(|i| {
            let t = grid.coord(0, i);
            let s = (t - prev).sqrt();
            prev = t;
            s
        })
        .collect();
    Factor::Increments { scales }
}

/// Convenience wrapper: factor and draw once.
pub fn sample_field(
    kernel: &Kernel,
    grid: &GridSpec,
    components: usize,
    seed: RngSeed,
) -> Result<FieldSample> {
    Sampler::new(kernel, grid)?.sample(components, seed)
}

/// `X = X¹ + X²` with `X²(t) = E[X(t) | X(anchor)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSplit {
    /// Perturbation part, independent of the anchor value.
    pub x1: FieldSample,
    /// Conditional expectation given the anchor value.
    pub x2: FieldSample,
    pub anchor: Vec<f64>,
    pub anchor_values: Vec<f64>,
}

fn anchor_values(sample: &FieldSample, anchor: &[f64]) -> Result<Vec<f64>> {
    if let Some(a) = &sample.anchor {
        if a.point == anchor {
            return Ok(a.values.clone());
        }
    }
    (0..sample.grid.len())
        .find(|i| sample.grid.point(*i) == anchor)
        .map(|i| sample.at(i))
        .ok_or_else(|| Error::AnchorUnavailable {
            anchor: anchor.to_vec(),
        })
}

/// Regression weights `C(t, a) / C(a, a)` over the grid.
pub fn anchor_weights(kernel: &Kernel, grid: &GridSpec, anchor: &[f64]) -> Result<Vec<f64>> {
    let caa = kernel.covariance(anchor, anchor)?;
    if !(caa > 0.0) {
        return Err(Error::DegenerateAnchor {
            anchor: anchor.to_vec(),
        });
    }
    (0..grid.len())
        .map(|i| Ok(kernel.covariance(&grid.point(i), anchor)? / caa))
        .collect()
}

pub fn conditional_split(
    kernel: &Kernel,
    sample: &FieldSample,
    anchor: &[f64],
) -> Result<ConditionalSplit> {
    let weights = anchor_weights(kernel, &sample.grid, anchor)?;
    let at_anchor = anchor_values(sample, anchor)?;
    let n = sample.grid.len();
    let mut x1 = sample.clone();
    let mut x2 = sample.clone();
    for c in 0..sample.components {
        for i in 0..n {
            let v2 = weights[i] * at_anchor[c];
            x2.values[c * n + i] = v2;
            x1.values[c * n + i] = sample.values[c * n + i] - v2;
        }
    }
    Ok(ConditionalSplit {
        x1,
        x2,
        anchor: anchor.to_vec(),
        anchor_values: at_anchor,
    })
}

/// `Cov(X¹(s), X²(t))` assembled from kernel evaluations; zero by the
/// Gaussian conditioning identity.
pub fn theoretical_cross_covariance(
    kernel: &Kernel,
    anchor: &[f64],
    s: &[f64],
    t: &[f64],
) -> Result<f64> {
    let caa = kernel.covariance(anchor, anchor)?;
    if !(caa > 0.0) {
        return Err(Error::DegenerateAnchor {
            anchor: anchor.to_vec(),
        });
    }
    let csa = kernel.covariance(s, anchor)?;
    let cta = kernel.covariance(t, anchor)?;
    // X¹(s) = X(s) − (C(s,a)/C(a,a))·X(a),  X²(t) = (C(t,a)/C(a,a))·X(a)
    Ok((cta / caa) * (csa - (csa / caa) * caa))
}

/// Smallest `K` with `|g(s) − g(t)| ≤ K·Σ|s_j − t_j|^{δ_j}` over the pairs,
/// where `g(t) = C(t, a)/C(a, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementBound {
    pub k: f64,
    pub worst: Option<(Vec<f64>, Vec<f64>)>,
    /// Pairs that entered the fit (coincident pairs are skipped).
    pub pairs_used: usize,
}

pub fn x2_increment_bound_check(
    kernel: &Kernel,
    anchor: &[f64],
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<IncrementBound> {
    let caa = kernel.covariance(anchor, anchor)?;
    if !(caa > 0.0) {
        return Err(Error::DegenerateAnchor {
            anchor: anchor.to_vec(),
        });
    }
    let delta = kernel.delta();
    let mut best = IncrementBound {
        k: 0.0,
        worst: None,
        pairs_used: 0,
    };
    for (s, t) in pairs {
        let denom: f64 = delta
            .iter()
            .zip(s.iter().zip(t))
            .map(|(d, (a, b))| (a - b).abs().powf(*d))
            .sum();
        if denom == 0.0 {
            continue;
        }
        let gs = kernel.covariance(s, anchor)? / caa;
        let gt = kernel.covariance(t, anchor)? / caa;
        let ratio = (gs - gt).abs() / denom;
        best.pairs_used += 1;
        if best.worst.is_none() || ratio > best.k {
            best.k = ratio;
            best.worst = Some((s.clone(), t.clone()));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rectangle;

    #[test]
    fn covariance_matrix_examples() {
        let pts = vec![vec![1.0], vec![2.0]];
        let bm = covariance_matrix(&Kernel::bm(), &pts).unwrap();
        assert_eq!(bm.data(), &[1.0, 1.0, 1.0, 2.0]);
        let fbm = covariance_matrix(&Kernel::fbm(0.5, 1).unwrap(), &pts).unwrap();
        assert_eq!(fbm, bm);
    }

    #[test]
    fn fbs_matrix_is_kronecker() {
        let grid = GridSpec::new(Rectangle::cube(1.0, 2.0, 2).unwrap(), vec![2, 2]).unwrap();
        let k = Kernel::fbs(&[0.5, 0.5]).unwrap();
        let full = covariance_matrix(&k, &grid.points()).unwrap();
        let kron = axis_covariance(0.5, &grid, 0).kron(&axis_covariance(0.5, &grid, 1));
        for (a, b) in full.data().iter().zip(kron.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let grid = GridSpec::interval(1.0, 2.0, 9).unwrap();
        for k in [
            Kernel::bm(),
            Kernel::fbm(0.3, 1).unwrap(),
            Kernel::ou(0.5, 1.0).unwrap(),
        ] {
            let a = sample_field(&k, &grid, 2, RngSeed::new(5)).unwrap();
            let b = sample_field(&k, &grid, 2, RngSeed::new(5)).unwrap();
            assert_eq!(a.values, b.values);
            let c = sample_field(&k, &grid, 2, RngSeed::new(6)).unwrap();
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn increments_factor_equals_dense_cholesky() {
        let grid = GridSpec::interval(0.5, 3.0, 12).unwrap();
        let fast = Sampler::new(&Kernel::bm(), &grid).unwrap();
        assert!(matches!(fast.factor(), Factor::Increments { .. }));
        let dense = Sampler::dense(&Kernel::bm(), &grid).unwrap();
        let z: Vec<f64> = (0..12)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0)
            .collect();
        let (mut a, mut b) = (vec![0.0; 12], vec![0.0; 12]);
        fast.apply(&z, &mut a);
        dense.apply(&z, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_inadmissible_grid() {
        let grid = GridSpec::interval(0.0, 1.0, 4).unwrap();
        assert!(matches!(
            Sampler::new(&Kernel::bm(), &grid),
            Err(Error::Domain { .. })
        ));
        let grid = GridSpec::new(Rectangle::cube(-1.0, 1.0, 2).unwrap(), vec![3, 3]).unwrap();
        assert!(Sampler::new(&Kernel::fbm(0.4, 2).unwrap(), &grid).is_err());
    }

    #[test]
    fn split_identity_and_anchor() {
        let grid = GridSpec::interval(1.0, 2.0, 6).unwrap();
        let k = Kernel::fbm(0.3, 1).unwrap();
        let s = sample_field(&k, &grid, 2, RngSeed::new(9)).unwrap();
        let split = conditional_split(&k, &s, &[1.4]).unwrap();
        for i in 0..s.values.len() {
            assert!((split.x1.values[i] + split.x2.values[i] - s.values[i]).abs() <= 1e-12);
        }
        // anchor on the grid: X² reproduces X there
        assert_eq!(split.x2.at(2), s.at(2));
        assert!(split.x1.at(2).iter().all(|v| v.abs() <= 1e-15));
    }

    #[test]
    fn bm_split_is_increment_from_anchor() {
        let grid = GridSpec::interval(1.0, 2.0, 5).unwrap();
        let s = sample_field(&Kernel::bm(), &grid, 1, RngSeed::new(3)).unwrap();
        let split = conditional_split(&Kernel::bm(), &s, &[1.0]).unwrap();
        for i in 0..5 {
            assert_eq!(split.x2.value(0, i), s.value(0, 0));
            assert_eq!(split.x1.value(0, i), s.value(0, i) - s.value(0, 0));
        }
    }

    #[test]
    fn zero_anchor_value_gives_zero_x2() {
        let grid = GridSpec::interval(1.0, 2.0, 4).unwrap();
        let mut s = sample_field(&Kernel::bm(), &grid, 1, RngSeed::new(1)).unwrap();
        s.values[1] = 0.0;
        let split = conditional_split(&Kernel::bm(), &s, &grid.point(1)).unwrap();
        assert!(split.x2.values.iter().all(|v| *v == 0.0));
        assert_eq!(split.x1.values, s.values);
    }

    #[test]
    fn off_grid_anchor_needs_joint_draw() {
        let grid = GridSpec::interval(1.0, 2.0, 4).unwrap();
        let k = Kernel::bm();
        let plain = sample_field(&k, &grid, 1, RngSeed::new(1)).unwrap();
        assert!(matches!(
            conditional_split(&k, &plain, &[0.9]),
            Err(Error::AnchorUnavailable { .. })
        ));
        let joint = Sampler::with_anchor(&k, &grid, &[0.9])
            .unwrap()
            .sample(1, RngSeed::new(1))
            .unwrap();
        let split = conditional_split(&k, &joint, &[0.9]).unwrap();
        assert_eq!(split.anchor_values, joint.anchor.unwrap().values);
    }

    #[test]
    fn cross_covariance_examples() {
        let bm = Kernel::bm();
        assert!(
            theoretical_cross_covariance(&bm, &[1.0], &[1.5], &[1.7])
                .unwrap()
                .abs()
                <= 1e-12
        );
        let fbs = Kernel::fbs(&[0.4, 0.6]).unwrap();
        let v = theoretical_cross_covariance(&fbs, &[1.0, 1.0], &[1.3, 1.9], &[1.7, 1.2]).unwrap();
        assert!(v.abs() <= 1e-12);
    }

    #[test]
    fn increment_bound_examples() {
        let pairs = vec![
            (vec![1.0], vec![1.5]),
            (vec![1.2], vec![1.9]),
            (vec![1.3], vec![1.3]),
        ];
        let r = x2_increment_bound_check(&Kernel::bm(), &[1.0], &pairs).unwrap();
        assert_eq!(r.k, 0.0);
        assert_eq!(r.pairs_used, 2);
    }
}

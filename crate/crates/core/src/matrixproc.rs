//! Matrix-valued Gaussian processes `Y^β(t) = A^β + X^β(t)` on a grid, their
//! eigenvalue paths and k-gap functionals.
//!
//! Entry fields are ordered ξ first (upper triangle `i ≤ j`, row-major), then
//! η (strict upper triangle `i < j`, row-major, β = 2 only).

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::GridSpec;
use crate::kernels::Kernel;
use crate::linalg::{EigenWorkspace, HermMatrix, SymMatrix};
use crate::rng::RngSeed;
use crate::sampler::{FieldSample, SampleWork, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    /// Real symmetric.
    One,
    /// Complex Hermitian.
    Two,
}

impl TryFrom<u8> for Beta {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Beta::One),
            2 => Ok(Beta::Two),
            _ => Err(Error::invalid("beta", format!("must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        match b {
            Beta::One => 1,
            Beta::Two => 2,
        }
    }
}

/// The deterministic shift `A^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    Real(SymMatrix),
    Complex(HermMatrix),
}

impl Shift {
    pub fn dim(&self) -> usize {
        match self {
            Shift::Real(m) => m.dim(),
            Shift::Complex(m) => m.dim(),
        }
    }

    fn parts(&self) -> (&[f64], Option<&[f64]>) {
        match self {
            Shift::Real(m) => (m.data(), None),
            Shift::Complex(m) => (m.re(), Some(m.im())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub beta: Beta,
    pub dim: usize,
    pub kernel: Kernel,
    pub shift: Shift,
}

impl EnsembleSpec {
    pub fn new(beta: Beta, dim: usize, kernel: Kernel, shift: Shift) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dim", "matrix dimension must be at least 2"));
        }
        check_dim(dim, shift.dim())?;
        if beta == Beta::One && matches!(shift, Shift::Complex(_)) {
            return Err(Error::invalid(
                "shift",
                "β = 1 needs a real symmetric shift",
            ));
        }
        Ok(EnsembleSpec {
            beta,
            dim,
            kernel,
            shift,
        })
    }

    /// Zero shift.
    pub fn centered(beta: Beta, dim: usize, kernel: Kernel) -> Result<Self> {
        let shift = match beta {
            Beta::One => Shift::Real(SymMatrix::zeros(dim)),
            Beta::Two => Shift::Complex(HermMatrix::from_real(&SymMatrix::zeros(dim))),
        };
        Self::new(beta, dim, kernel, shift)
    }

    /// Number of ξ fields, `d(d+1)/2`.
    pub fn xi_count(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// Number of η fields, `d(d−1)/2` for β = 2 and zero otherwise.
    pub fn eta_count(&self) -> usize {
        match self.beta {
            Beta::One => 0,
            Beta::Two => self.dim * (self.dim - 1) / 2,
        }
    }

    /// Total number of scalar entry fields.
    pub fn components(&self) -> usize {
        self.xi_count() + self.eta_count()
    }
}

/// Matrices `Y(t)` at every grid point, stored `[point][row][col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPath {
    pub grid: GridSpec,
    pub spec: EnsembleSpec,
    pub seed: RngSeed,
    re: Vec<f64>,
    /// Present for β = 2.
    im: Option<Vec<f64>>,
}

impl MatrixPath {
    /// Assembles the path from entry field values laid out as a
    /// [`FieldSample`] (`[component][grid index]`, ξ then η).
    pub fn from_fields(
        spec: &EnsembleSpec,
        grid: &GridSpec,
        seed: RngSeed,
        fields: &[f64],
    ) -> Result<Self> {
        let n = grid.len();
        check_dim(spec.components() * n, fields.len())?;
        let d = spec.dim;
        let mut re = vec![0.0; n * d * d];
        let mut im = (spec.beta == Beta::Two).then(|| vec![0.0; n * d * d]);
        for p in 0..n {
            assemble(
                spec,
                |c| fields[c * n + p],
                &mut re[p * d * d..(p + 1) * d * d],
                im.as_mut().map(|v| &mut v[p * d * d..(p + 1) * d * d]),
            );
        }
        Ok(MatrixPath {
            grid: grid.clone(),
            spec: spec.clone(),
            seed,
            re,
            im,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Real part of `Y` at grid index `i`, row-major.
    pub fn re_at(&self, i: usize) -> &[f64] {
        let dd = self.spec.dim * self.spec.dim;
        &self.re[i * dd..(i + 1) * dd]
    }

    /// Imaginary part of `Y` at grid index `i`, if β = 2.
    pub fn im_at(&self, i: usize) -> Option<&[f64]> {
        let dd = self.spec.dim * self.spec.dim;
        self.im.as_ref().map(|v| &v[i * dd..(i + 1) * dd])
    }

    pub fn sym(&self, i: usize) -> Result<SymMatrix> {
        if self.im.is_some() {
            return Err(Error::invalid("beta", "path is Hermitian; use herm()"));
        }
        SymMatrix::new(self.spec.dim, self.re_at(i).to_vec())
    }

    pub fn herm(&self, i: usize) -> Result<HermMatrix> {
        let d = self.spec.dim;
        let im = self
            .im_at(i)
            .map_or_else(|| vec![0.0; d * d], <[f64]>::to_vec);
        HermMatrix::new(d, self.re_at(i).to_vec(), im)
    }
}

/// Writes `A + X` for one point; `xi(c)` returns entry field `c`.
fn assemble(
    spec: &EnsembleSpec,
    xi: impl Fn(usize) -> f64,
    re: &mut [f64],
    im: Option<&mut [f64]>,
) {
    let d = spec.dim;
    let (a_re, a_im) = spec.shift.parts();
    let mut c = 0;
    for i in 0..d {
        for j in i..d {
            let v = if i == j {
                std::f64::consts::SQRT_2 * xi(c)
            } else {
                xi(c)
            };
            re[i * d + j] = a_re[i * d + j] + v;
            re[j * d + i] = a_re[j * d + i] + v;
            c += 1;
        }
    }
    if let Some(im) = im {
        im.fill(0.0);
        if let Some(a_im) = a_im {
            im.copy_from_slice(a_im);
        }
        if spec.beta == Beta::Two {
            for i in 0..d {
                for j in i + 1..d {
                    let v = xi(c);
                    im[i * d + j] += v;
                    im[j * d + i] -= v;
                    c += 1;
                }
            }
        }
    }
}

/// Sampler for a matrix ensemble on a fixed grid. The entry fields share one
/// factorization and use consecutive components of the replicate stream.
pub struct MatrixSampler {
    spec: EnsembleSpec,
    sampler: Sampler,
}

/// Per-thread scratch for [`MatrixSampler`].
#[derive(Debug, Default, Clone)]
pub struct MatrixWork {
    sample: SampleWork,
    fields: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    eigen: EigenWorkspace,
}

impl MatrixSampler {
    pub fn new(spec: &EnsembleSpec, grid: &GridSpec) -> Result<Self> {
        Ok(MatrixSampler {
            spec: spec.clone(),
            sampler: Sampler::new(&spec.kernel, grid)?,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        self.sampler.grid()
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    /// Entry fields `[component][grid index]` for one replicate.
    pub fn draw_fields(&self, seed: RngSeed, work: &mut MatrixWork) -> Vec<f64> {
        let n = self.sampler.points_len() * self.spec.components();
        work.fields.resize(n, 0.0);
        self.sampler.draw_into(
            self.spec.components(),
            seed,
            &mut work.sample,
            &mut work.fields,
        );
        work.fields.clone()
    }

    pub fn path(&self, seed: RngSeed) -> Result<MatrixPath> {
        let mut work = MatrixWork::default();
        let fields = self.draw_fields(seed, &mut work);
        MatrixPath::from_fields(&self.spec, self.grid(), seed, &fields)
    }

    /// Ascending eigenvalues `[grid index][i]` of one replicate, without
    /// materializing the matrix path.
    pub fn eigenvalues_into(
        &self,
        seed: RngSeed,
        work: &mut MatrixWork,
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.grid().len();
        let d = self.spec.dim;
        check_dim(n * d, out.len())?;
        let comps = self.spec.components();
        work.fields.resize(n * comps, 0.0);
        self.sampler
            .draw_into(comps, seed, &mut work.sample, &mut work.fields);
        work.re.resize(d * d, 0.0);
        work.im.resize(d * d, 0.0);
        let hermitian = self.spec.beta == Beta::Two || matches!(self.spec.shift, Shift::Complex(_));
        for p in 0..n {
            let fields = &work.fields;
            assemble(
                &self.spec,
                |c| fields[c * n + p],
                &mut work.re,
                hermitian.then_some(&mut work.im[..]),
            );
            let slot = &mut out[p * d..(p + 1) * d];
            let res = if hermitian {
                work.eigen.herm(d, &work.re, &work.im, slot)
            } else {
                work.eigen.sym(d, &work.re, slot)
            };
            res.map_err(|e| Error::AtGridPoint {
                index: p,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }
}

pub fn build_matrix_path(
    spec: &EnsembleSpec,
    grid: &GridSpec,
    seed: RngSeed,
) -> Result<MatrixPath> {
    MatrixSampler::new(spec, grid)?.path(seed)
}

/// The vectorized `X̃ = D(Y − A)`: ξ entries with diagonals divided by √2,
/// then η entries. All components share the variance `C(t,t)`.
pub fn normalize_components(path: &MatrixPath) -> FieldSample {
    let spec = &path.spec;
    let d = spec.dim;
    let n = path.len();
    let comps = spec.components();
    let (a_re, a_im) = spec.shift.parts();
    let mut values = vec![0.0; comps * n];
    for p in 0..n {
        let re = path.re_at(p);
        let mut c = 0;
        for i in 0..d {
            for j in i..d {
                let x = re[i * d + j] - a_re[i * d + j];
                values[c * n + p] = if i == j {
                    x / std::f64::consts::SQRT_2
                } else {
                    x
                };
                c += 1;
            }
        }
        if let Some(im) = path.im_at(p).filter(|_| spec.beta == Beta::Two) {
            for i in 0..d {
                for j in i + 1..d {
                    values[c * n + p] = im[i * d + j] - a_im.map_or(0.0, |a| a[i * d + j]);
                    c += 1;
                }
            }
        }
    }
    FieldSample {
        grid: path.grid.clone(),
        components: comps,
        values,
        kernel: spec.kernel.clone(),
        seed: path.seed,
        anchor: None,
    }
}

/// Ascending eigenvalues per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPath {
    pub grid: GridSpec,
    pub dim: usize,
    /// `[grid index][i]`.
    pub eigenvalues: Vec<f64>,
}

impl EigenPath {
    pub fn new(grid: GridSpec, dim: usize, eigenvalues: Vec<f64>) -> Result<Self> {
        check_dim(grid.len() * dim, eigenvalues.len())?;
        if dim == 0 {
            return Err(Error::invalid(
                "dim",
                "need at least one eigenvalue per point",
            ));
        }
        if let Some(p) = eigenvalues
            .chunks(dim)
            .position(|c| c.windows(2).any(|w| !(w[0] <= w[1])))
        {
            return Err(Error::invalid(
                "eigenvalues",
                format!("not ascending at grid index {p}"),
            ));
        }
        Ok(EigenPath {
            grid,
            dim,
            eigenvalues,
        })
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.eigenvalues[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn eigen_path(path: &MatrixPath) -> Result<EigenPath> {
    let d = path.dim();
    let n = path.len();
    let mut ws = EigenWorkspace::new();
    let mut values = vec![0.0; n * d];
    for p in 0..n {
        let slot = &mut values[p * d..(p + 1) * d];
        let res = match path.im_at(p) {
            Some(im) => ws.herm(d, path.re_at(p), im, slot),
            None => ws.sym(d, path.re_at(p), slot),
        };
        res.map_err(|e| Error::AtGridPoint {
            index: p,
            source: Box::new(e),
        })?;
    }
    Ok(EigenPath {
        grid: path.grid.clone(),
        dim: d,
        eigenvalues: values,
    })
}

/// Location of the smallest k-gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMin {
    pub value: f64,
    pub point: Vec<f64>,
    pub grid_index: usize,
    /// 1-based index `i` of the lower eigenvalue `λ_i`.
    pub eigen_index: usize,
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if (2..=d).contains(&k) {
        Ok(())
    } else {
        Err(Error::invalid("k", format!("need 2 ≤ k ≤ {d}, got {k}")))
    }
}

/// `min_i λ_{i+k−1} − λ_i` of one sorted spectrum, with the 0-based `i`.
#[inline]
pub fn k_gap(sorted: &[f64], k: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for i in 0..=sorted.len() - k {
        let g = sorted[i + k - 1] - sorted[i];
        if g < best.0 {
            best = (g, i);
        }
    }
    best
}

/// Per-point k-gaps of `[point][i]` spectra into `out`.
pub fn pointwise_k_gap(eigenvalues: &[f64], d: usize, k: usize, out: &mut [f64]) -> Result<()> {
    check_k(k, d)?;
    check_dim(eigenvalues.len(), out.len() * d)?;
    for (o, spec) in out.iter_mut().zip(eigenvalues.chunks(d)) {
        *o = k_gap(spec, k).0;
    }
    Ok(())
}

/// Minimum over grid points and indices of `λ_{i+k−1}(t) − λ_i(t)`; a zero
/// value witnesses a k-fold collision on the grid.
pub fn min_k_gap(eig: &EigenPath, k: usize) -> Result<GapMin> {
    check_k(k, eig.dim)?;
    let mut best = GapMin {
        value: f64::INFINITY,
        point: Vec::new(),
        grid_index: 0,
        eigen_index: 1,
    };
    for p in 0..eig.grid.len() {
        let (g, i) = k_gap(eig.at(p), k);
        if g < best.value {
            best.value = g;
            best.grid_index = p;
            best.eigen_index = i + 1;
        }
    }
    best.point = eig.grid.point(best.grid_index);
    Ok(best)
}

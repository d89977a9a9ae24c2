//! Simulation and verification toolkit for anisotropic Gaussian random fields.
//!
//! The crate covers four layers:
//!
//! * [`kernels`] and [`geometry`]: closed-form covariance models with their
//!   anisotropy exponents, the anisotropic metric `Δ(s,t) = Σ|s_j − t_j|^{α_j}`,
//!   sampling lattices and Δ-dyadic cube decompositions.
//! * [`linalg`] and [`sampler`]: dense Cholesky / symmetric eigen solvers and
//!   exact Gaussian sampling on grids (with a Kronecker fast path for
//!   fractional Brownian sheets and the conditional split `X = X¹ + X²`).
//! * [`targets`] and [`matrixproc`]: target sets with r-neighborhood volumes and
//!   Minkowski fits, and matrix-valued processes with their eigenvalue paths.
//! * [`labs`]: Monte Carlo estimators and covering diagnostics built on the
//!   layers above.
//!
//! All randomness flows through [`rng::RngSeed`], so every experiment is
//! reproducible from `(configuration, master seed)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod digest;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod labs;
pub mod linalg;
pub mod matrixproc;
pub mod rng;
pub mod sampler;
pub mod targets;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{AnisotropicMetric, DyadicCube, GridSpec, Rectangle};
pub use kernels::{AxisMap, HurstVector, Kernel, KernelVariant, Profile};
pub use linalg::{Cholesky, HermMatrix, JitterPolicy, SymMatrix};
pub use matrixproc::{Beta, EigenPath, EnsembleSpec, MatrixPath};
pub use rng::RngSeed;
pub use sampler::{ConditionalSplit, FieldSample, Sampler};
pub use targets::{MinkowskiFit, PolarityVerdict, TargetSet};

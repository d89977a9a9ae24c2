//! Monte Carlo experiments: hitting and collision probabilities, regime
//! sweeps, local and global oscillation moduli, good-cube coverings and
//! φ-mass diagnostics.
//!
//! Replicate `r` always draws from `seed.replicate(r)`, so results do not
//! depend on the number of worker threads. A failing replicate aborts its
//! whole batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::statistics::{Data, OrderStatistics};

use crate::digest::config_digest;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{delta_diameter, dyadic_decompose, DyadicCube, GridSpec};
use crate::kernels::Kernel;
use crate::matrixproc::{pointwise_k_gap, Beta, EnsembleSpec, MatrixSampler, MatrixWork};
use crate::rng::RngSeed;
use crate::sampler::{anchor_weights, ConditionalSplit, SampleWork, Sampler};
use crate::targets::{linear_fit, TargetSet};

/// Monte Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n: usize,
    pub config_digest: String,
}

impl MCEstimate {
    pub fn from_count(hits: usize, n: usize, config_digest: String) -> Self {
        let p = hits as f64 / n as f64;
        MCEstimate {
            p_hat: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
            config_digest,
        }
    }
}

fn check_replicates(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("n", "need at least one replicate"))
    } else {
        Ok(())
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "epsilon",
            format!("must be positive, got {eps}"),
        ))
    }
}

/// Runs `f` on replicates `0..n` in parallel, preserving order.
pub fn run_replicates<T, W, I, F>(n: usize, seed: RngSeed, init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> W + Sync + Send,
    F: Fn(&mut W, RngSeed) -> Result<T> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map_init(init, |w, r| f(w, seed.replicate(r as u64)))
        .collect()
}

/// A finest grid plus the positions of every requested grid inside it.
#[derive(Debug, Clone)]
pub struct Refinements {
    pub fine: GridSpec,
    pub grids: Vec<GridSpec>,
    subsets: Vec<Vec<usize>>,
}

impl Refinements {
    /// All grids must share a rectangle and nest inside the largest one.
    pub fn new(grids: &[GridSpec]) -> Result<Self> {
        let fine = grids
            .iter()
            .max_by_key(|g| g.len())
            .ok_or_else(|| Error::invalid("refinements", "need at least one grid"))?
            .clone();
        let subsets = grids
            .iter()
            .map(|g| g.embedding_in(&fine))
            .collect::<Result<Vec<_>>>()?;
        Ok(Refinements {
            fine,
            grids: grids.to_vec(),
            subsets,
        })
    }

    /// Minimum of `values` (indexed on the fine grid) over each grid.
    pub fn minima(&self, values: &[f64]) -> Vec<f64> {
        self.subsets
            .iter()
            .map(|s| s.iter().map(|i| values[*i]).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Per replicate and grid: `min_t d(F, X(t))`. Rows are replicates.
pub fn hitting_min_distances(
    kernel: &Kernel,
    grids: &[GridSpec],
    target: &TargetSet,
    n: usize,
    seed: RngSeed,
) -> Result<Vec<Vec<f64>>> {
    check_replicates(n)?;
    target.validate()?;
    let refs = Refinements::new(grids)?;
    let sampler = Sampler::new(kernel, &refs.fine)?;
    let d = target.ambient_dim();
    let len = refs.fine.len();
    run_replicates(
        n,
        seed,
        || {
            (
                SampleWork::default(),
                vec![0.0; d * len],
                vec![0.0; len],
                vec![0.0; d],
            )
        },
        |(work, values, dist, x), s| {
            sampler.draw_into(d, s, work, values);
            for i in 0..len {
                for c in 0..d {
                    x[c] = values[c * len + i];
                }
                dist[i] = target.distance_unchecked(x);
            }
            Ok(refs.minima(dist))
        },
    )
}

/// `P(min_t d(F, X(t)) ≤ ε)` over the grid.
pub fn estimate_hitting_probability(
    kernel: &Kernel,
    grid: &GridSpec,
    target: &TargetSet,
    epsilon: f64,
    n: usize,
    seed: RngSeed,
) -> Result<MCEstimate> {
    check_epsilon(epsilon)?;
    let mins = hitting_min_distances(kernel, std::slice::from_ref(grid), target, n, seed)?;
    let digest = config_digest(&json!({
        "experiment": "hitting",
        "kernel": kernel,
        "grid": grid,
        "target": target,
        "epsilon": epsilon,
        "n": n,
        "seed": seed,
    }));
    let hits = mins.iter().filter(|m| m[0] <= epsilon).count();
    Ok(MCEstimate::from_count(hits, n, digest))
}

/// One cell of an (ε, grid) table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Position in the refinement list.
    pub refinement: usize,
    pub grid_points: usize,
    pub estimate: MCEstimate,
}

fn tabulate(
    minima: &[Vec<f64>],
    epsilons: &[f64],
    grids: &[GridSpec],
    digest: impl Fn(f64, usize) -> String,
) -> Vec<SweepRow> {
    let n = minima.len();
    let mut rows = Vec::with_capacity(epsilons.len() * grids.len());
    for (g, grid) in grids.iter().enumerate() {
        for &eps in epsilons {
            let hits = minima.iter().filter(|m| m[g] <= eps).count();
            rows.push(SweepRow {
                epsilon: eps,
                refinement: g,
                grid_points: grid.len(),
                estimate: MCEstimate::from_count(hits, n, digest(eps, g)),
            });
        }
    }
    rows
}

/// Hitting probabilities for every `(ε, grid)` from one set of replicates.
pub fn hitting_sweep(
    kernel: &Kernel,
    grids: &[GridSpec],
    target: &TargetSet,
    epsilons: &[f64],
    n: usize,
    seed: RngSeed,
) -> Result<Vec<SweepRow>> {
    epsilons.iter().try_for_each(|e| check_epsilon(*e))?;
    let mins = hitting_min_distances(kernel, grids, target, n, seed)?;
    Ok(tabulate(&mins, epsilons, grids, |eps, g| {
        config_digest(&json!({
            "experiment": "hitting",
            "kernel": kernel,
            "grid": grids[g],
            "target": target,
            "epsilon": eps,
            "n": n,
            "seed": seed,
        }))
    }))
}

/// Intercept of the least-squares line through `(ε, p̂)`.
pub fn extrapolate_to_zero(epsilons: &[f64], p_hat: &[f64]) -> Result<f64> {
    check_dim(epsilons.len(), p_hat.len())?;
    if epsilons.len() < 2 {
        return Err(Error::invalid(
            "epsilons",
            "need at least two values to extrapolate",
        ));
    }
    Ok(linear_fit(epsilons, p_hat).1)
}

/// `(k+2)(k−1)/2` for β = 1 and `k² − 1` for β = 2.
pub fn collision_threshold(beta: Beta, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("k", format!("need k ≥ 2, got {k}")));
    }
    let k = k as f64;
    Ok(match beta {
        Beta::One => (k + 2.0) * (k - 1.0) / 2.0,
        Beta::Two => k * k - 1.0,
    })
}

/// Per replicate and grid: the smallest k-gap of the eigenvalue path.
pub fn collision_min_gaps(
    spec: &EnsembleSpec,
    grids: &[GridSpec],
    k: usize,
    n: usize,
    seed: RngSeed,
) -> Result<Vec<Vec<f64>>> {
    check_replicates(n)?;
    if !(2..=spec.dim).contains(&k) {
        return Err(Error::invalid(
            "k",
            format!("need 2 ≤ k ≤ {}, got {k}", spec.dim),
        ));
    }
    let refs = Refinements::new(grids)?;
    let sampler = MatrixSampler::new(spec, &refs.fine)?;
    let d = spec.dim;
    let len = refs.fine.len();
    run_replicates(
        n,
        seed,
        || (MatrixWork::default(), vec![0.0; len * d], vec![0.0; len]),
        |(work, eig, gaps), s| {
            sampler.eigenvalues_into(s, work, eig)?;
            pointwise_k_gap(eig, d, k, gaps)?;
            Ok(refs.minima(gaps))
        },
    )
}

pub fn estimate_collision_probability(
    spec: &EnsembleSpec,
    grid: &GridSpec,
    k: usize,
    epsilon: f64,
    n: usize,
    seed: RngSeed,
) -> Result<MCEstimate> {
    check_epsilon(epsilon)?;
    let gaps = collision_min_gaps(spec, std::slice::from_ref(grid), k, n, seed)?;
    let hits = gaps.iter().filter(|g| g[0] <= epsilon).count();
    let digest = collision_digest(spec, grid, k, epsilon, n, seed);
    Ok(MCEstimate::from_count(hits, n, digest))
}

/// Collision probabilities for every `(ε, grid)` from one set of replicates.
pub fn collision_sweep(
    spec: &EnsembleSpec,
    grids: &[GridSpec],
    k: usize,
    epsilons: &[f64],
    n: usize,
    seed: RngSeed,
) -> Result<Vec<SweepRow>> {
    epsilons.iter().try_for_each(|e| check_epsilon(*e))?;
    let gaps = collision_min_gaps(spec, grids, k, n, seed)?;
    Ok(tabulate(&gaps, epsilons, grids, |eps, g| {
        collision_digest(spec, &grids[g], k, eps, n, seed)
    }))
}

fn collision_digest(
    spec: &EnsembleSpec,
    grid: &GridSpec,
    k: usize,
    eps: f64,
    n: usize,
    seed: RngSeed,
) -> String {
    config_digest(&json!({
        "experiment": "collision",
        "ensemble": spec,
        "grid": grid,
        "k": k,
        "epsilon": eps,
        "n": n,
        "seed": seed,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    /// Closed-form comparison of `Q` with the collision threshold.
    pub fn classify(q: f64, threshold: f64) -> Self {
        if (q - threshold).abs() <= 1e-9 {
            Regime::Critical
        } else if q > threshold {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionVerdict {
    pub q: f64,
    pub threshold: f64,
    pub regime: Regime,
    pub estimates: Vec<SweepRow>,
    /// Per refinement: slope of `log p̂` against `log ε` over the cells with
    /// `p̂ > 0`; `None` when fewer than two such cells exist.
    pub trend_slopes: Vec<Option<f64>>,
    pub note: String,
}

impl CollisionVerdict {
    /// Estimates of one refinement in the order of the ε sweep.
    pub fn column(&self, refinement: usize) -> Vec<&SweepRow> {
        self.estimates
            .iter()
            .filter(|r| r.refinement == refinement)
            .collect()
    }
}

fn check_sweep(epsilons: &[f64]) -> Result<()> {
    epsilons.iter().try_for_each(|e| check_epsilon(*e))?;
    if epsilons.len() < 3 {
        return Err(Error::invalid("epsilons", "need at least 3 values"));
    }
    if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::invalid("epsilons", "must be strictly decreasing"));
    }
    if epsilons[0] / epsilons[epsilons.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::invalid("epsilons", "must span at least two decades"));
    }
    Ok(())
}

/// Collision estimates over an ε sweep and a sequence of grid refinements,
/// with the regime implied by `Q` against the threshold.
pub fn regime_sweep(
    spec: &EnsembleSpec,
    k: usize,
    epsilons: &[f64],
    refinements: &[GridSpec],
    n: usize,
    seed: RngSeed,
) -> Result<CollisionVerdict> {
    check_sweep(epsilons)?;
    let q = spec.kernel.q();
    let threshold = collision_threshold(spec.beta, k)?;
    let regime = Regime::classify(q, threshold);
    let gaps = collision_min_gaps(spec, refinements, k, n, seed)?;
    let estimates = tabulate(&gaps, epsilons, refinements, |eps, g| {
        collision_digest(spec, &refinements[g], k, eps, n, seed)
    });
    let trend_slopes = (0..refinements.len())
        .map(|g| {
            let (x, y): (Vec<f64>, Vec<f64>) = estimates
                .iter()
                .filter(|r| r.refinement == g && r.estimate.p_hat > 0.0)
                .map(|r| (r.epsilon.ln(), r.estimate.p_hat.ln()))
                .unzip();
            (x.len() >= 2).then(|| linear_fit(&x, &y).0)
        })
        .collect();
    let note = match regime {
        Regime::Supercritical => "Q above threshold: k-collisions occur with positive probability".to_string(),
        Regime::Subcritical => "Q below threshold: no k-collisions almost surely".to_string(),
        Regime::Critical => {
            "Q equals threshold: no k-collisions almost surely; a Monte Carlo trend can support but never confirm probability zero"
                .to_string()
        }
    };
    Ok(CollisionVerdict {
        q,
        threshold,
        regime,
        estimates,
        trend_slopes,
        note,
    })
}

/// Empirical quantile (continuous, statrs convention).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    Data::new(values.to_vec()).quantile(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        Quantiles {
            p50: quantile(values, 0.5),
            p90: quantile(values, 0.9),
            p99: quantile(values, 0.99),
        }
    }
}

/// `log log x`, defined for `x > e`.
fn log_log(x: f64) -> f64 {
    x.ln().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub r_grid: Vec<f64>,
    pub q: f64,
    /// Probe points after snapping to the grid.
    pub probes: Vec<Vec<f64>>,
    /// Grid points in each ball, `[probe][radius]` (centre included).
    pub ball_sizes: Vec<Vec<usize>>,
    /// Normalized minimal oscillation, `[replicate][probe]`.
    pub statistics: Vec<f64>,
    pub quantiles: Quantiles,
    /// 90th percentile over the first half of the replicates.
    pub fitted_constant: f64,
    /// Fraction of the remaining replicates above the fitted constant.
    pub violation_fraction: f64,
}

fn nearest_grid_index(grid: &GridSpec, p: &[f64]) -> Result<usize> {
    check_dim(grid.dim(), p.len())?;
    if !grid.rect().contains(p, 1e-12) {
        return Err(Error::invalid(
            "probes",
            format!("probe {p:?} lies outside the grid rectangle"),
        ));
    }
    let idx: Vec<usize> = (0..grid.dim())
        .map(|j| {
            let h = grid.spacing(j);
            (((p[j] - grid.rect().lower()[j]) / h).round() as usize).min(grid.counts()[j] - 1)
        })
        .collect();
    Ok(grid.flat_index(&idx))
}

/// Largest `|X(s) − X(t)|` over index pairs, Euclidean over components.
fn max_pair_distance(values: &[f64], len: usize, components: usize, indices: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            let mut s = 0.0;
            for c in 0..components {
                let diff = values[c * len + i] - values[c * len + j];
                s += diff * diff;
            }
            best = best.max(s);
        }
    }
    best.sqrt()
}

/// Largest `|X(s) − X(t)|` with `t` fixed.
fn max_distance_from(
    values: &[f64],
    len: usize,
    components: usize,
    t: usize,
    indices: &[usize],
) -> f64 {
    let mut best = 0.0f64;
    for &i in indices {
        let mut s = 0.0;
        for c in 0..components {
            let diff = values[c * len + i] - values[c * len + t];
            s += diff * diff;
        }
        best = best.max(s);
    }
    best.sqrt()
}

/// Local oscillation scan around probe points: for each replicate and probe
/// `t`, the minimum over `r ∈ {r0², 2r0², 4r0², …} ∩ (0, r0]` of
/// `sup_{Δ(s,t) < r} |X(s) − X(t)| / (r (log log 1/r)^{−1/Q})`.
pub fn oscillation_scan(
    kernel: &Kernel,
    grid: &GridSpec,
    components: usize,
    r0: f64,
    probes: &[Vec<f64>],
    n: usize,
    seed: RngSeed,
) -> Result<OscillationReport> {
    check_replicates(n)?;
    if !(r0 > 0.0 && r0 < (-1.0f64).exp()) {
        return Err(Error::invalid(
            "r0",
            "need 0 < r0 < 1/e so that log log 1/r is positive",
        ));
    }
    if components == 0 {
        return Err(Error::invalid("d", "need at least one component"));
    }
    if probes.is_empty() {
        return Err(Error::invalid("probes", "need at least one probe point"));
    }
    let metric = kernel.metric();
    check_dim(metric.dim(), grid.dim())?;
    let q = kernel.q();
    let mut r_grid = Vec::new();
    let mut r = r0 * r0;
    while r <= r0 * (1.0 + 1e-12) {
        r_grid.push(r);
        r *= 2.0;
    }
    let points = grid.points();
    let mut probe_idx = Vec::with_capacity(probes.len());
    let mut balls: Vec<Vec<Vec<usize>>> = Vec::with_capacity(probes.len());
    for p in probes {
        let t = nearest_grid_index(grid, p)?;
        let dist: Vec<f64> = points
            .iter()
            .map(|s| metric.delta_unchecked(s, &points[t]))
            .collect();
        let mut per_r = Vec::with_capacity(r_grid.len());
        for &r in &r_grid {
            let ball: Vec<usize> = (0..points.len()).filter(|i| dist[*i] < r).collect();
            if ball.len() < 2 {
                return Err(Error::EmptyBall {
                    radius: r,
                    index: t,
                });
            }
            per_r.push(ball);
        }
        probe_idx.push(t);
        balls.push(per_r);
    }
    let norms: Vec<f64> = r_grid
        .iter()
        .map(|r| r * log_log(1.0 / r).powf(-1.0 / q))
        .collect();
    let sampler = Sampler::new(kernel, grid)?;
    let len = grid.len();
    let rows = run_replicates(
        n,
        seed,
        || (SampleWork::default(), vec![0.0; components * len]),
        |(work, values), s| {
            sampler.draw_into(components, s, work, values);
            Ok(probe_idx
                .iter()
                .zip(&balls)
                .map(|(&t, per_r)| {
                    per_r
                        .iter()
                        .zip(&norms)
                        .map(|(ball, norm)| {
                            max_distance_from(values, len, components, t, ball) / norm
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .collect::<Vec<f64>>())
        },
    )?;
    let statistics: Vec<f64> = rows.into_iter().flatten().collect();
    let per_rep = probes.len();
    let half = (n / 2).max(1) * per_rep;
    let fitted_constant = quantile(&statistics[..half], 0.9);
    let holdout = if half < statistics.len() {
        &statistics[half..]
    } else {
        &statistics[..]
    };
    let violation_fraction =
        holdout.iter().filter(|v| **v > fitted_constant).count() as f64 / holdout.len() as f64;
    Ok(OscillationReport {
        r_grid,
        q,
        probes: probe_idx.iter().map(|i| grid.point(*i)).collect(),
        ball_sizes: balls
            .iter()
            .map(|b| b.iter().map(Vec::len).collect())
            .collect(),
        quantiles: Quantiles::of(&statistics),
        statistics,
        fitted_constant,
        violation_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub epsilon: f64,
    /// Lattice offsets with `Δ ≤ ε` (half stencil).
    pub offsets: usize,
    /// No grid pair lies within `ε`.
    pub empty: bool,
    pub max_ratio: Option<f64>,
    pub p99_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    /// Fraction of replicates whose ratio exceeds the fitted `K₄`.
    pub violation_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub rows: Vec<ModulusRow>,
    /// 99th-percentile ratio at the largest non-empty ε.
    pub k4: Option<f64>,
    /// `[ε][replicate]` ratios `sup |X(s) − X(t)| / (ε √log(1/ε))`.
    pub ratios: Vec<Vec<f64>>,
}

/// Half stencil of lattice offsets sorted by Δ, with their Δ values.
fn offset_stencil(grid: &GridSpec, alpha: &[f64], eps_max: f64) -> Vec<(Vec<isize>, f64)> {
    let dim = grid.dim();
    let reach: Vec<isize> = (0..dim)
        .map(|j| {
            let h = grid.spacing(j);
            ((eps_max.powf(1.0 / alpha[j]) / h).floor() as isize).min(grid.counts()[j] as isize - 1)
        })
        .collect();
    let mut out = Vec::new();
    let mut k: Vec<isize> = reach.iter().map(|r| -r).collect();
    loop {
        let first_nonzero = k.iter().find(|v| **v != 0);
        if matches!(first_nonzero, Some(v) if *v > 0) {
            let delta: f64 = (0..dim)
                .map(|j| (k[j].unsigned_abs() as f64 * grid.spacing(j)).powf(alpha[j]))
                .sum();
            if delta <= eps_max * (1.0 + 1e-12) {
                out.push((k.clone(), delta));
            }
        }
        let mut j = dim;
        loop {
            if j == 0 {
                out.sort_by(|a, b| a.1.total_cmp(&b.1));
                return out;
            }
            j -= 1;
            if k[j] < reach[j] {
                k[j] += 1;
                break;
            }
            k[j] = -reach[j];
        }
    }
}

/// Empirical global modulus: for each ε, the supremum of `|X(s) − X(t)|`
/// over grid pairs with `Δ(s,t) ≤ ε`, divided by `ε √log(1/ε)`.
pub fn global_modulus_check(
    kernel: &Kernel,
    grid: &GridSpec,
    components: usize,
    eps_grid: &[f64],
    n: usize,
    seed: RngSeed,
) -> Result<ModulusReport> {
    check_replicates(n)?;
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
        return Err(Error::invalid("eps_grid", "values must lie in (0, 1/2)"));
    }
    if components == 0 {
        return Err(Error::invalid("d", "need at least one component"));
    }
    let metric = kernel.metric();
    check_dim(metric.dim(), grid.dim())?;
    let eps_max = eps_grid.iter().copied().fold(0.0, f64::max);
    let stencil = offset_stencil(grid, metric.alpha(), eps_max);
    let dim = grid.dim();
    let len = grid.len();
    let counts = grid.counts().to_vec();
    let multi: Vec<Vec<usize>> = (0..len).map(|i| grid.multi_index(i)).collect();
    let shifts: Vec<isize> = stencil
        .iter()
        .map(|(k, _)| {
            let mut stride = 1isize;
            let mut s = 0isize;
            for j in (0..dim).rev() {
                s += k[j] * stride;
                stride *= counts[j] as isize;
            }
            s
        })
        .collect();
    // offsets usable at each ε form a prefix of the sorted stencil
    let prefix: Vec<usize> = eps_grid
        .iter()
        .map(|e| {
            stencil
                .iter()
                .take_while(|(_, d)| *d <= e * (1.0 + 1e-12))
                .count()
        })
        .collect();
    let sampler = Sampler::new(kernel, grid)?;
    let per_rep = run_replicates(
        n,
        seed,
        || (SampleWork::default(), vec![0.0; components * len]),
        |(work, values), s| {
            sampler.draw_into(components, s, work, values);
            let mut running = Vec::with_capacity(stencil.len());
            let mut best = 0.0f64;
            for ((k, _), shift) in stencil.iter().zip(&shifts) {
                for (i, idx) in multi.iter().enumerate() {
                    if (0..dim).any(|j| {
                        let v = idx[j] as isize + k[j];
                        v < 0 || v >= counts[j] as isize
                    }) {
                        continue;
                    }
                    let t = (i as isize + shift) as usize;
                    let mut sq = 0.0;
                    for c in 0..components {
                        let diff = values[c * len + i] - values[c * len + t];
                        sq += diff * diff;
                    }
                    best = best.max(sq);
                }
                running.push(best.sqrt());
            }
            Ok(prefix
                .iter()
                .zip(eps_grid)
                .map(|(&m, e)| {
                    if m == 0 {
                        f64::NAN
                    } else {
                        running[m - 1] / (e * (1.0 / e).ln().sqrt())
                    }
                })
                .collect::<Vec<f64>>())
        },
    )?;
    let ratios: Vec<Vec<f64>> = (0..eps_grid.len())
        .map(|e| per_rep.iter().map(|r| r[e]).collect())
        .collect();
    let k4 = eps_grid
        .iter()
        .enumerate()
        .filter(|(e, _)| prefix[*e] > 0)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(e, _)| quantile(&ratios[e], 0.99));
    let rows = eps_grid
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| {
            let empty = prefix[e] == 0;
            let r = &ratios[e];
            ModulusRow {
                epsilon,
                offsets: prefix[e],
                empty,
                max_ratio: (!empty).then(|| r.iter().copied().fold(0.0, f64::max)),
                p99_ratio: (!empty).then(|| quantile(r, 0.99)),
                median_ratio: (!empty).then(|| quantile(r, 0.5)),
                violation_fraction: k4
                    .filter(|_| !empty)
                    .map(|k| r.iter().filter(|v| **v > k).count() as f64 / r.len() as f64),
            }
        })
        .collect();
    Ok(ModulusReport { rows, k4, ratios })
}

/// `2^{−q} (log log 2^q)^{−1/Q}`: the scale of a good cube of order `q`.
pub fn good_cube_scale(q: u32, big_q: f64) -> Result<f64> {
    if q < 2 {
        return Err(Error::invalid(
            "q",
            "order must be at least 2 so that log log 2^q > 0",
        ));
    }
    let two_q = 2f64.powi(q as i32);
    Ok(log_log(two_q).powf(-1.0 / big_q) / two_q)
}

/// Grid indices inside each closed cube (boundary points belong to every
/// cube that touches them).
pub fn cube_members(grid: &GridSpec, cubes: &[DyadicCube]) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); cubes.len()];
    if cubes.is_empty() {
        return members;
    }
    let dim = grid.dim();
    let rect = grid.rect();
    let per_axis: Vec<usize> = (0..dim)
        .map(|j| cubes.iter().map(|c| c.index[j]).max().unwrap_or(0) + 1)
        .collect();
    // candidate cube indices per axis and lattice coordinate
    let candidates: Vec<Vec<Vec<usize>>> = (0..dim)
        .map(|j| {
            let m = per_axis[j];
            let lo = rect.lower()[j];
            let side = rect.side(j);
            let tol = 1e-12 * side;
            (0..grid.counts()[j])
                .map(|i| {
                    let x = grid.coord(j, i);
                    let guess = (((x - lo) / side) * m as f64).floor() as isize;
                    (guess - 1..=guess + 1)
                        .filter(|c| *c >= 0 && (*c as usize) < m)
                        .map(|c| c as usize)
                        .filter(|c| {
                            let a = lo + side * (*c as f64 / m as f64);
                            let b = lo + side * ((*c + 1) as f64 / m as f64);
                            x >= a - tol && x <= b + tol
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    for flat in 0..grid.len() {
        let idx = grid.multi_index(flat);
        let mut combos: Vec<usize> = vec![0];
        for j in 0..dim {
            let m = per_axis[j];
            let next: Vec<usize> = combos
                .iter()
                .flat_map(|base| candidates[j][idx[j]].iter().map(move |c| base * m + c))
                .collect();
            combos = next;
        }
        for c in combos {
            members[c].push(flat);
        }
    }
    members
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodCubeMap {
    pub order: u32,
    /// `constant · 2^{−q} (log log 2^q)^{−1/Q}`.
    pub threshold: f64,
    pub cubes: Vec<DyadicCube>,
    /// Grid indices in each cube.
    pub members: Vec<Vec<usize>>,
    /// `sup_{u,v ∈ cube} |X¹(u) − X¹(v)|`.
    pub oscillation: Vec<f64>,
    pub good: Vec<bool>,
    pub good_fraction: f64,
}

fn dyadic_cubes_with_members(
    kernel: &Kernel,
    grid: &GridSpec,
    q: u32,
) -> Result<(Vec<DyadicCube>, Vec<Vec<usize>>)> {
    let cubes = dyadic_decompose(grid.rect(), &kernel.metric(), q)?;
    let members = cube_members(grid, &cubes);
    if let Some((index, m)) = members.iter().enumerate().find(|(_, m)| m.len() < 2) {
        return Err(Error::SparseCube {
            index,
            count: m.len(),
        });
    }
    Ok((cubes, members))
}

/// Marks the order-`q` dyadic cubes on which the perturbation part `X¹`
/// oscillates by at most `constant · 2^{−q} (log log 2^q)^{−1/Q}`.
pub fn good_cube_classify(split: &ConditionalSplit, q: u32, constant: f64) -> Result<GoodCubeMap> {
    if !(constant >= 0.0 && constant.is_finite()) {
        return Err(Error::invalid("constant", "must be finite and nonnegative"));
    }
    let x1 = &split.x1;
    let scale = good_cube_scale(q, x1.kernel.q())?;
    let (cubes, members) = dyadic_cubes_with_members(&x1.kernel, &x1.grid, q)?;
    let len = x1.grid.len();
    let oscillation: Vec<f64> = members
        .iter()
        .map(|m| max_pair_distance(&x1.values, len, x1.components, m))
        .collect();
    let threshold = constant * scale;
    let good: Vec<bool> = oscillation.iter().map(|o| *o <= threshold).collect();
    let good_fraction = good.iter().filter(|g| **g).count() as f64 / good.len() as f64;
    Ok(GoodCubeMap {
        order: q,
        threshold,
        cubes,
        members,
        oscillation,
        good,
        good_fraction,
    })
}

/// Good cubes whose image comes within the threshold of `F`:
/// `min_{u ∈ cube} d(F, X(u)) ≤ threshold`. `values` is the full field
/// `[component][grid index]`.
pub fn select_covering(
    map: &GoodCubeMap,
    values: &[f64],
    components: usize,
    target: &TargetSet,
) -> Result<Vec<usize>> {
    check_dim(components, target.ambient_dim())?;
    let len = values.len() / components;
    let mut x = vec![0.0; components];
    Ok((0..map.cubes.len())
        .filter(|&c| {
            map.good[c]
                && map.members[c].iter().any(|&i| {
                    for (k, v) in x.iter_mut().enumerate() {
                        *v = values[k * len + i];
                    }
                    target.distance_unchecked(&x) <= map.threshold
                })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiMass {
    pub value: f64,
    pub used: usize,
    /// Diameters at or above `e^{−e}`, where `log log 1/s` is not positive.
    pub excluded: usize,
}

/// `φ(s) = s^{Q−d+θ} (log log 1/s)^{(d−θ)/Q − κ}`.
pub fn phi(s: f64, q: f64, d: usize, theta: f64, kappa: f64) -> f64 {
    let d = d as f64;
    s.powf(q - d + theta) * log_log(1.0 / s).powf((d - theta) / q - kappa)
}

/// `Σ φ(diameter)` over a covering given by its Δ-diameters.
pub fn phi_mass(diameters: &[f64], q: f64, d: usize, theta: f64, kappa: f64) -> Result<PhiMass> {
    if theta < 0.0 || theta > d as f64 - q + 1e-12 {
        return Err(Error::invalid(
            "theta",
            format!("need 0 ≤ θ ≤ d − Q = {}", d as f64 - q),
        ));
    }
    let limit = (-std::f64::consts::E).exp();
    let mut mass = PhiMass {
        value: 0.0,
        used: 0,
        excluded: 0,
    };
    for &s in diameters {
        if !(s > 0.0) || s >= limit {
            mass.excluded += 1;
        } else {
            mass.value += phi(s, q, d, theta, kappa);
            mass.used += 1;
        }
    }
    if mass.excluded > 0 {
        log::warn!(
            "phi_mass: excluded {} cube(s) with diameter outside (0, e^-e)",
            mass.excluded
        );
    }
    Ok(mass)
}

/// Setup for [`covering_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringConfig {
    pub kernel: Kernel,
    pub grid: GridSpec,
    /// Number of field components `d`.
    pub components: usize,
    pub anchor: Vec<f64>,
    pub target: TargetSet,
    pub orders: Vec<u32>,
    /// Good-cube constant; fitted when absent.
    pub constant: Option<f64>,
    pub theta: f64,
    pub kappa: f64,
    pub n: usize,
    pub seed: RngSeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringRow {
    pub order: u32,
    pub threshold: f64,
    pub cube_diameter: f64,
    pub mean_good_fraction: f64,
    pub mean_selected: f64,
    pub mean_phi_mass: f64,
    pub phi_mass_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringProfile {
    pub q: f64,
    pub constant: f64,
    /// True when the constant was fitted as the median normalized cube
    /// oscillation at the lowest order.
    pub constant_fitted: bool,
    pub rows: Vec<CoveringRow>,
    pub config_digest: String,
}

/// Mean φ-mass of the good-cube covering of `{t : X(t) near F}` per order.
pub fn covering_profile(cfg: &CoveringConfig) -> Result<CoveringProfile> {
    check_replicates(cfg.n)?;
    check_dim(cfg.components, cfg.target.ambient_dim())?;
    if cfg.orders.is_empty() {
        return Err(Error::invalid("orders", "need at least one order"));
    }
    let q = cfg.kernel.q();
    let metric = cfg.kernel.metric();
    let scales: Vec<f64> = cfg
        .orders
        .iter()
        .map(|o| good_cube_scale(*o, q))
        .collect::<Result<_>>()?;
    let layouts: Vec<(Vec<DyadicCube>, Vec<Vec<usize>>)> = cfg
        .orders
        .iter()
        .map(|o| dyadic_cubes_with_members(&cfg.kernel, &cfg.grid, *o))
        .collect::<Result<_>>()?;
    let diameters: Vec<f64> = layouts
        .iter()
        .map(|(c, _)| delta_diameter(&c[0], &metric))
        .collect();
    // validates θ and warns about oversized cubes once
    let phis: Vec<f64> = diameters
        .iter()
        .map(|s| phi_mass(&[*s], q, cfg.components, cfg.theta, cfg.kappa).map(|m| m.value))
        .collect::<Result<_>>()?;
    let weights = anchor_weights(&cfg.kernel, &cfg.grid, &cfg.anchor)?;
    let on_grid = (0..cfg.grid.len()).find(|i| cfg.grid.point(*i) == cfg.anchor);
    let sampler = match on_grid {
        Some(_) => Sampler::new(&cfg.kernel, &cfg.grid)?,
        None => Sampler::with_anchor(&cfg.kernel, &cfg.grid, &cfg.anchor)?,
    };
    let len = cfg.grid.len();
    let p = sampler.points_len();
    let d = cfg.components;
    // per replicate and order: (oscillation of X¹, min distance of X to F) per cube
    let stats = run_replicates(
        cfg.n,
        cfg.seed,
        || {
            (
                SampleWork::default(),
                vec![0.0; d * p],
                vec![0.0; d * len],
                vec![0.0; len],
            )
        },
        |(work, raw, x1, dist), s| {
            sampler.draw_into(d, s, work, raw);
            let mut x = vec![0.0; d];
            for c in 0..d {
                let at_anchor = match on_grid {
                    Some(a) => raw[c * p + a],
                    None => raw[c * p + len],
                };
                for i in 0..len {
                    x1[c * len + i] = raw[c * p + i] - weights[i] * at_anchor;
                }
            }
            for i in 0..len {
                for c in 0..d {
                    x[c] = raw[c * p + i];
                }
                dist[i] = cfg.target.distance_unchecked(&x);
            }
            Ok(layouts
                .iter()
                .map(|(_, members)| {
                    members
                        .iter()
                        .map(|m| {
                            let osc = max_pair_distance(x1, len, d, m);
                            let near = m.iter().map(|i| dist[*i]).fold(f64::INFINITY, f64::min);
                            (osc, near)
                        })
                        .collect::<Vec<(f64, f64)>>()
                })
                .collect::<Vec<_>>())
        },
    )?;
    let (constant, constant_fitted) = match cfg.constant {
        Some(c) => (c, false),
        None => {
            let lowest = (0..cfg.orders.len())
                .min_by_key(|i| cfg.orders[*i])
                .unwrap_or(0);
            let normalized: Vec<f64> = stats
                .iter()
                .flat_map(|rep| rep[lowest].iter().map(|(o, _)| o / scales[lowest]))
                .collect();
            (quantile(&normalized, 0.5), true)
        }
    };
    let n = cfg.n as f64;
    let rows = cfg
        .orders
        .iter()
        .enumerate()
        .map(|(k, &order)| {
            let threshold = constant * scales[k];
            let cubes = layouts[k].0.len() as f64;
            let mut good_sum = 0.0;
            let mut sel_sum = 0.0;
            let masses: Vec<f64> = stats
                .iter()
                .map(|rep| {
                    let good = rep[k].iter().filter(|(o, _)| *o <= threshold).count();
                    let selected = rep[k]
                        .iter()
                        .filter(|(o, near)| *o <= threshold && *near <= threshold)
                        .count();
                    good_sum += good as f64 / cubes;
                    sel_sum += selected as f64;
                    selected as f64 * phis[k]
                })
                .collect();
            let mean = masses.iter().sum::<f64>() / n;
            let var = if cfg.n > 1 {
                masses.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            CoveringRow {
                order,
                threshold,
                cube_diameter: diameters[k],
                mean_good_fraction: good_sum / n,
                mean_selected: sel_sum / n,
                mean_phi_mass: mean,
                phi_mass_stderr: (var / n).sqrt(),
            }
        })
        .collect();
    Ok(CoveringProfile {
        q,
        constant,
        constant_fitted,
        rows,
        config_digest: config_digest(cfg),
    })
}

//! Target sets `F ⊂ ℝᵈ`: Euclidean distance, r-neighborhood volumes,
//! Minkowski exponent fits and the polarity classification.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{NormalStream, RngSeed};

/// QMC node count for neighborhood volumes without a closed form.
pub const VOLUME_NODES: usize = 1 << 16;
const VOLUME_SHIFTS: usize = 16;
const VOLUME_SEED: u64 = 0x5EED_F00D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    Point {
        x: Vec<f64>,
    },
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// Axis-aligned box; degenerate sides are allowed.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Sampled stand-in for a set without closed-form geometry. `mesh` is the
    /// covering radius of the cloud, i.e. the distance error it carries.
    PointCloud {
        points: Vec<Vec<f64>>,
        mesh: f64,
    },
    Union {
        members: Vec<TargetSet>,
    },
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball in `ℝᵏ`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(k - 2) * 2.0 * std::f64::consts::PI / k as f64,
    }
}

impl TargetSet {
    pub fn point(x: Vec<f64>) -> Result<Self> {
        let t = TargetSet::Point { x };
        t.validate()?;
        Ok(t)
    }

    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let t = TargetSet::Segment { a, b };
        t.validate()?;
        Ok(t)
    }

    pub fn cuboid(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let t = TargetSet::Box { lower, upper };
        t.validate()?;
        Ok(t)
    }

    pub fn cloud(points: Vec<Vec<f64>>, mesh: f64) -> Result<Self> {
        let t = TargetSet::PointCloud { points, mesh };
        t.validate()?;
        Ok(t)
    }

    pub fn union(members: Vec<TargetSet>) -> Result<Self> {
        let t = TargetSet::Union { members };
        t.validate()?;
        Ok(t)
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            TargetSet::Point { x } => x.len(),
            TargetSet::Segment { a, .. } => a.len(),
            TargetSet::Box { lower, .. } => lower.len(),
            TargetSet::PointCloud { points, .. } => points.first().map_or(0, Vec::len),
            TargetSet::Union { members } => members.first().map_or(0, TargetSet::ambient_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let d = self.ambient_dim();
        if d == 0 {
            return match self {
                TargetSet::Union { .. } => Err(Error::EmptyTarget),
                _ => Err(Error::invalid(
                    "target",
                    "ambient dimension must be at least 1",
                )),
            };
        }
        match self {
            TargetSet::Point { x } if !finite(x) => {
                Err(Error::invalid("target", "non-finite point"))
            }
            TargetSet::Segment { a, b } => {
                check_dim(d, b.len())?;
                if finite(a) && finite(b) {
                    Ok(())
                } else {
                    Err(Error::invalid("target", "non-finite segment endpoint"))
                }
            }
            TargetSet::Box { lower, upper } => {
                check_dim(d, upper.len())?;
                if lower
                    .iter()
                    .zip(upper)
                    .all(|(l, u)| l.is_finite() && u.is_finite() && l <= u)
                {
                    Ok(())
                } else {
                    Err(Error::invalid("target", "box needs finite lower ≤ upper"))
                }
            }
            TargetSet::PointCloud { points, mesh } => {
                if !(*mesh > 0.0 && mesh.is_finite()) {
                    return Err(Error::invalid("target.mesh", "cloud mesh must be positive"));
                }
                for p in points {
                    check_dim(d, p.len())?;
                    if !finite(p) {
                        return Err(Error::invalid("target", "non-finite cloud point"));
                    }
                }
                Ok(())
            }
            TargetSet::Union { members } => {
                for m in members {
                    m.validate()?;
                    check_dim(d, m.ambient_dim())?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Distance error carried by sampled members (zero for exact shapes).
    pub fn mesh(&self) -> f64 {
        match self {
            TargetSet::PointCloud { mesh, .. } => *mesh,
            TargetSet::Union { members } => members.iter().map(TargetSet::mesh).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// `d(x, F) = inf_{y ∈ F} |x − y|`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        if matches!(self, TargetSet::Union { members } if members.is_empty()) {
            return Err(Error::EmptyTarget);
        }
        check_dim(self.ambient_dim(), x.len())?;
        Ok(self.distance_unchecked(x))
    }

    /// Distance without dimension checks; callers guarantee `x.len() == d`.
    pub fn distance_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            TargetSet::Point { x: p } => norm(p.iter().zip(x).map(|(a, b)| a - b)),
            TargetSet::Segment { a, b } => {
                let len_sq: f64 = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
                let t = if len_sq > 0.0 {
                    let dot: f64 = a
                        .iter()
                        .zip(b)
                        .zip(x)
                        .map(|((p, q), y)| (y - p) * (q - p))
                        .sum();
                    (dot / len_sq).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                norm(
                    a.iter()
                        .zip(b)
                        .zip(x)
                        .map(|((p, q), y)| y - (p + t * (q - p))),
                )
            }
            TargetSet::Box { lower, upper } => norm(
                lower
                    .iter()
                    .zip(upper)
                    .zip(x)
                    .map(|((l, u), y)| (l - y).max(0.0).max(y - u)),
            ),
            TargetSet::PointCloud { points, .. } => points
                .iter()
                .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
            TargetSet::Union { members } => members
                .iter()
                .map(|m| m.distance_unchecked(x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.ambient_dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut grow = |p: &[f64]| {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        };
        match self {
            TargetSet::Point { x } => grow(x),
            TargetSet::Segment { a, b } => {
                grow(a);
                grow(b);
            }
            TargetSet::Box { lower, upper } => {
                grow(lower);
                grow(upper);
            }
            TargetSet::PointCloud { points, .. } => points.iter().for_each(|p| grow(p)),
            TargetSet::Union { members } => {
                for m in members {
                    let (l, u) = m.bounding_box();
                    grow(&l);
                    grow(&u);
                }
            }
        }
        (lo, hi)
    }

    /// Closed-form `λ_d(F^{(r)})` when one exists.
    pub fn exact_neighborhood_volume(&self, r: f64) -> Option<f64> {
        let d = self.ambient_dim();
        match self {
            TargetSet::Point { .. } => Some(unit_ball_volume(d) * r.powi(d as i32)),
            TargetSet::Segment { a, b } => {
                let len = norm(a.iter().zip(b).map(|(p, q)| q - p));
                Some(
                    unit_ball_volume(d - 1) * len * r.powi(d as i32 - 1)
                        + unit_ball_volume(d) * r.powi(d as i32),
                )
            }
            TargetSet::Box { lower, upper } => {
                // Steiner formula: Σ_j κ_j r^j e_{d−j}(sides)
                let sides: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
                let e = elementary_symmetric(&sides);
                Some(
                    (0..=d)
                        .map(|j| unit_ball_volume(j) * r.powi(j as i32) * e[d - j])
                        .sum(),
                )
            }
            _ => None,
        }
    }
}

/// `e_0, …, e_n` of the given values.
fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (k, v) in values.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    /// Zero for closed forms.
    pub stderr: f64,
    pub exact: bool,
}

pub fn neighborhood_volume(target: &TargetSet, r: f64) -> Result<VolumeEstimate> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", "neighborhood radius must be positive"));
    }
    target.validate()?;
    if let Some(value) = target.exact_neighborhood_volume(r) {
        return Ok(VolumeEstimate {
            value,
            stderr: 0.0,
            exact: true,
        });
    }
    Ok(qmc_volumes(target, &[r], r)[0])
}

/// Generalized golden-ratio (R_d) increments.
fn kronecker_increments(d: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|j| phi.powi(-(j as i32))).collect()
}

/// Randomly shifted R_d quasi-Monte Carlo over the bounding box padded by
/// `pad`. Every radius is evaluated on the same nodes, so the estimates are
/// nondecreasing in `r`.
fn qmc_volumes(target: &TargetSet, radii: &[f64], pad: f64) -> Vec<VolumeEstimate> {
    let d = target.ambient_dim();
    let (mut lo, mut hi) = target.bounding_box();
    for j in 0..d {
        lo[j] -= pad;
        hi[j] += pad;
    }
    let box_volume: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
    let inc = kronecker_increments(d);
    let per_shift = VOLUME_NODES / VOLUME_SHIFTS;
    let mut shift_rng = NormalStream::new(RngSeed::new(VOLUME_SEED));
    let mut fractions = vec![vec![0.0; VOLUME_SHIFTS]; radii.len()];
    let mut node = vec![0.0; d];
    for s in 0..VOLUME_SHIFTS {
        let shift: Vec<f64> = (0..d).map(|_| shift_rng.next_uniform()).collect();
        let mut hits = vec![0usize; radii.len()];
        for i in 0..per_shift {
            for j in 0..d {
                let u = (shift[j] + (i as f64 + 1.0) * inc[j]).fract();
                node[j] = lo[j] + u * (hi[j] - lo[j]);
            }
            let dist = target.distance_unchecked(&node);
            for (h, r) in hits.iter_mut().zip(radii) {
                if dist <= *r {
                    *h += 1;
                }
            }
        }
        for (k, h) in hits.iter().enumerate() {
            fractions[k][s] = *h as f64 / per_shift as f64;
        }
    }
    fractions
        .iter()
        .map(|f| {
            let m = VOLUME_SHIFTS as f64;
            let mean = f.iter().sum::<f64>() / m;
            let var = f.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
            VolumeEstimate {
                value: box_volume * mean,
                stderr: box_volume * (var / m).sqrt(),
                exact: false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiFit {
    /// `d − slope`, clamped into `[0, d]`.
    pub theta_hat: f64,
    /// Least-squares slope of `log λ_d(F^{(r)})` against `log r`.
    pub slope: f64,
    /// Intercept of the same fit (log of the volume constant).
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub log_log_slope_residual: f64,
    pub r_grid: Vec<f64>,
    pub volumes: Vec<f64>,
    pub volume_stderr: Vec<f64>,
}

/// Least-squares `(slope, intercept, rms residual)` of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits the Minkowski exponent `θ` from `λ_d(F^{(r)}) ≈ C r^{d−θ}`.
///
/// `r_grid` must be strictly decreasing with at least 8 radii spanning two
/// decades. Double-logarithmic corrections are not fitted.
pub fn minkowski_fit(target: &TargetSet, r_grid: &[f64]) -> Result<MinkowskiFit> {
    target.validate()?;
    if r_grid.len() < 8 {
        return Err(Error::invalid("r_grid", "need at least 8 radii"));
    }
    if r_grid.windows(2).any(|w| !(w[0] > w[1])) || !(r_grid[r_grid.len() - 1] > 0.0) {
        return Err(Error::invalid(
            "r_grid",
            "radii must be positive and strictly decreasing",
        ));
    }
    if r_grid[0] / r_grid[r_grid.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::invalid(
            "r_grid",
            "radii must span at least two decades",
        ));
    }
    let estimates: Vec<VolumeEstimate> = if target.exact_neighborhood_volume(1.0).is_some() {
        r_grid
            .iter()
            .map(|r| VolumeEstimate {
                value: target.exact_neighborhood_volume(*r).unwrap_or(f64::NAN),
                stderr: 0.0,
                exact: true,
            })
            .collect()
    } else {
        qmc_volumes(target, r_grid, r_grid[0])
    };
    if let Some(k) = estimates.iter().position(|e| !(e.value > 0.0)) {
        return Err(Error::invalid(
            "r_grid",
            format!(
                "volume estimate vanished at r = {:e}; refine the cloud or raise r",
                r_grid[k]
            ),
        ));
    }
    let d = target.ambient_dim() as f64;
    let lx: Vec<f64> = r_grid.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = estimates.iter().map(|e| e.value.ln()).collect();
    let (slope, intercept, resid) = linear_fit(&lx, &ly);
    Ok(MinkowskiFit {
        theta_hat: (d - slope).clamp(0.0, d),
        slope,
        intercept,
        log_log_slope_residual: resid,
        r_grid: r_grid.to_vec(),
        volumes: estimates.iter().map(|e| e.value).collect(),
        volume_stderr: estimates.iter().map(|e| e.stderr).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarityVerdict {
    /// Hypotheses of the polarity theorem hold: `F` is a.s. not hit.
    PolarByTheorem,
    /// `d < Q`: points are hit with positive probability.
    NonpolarRegime,
    Inconclusive,
}

/// Classifies `(Q, d, θ, κ)`: polar when `d ≥ Q`, `0 ≤ θ ≤ d − Q` and
/// `0 ≤ κ < (d − θ)/Q`; nonpolar regime when `d < Q`.
pub fn polarity_classify(q: f64, d: usize, theta: f64, kappa: f64) -> PolarityVerdict {
    let d = d as f64;
    if d < q {
        PolarityVerdict::NonpolarRegime
    } else if (0.0..=d - q).contains(&theta) && kappa >= 0.0 && kappa < (d - theta) / q {
        PolarityVerdict::PolarByTheorem
    } else {
        PolarityVerdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn distance_examples() {
        assert_eq!(
            TargetSet::point(vec![0.0])
                .unwrap()
                .distance(&[3.0])
                .unwrap(),
            3.0
        );
        let seg = TargetSet::segment(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(seg.distance(&[0.5, 2.0]).unwrap(), 2.0);
        assert_eq!(seg.distance(&[3.0, 0.0]).unwrap(), 2.0);
        let b = TargetSet::cuboid(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.distance(&[0.3, 0.9]).unwrap(), 0.0);
        assert_eq!(b.distance(&[4.0, 5.0]).unwrap(), 5.0);
    }

    #[test]
    fn union_and_cloud() {
        let u = TargetSet::union(vec![
            TargetSet::point(vec![0.0, 0.0]).unwrap(),
            TargetSet::cloud(vec![vec![3.0, 0.0], vec![0.0, 5.0]], 0.1).unwrap(),
        ])
        .unwrap();
        assert_eq!(u.distance(&[2.5, 0.0]).unwrap(), 0.5);
        assert_eq!(u.mesh(), 0.1);
        assert!(matches!(
            TargetSet::Union { members: vec![] }.distance(&[0.0]),
            Err(Error::EmptyTarget)
        ));
        assert!(TargetSet::cloud(vec![vec![0.0]], 0.0).is_err());
        assert!(TargetSet::union(vec![
            TargetSet::point(vec![0.0]).unwrap(),
            TargetSet::point(vec![0.0, 1.0]).unwrap()
        ])
        .is_err());
    }

    #[test]
    fn closed_form_volumes() {
        let p = TargetSet::point(vec![0.0, 0.0]).unwrap();
        assert!((neighborhood_volume(&p, 1.0).unwrap().value - PI).abs() < 1e-15);
        let seg = TargetSet::segment(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let v = neighborhood_volume(&seg, 0.1).unwrap().value;
        assert!((v - (0.2 + 0.01 * PI)).abs() < 1e-15);
        assert!((v - 0.23142).abs() < 1e-5);
        let b = TargetSet::cuboid(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let v = neighborhood_volume(&b, 0.5).unwrap().value;
        assert!((v - (1.0 + 2.0 + PI * 0.25)).abs() < 1e-14);
        assert!(neighborhood_volume(&b, 0.0).is_err());
    }

    #[test]
    fn unit_balls() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn qmc_brackets_closed_forms() {
        // cloud of one point is a point; union of one box is a box
        for (shape, exact) in [
            (
                TargetSet::cloud(vec![vec![0.2, -0.1]], 1e-9).unwrap(),
                TargetSet::point(vec![0.2, -0.1]).unwrap(),
            ),
            (
                TargetSet::union(vec![
                    TargetSet::cuboid(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap()
                ])
                .unwrap(),
                TargetSet::cuboid(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap(),
            ),
        ] {
            for r in [0.05, 0.3] {
                let mc = neighborhood_volume(&shape, r).unwrap();
                let truth = exact.exact_neighborhood_volume(r).unwrap();
                assert!(!mc.exact);
                assert!(
                    (mc.value - truth).abs() <= 4.0 * mc.stderr.max(1e-4 * truth),
                    "r={r}: {} vs {truth} ± {}",
                    mc.value,
                    mc.stderr
                );
            }
        }
    }

    #[test]
    fn minkowski_examples() {
        let radii: Vec<f64> = (0..9)
            .map(|k| 1e-2 * 10f64.powf(-0.25 * k as f64))
            .collect();
        let fit = minkowski_fit(&TargetSet::point(vec![0.0; 3]).unwrap(), &radii).unwrap();
        assert!(fit.theta_hat.abs() <= 0.1);
        let fit = minkowski_fit(
            &TargetSet::segment(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap(),
            &radii,
        )
        .unwrap();
        assert!((0.9..=1.1).contains(&fit.theta_hat));
        let fit = minkowski_fit(
            &TargetSet::cuboid(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            &radii,
        )
        .unwrap();
        assert!((1.9..=2.1).contains(&fit.theta_hat));
    }

    #[test]
    fn minkowski_rejects_bad_grids() {
        let p = TargetSet::point(vec![0.0]).unwrap();
        let short: Vec<f64> = (0..5).map(|k| 10f64.powi(-k)).collect();
        assert!(minkowski_fit(&p, &short).is_err());
        let narrow: Vec<f64> = (0..10).map(|k| 1.0 - 0.01 * k as f64).collect();
        assert!(minkowski_fit(&p, &narrow).is_err());
        let increasing: Vec<f64> = (0..10).map(|k| 10f64.powf(-3.0 + 0.3 * k as f64)).collect();
        assert!(minkowski_fit(&p, &increasing).is_err());
    }

    #[test]
    fn polarity_examples() {
        assert_eq!(
            polarity_classify(2.0, 4, 0.0, 0.0),
            PolarityVerdict::PolarByTheorem
        );
        assert_eq!(
            polarity_classify(3.33, 2, 0.5, 0.2),
            PolarityVerdict::NonpolarRegime
        );
        assert_eq!(
            polarity_classify(2.0, 2, 0.0, 1.2),
            PolarityVerdict::Inconclusive
        );
        assert_eq!(
            polarity_classify(2.0, 2, 0.0, 0.99),
            PolarityVerdict::PolarByTheorem
        );
        assert_eq!(
            polarity_classify(2.0, 3, 1.5, 0.0),
            PolarityVerdict::Inconclusive
        );
    }
}

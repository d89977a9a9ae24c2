//! Rectangles, sampling lattices, the anisotropic metric `Δ` and its dyadic
//! cube decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default cap on the number of lattice points in a [`GridSpec`].
pub const DEFAULT_GRID_CAP: usize = 1 << 16;
/// Default cap on the number of cubes returned by [`dyadic_decompose`].
pub const DEFAULT_CUBE_CAP: usize = 1 << 22;

/// Closed rectangle `∏ [c_j, d_j]` with `c_j < d_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectangleSerde")]
pub struct Rectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RectangleSerde {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RectangleSerde> for Rectangle {
    type Error = Error;
    fn try_from(raw: RectangleSerde) -> Result<Self> {
        Rectangle::new(raw.lower, raw.upper)
    }
}

impl Rectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::invalid("rect", "needs at least one axis"));
        }
        for (j, (c, d)) in lower.iter().zip(&upper).enumerate() {
            if !(c.is_finite() && d.is_finite() && c < d) {
                return Err(Error::invalid(
                    "rect",
                    format!("axis {j}: need c < d, got [{c}, {d}]"),
                ));
            }
        }
        Ok(Rectangle { lower, upper })
    }

    /// `[lo, hi]ᴺ`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.side(j)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(c, d)| 0.5 * (c + d))
            .collect()
    }

    /// Closed-box membership with an absolute slack `tol` per axis.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (c, d))| *x >= c - tol && *x <= d + tol)
    }

    pub fn contains_rect(&self, other: &Rectangle, tol: f64) -> bool {
        self.contains(&other.lower, tol) && self.contains(&other.upper, tol)
    }

    /// The rectangle grown by `pad` on every side.
    pub fn padded(&self, pad: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|c| c - pad).collect(),
            self.upper.iter().map(|d| d + pad).collect(),
        )
    }
}

/// `Δ(s, t) = Σ_j |s_j − t_j|^{α_j}` with every `α_j ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicMetric {
    alpha: Vec<f64>,
}

impl AnisotropicMetric {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::invalid("alpha", "needs at least one axis"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::invalid("alpha", format!("{a} is outside (0, 1)")));
        }
        Ok(AnisotropicMetric { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn delta(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        check_dim(self.dim(), s.len())?;
        check_dim(self.dim(), t.len())?;
        Ok(self.delta_unchecked(s, t))
    }

    #[inline]
    pub fn delta_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(s.iter().zip(t))
            .map(|(a, (x, y))| (x - y).abs().powf(*a))
            .sum()
    }

    /// Closed Δ-ball membership: `Δ(x, center) ≤ eta`.
    pub fn ball_contains(&self, center: &[f64], eta: f64, x: &[f64]) -> Result<bool> {
        if !(eta > 0.0) {
            return Err(Error::invalid("eta", "ball radius must be positive"));
        }
        Ok(self.delta(center, x)? <= eta)
    }

    /// Δ-diameter of an axis-aligned box with the given side lengths.
    pub fn box_diameter(&self, sides: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(sides)
            .map(|(a, s)| s.abs().powf(*a))
            .sum()
    }
}

/// Lattice over a rectangle, endpoints included, lexicographic order with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    rect: Rectangle,
    counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(rect: Rectangle, counts: Vec<usize>) -> Result<Self> {
        Self::with_cap(rect, counts, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(rect: Rectangle, counts: Vec<usize>, cap: usize) -> Result<Self> {
        check_dim(rect.dim(), counts.len())?;
        if let Some(c) = counts.iter().find(|c| **c < 2) {
            return Err(Error::invalid(
                "counts",
                format!("each axis needs at least 2 points, got {c}"),
            ));
        }
        let total = counts
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(*c))
            .unwrap_or(usize::MAX);
        if total > cap {
            return Err(Error::CapExceeded {
                what: "grid points",
                requested: total,
                cap,
            });
        }
        Ok(GridSpec { rect, counts })
    }

    /// One-axis grid on `[lo, hi]` with `count` points.
    pub fn interval(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(Rectangle::new(vec![lo], vec![hi])?, vec![count])
    }

    pub fn rect(&self) -> &Rectangle {
        &self.rect
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.rect.side(axis) / (self.counts[axis] - 1) as f64
    }

    /// Coordinate of lattice index `i` on `axis`; the last index is exactly `d_j`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.counts[axis] - 1;
        if i == n {
            self.rect.upper[axis]
        } else {
            self.rect.lower[axis] + self.rect.side(axis) * i as f64 / n as f64
        }
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            idx[j] = flat % self.counts[j];
            flat /= self.counts[j];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        idx.iter()
            .enumerate()
            .map(|(j, i)| self.coord(j, *i))
            .collect()
    }

    /// All lattice points in lexicographic order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Positions of this grid's points inside the finer grid `fine`, which
    /// must share the rectangle and subdivide every axis an integer number of
    /// times.
    pub fn embedding_in(&self, fine: &GridSpec) -> Result<Vec<usize>> {
        if self.rect != fine.rect {
            return Err(Error::invalid(
                "refinements",
                "grids must share one rectangle",
            ));
        }
        let mut factors = Vec::with_capacity(self.dim());
        for (c, f) in self.counts.iter().zip(&fine.counts) {
            if (f - 1) % (c - 1) != 0 {
                return Err(Error::invalid(
                    "refinements",
                    format!("{f} points do not refine {c} points (need (f−1) divisible by (c−1))"),
                ));
            }
            factors.push((f - 1) / (c - 1));
        }
        Ok((0..self.len())
            .map(|k| {
                let idx: Vec<usize> = self
                    .multi_index(k)
                    .iter()
                    .zip(&factors)
                    .map(|(i, m)| i * m)
                    .collect();
                fine.flat_index(&idx)
            })
            .collect())
    }
}

/// Free-function form of [`GridSpec::points`].
pub fn grid_points(grid: &GridSpec) -> Vec<Vec<f64>> {
    grid.points()
}

/// A dyadic cube of order `q` in the metric `Δ`: a box obtained by bisecting
/// axis `j` of the base rectangle `ceil(q/α_j)` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub order: u32,
    pub index: Vec<usize>,
    pub bounds: Rectangle,
    pub center: Vec<f64>,
}

impl DyadicCube {
    pub fn side(&self, axis: usize) -> f64 {
        self.bounds.side(axis)
    }

    pub fn sides(&self) -> Vec<f64> {
        (0..self.bounds.dim()).map(|j| self.side(j)).collect()
    }
}

/// Bisection depth per axis for order `q`: `ceil(q/α_j)`.
pub fn dyadic_depths(metric: &AnisotropicMetric, q: u32) -> Vec<u32> {
    metric
        .alpha()
        .iter()
        // guard against q/α landing a hair above an integer
        .map(|a| (q as f64 / a - 1e-9).ceil().max(0.0) as u32)
        .collect()
}

pub fn dyadic_decompose(
    rect: &Rectangle,
    metric: &AnisotropicMetric,
    q: u32,
) -> Result<Vec<DyadicCube>> {
    dyadic_decompose_capped(rect, metric, q, DEFAULT_CUBE_CAP)
}

/// Tiles `rect` by the order-`q` dyadic cubes, in lexicographic index order.
pub fn dyadic_decompose_capped(
    rect: &Rectangle,
    metric: &AnisotropicMetric,
    q: u32,
    cap: usize,
) -> Result<Vec<DyadicCube>> {
    check_dim(metric.dim(), rect.dim())?;
    let depths = dyadic_depths(metric, q);
    let total_bits: u32 = depths.iter().sum();
    if total_bits >= usize::BITS || (1usize << total_bits) > cap {
        return Err(Error::CapExceeded {
            what: "dyadic cubes",
            requested: if total_bits >= usize::BITS {
                usize::MAX
            } else {
                1 << total_bits
            },
            cap,
        });
    }
    let per_axis: Vec<usize> = depths.iter().map(|n| 1usize << n).collect();
    let total: usize = per_axis.iter().product();
    let mut cubes = Vec::with_capacity(total);
    let mut index = vec![0usize; rect.dim()];
    for _ in 0..total {
        let mut lower = Vec::with_capacity(rect.dim());
        let mut upper = Vec::with_capacity(rect.dim());
        for j in 0..rect.dim() {
            let m = per_axis[j] as f64;
            let side = rect.side(j);
            lower.push(rect.lower()[j] + side * (index[j] as f64 / m));
            upper.push(if index[j] + 1 == per_axis[j] {
                rect.upper()[j]
            } else {
                rect.lower()[j] + side * ((index[j] + 1) as f64 / m)
            });
        }
        let bounds = Rectangle::new(lower, upper)?;
        cubes.push(DyadicCube {
            order: q,
            index: index.clone(),
            center: bounds.center(),
            bounds,
        });
        for j in (0..rect.dim()).rev() {
            index[j] += 1;
            if index[j] < per_axis[j] {
                break;
            }
            index[j] = 0;
        }
    }
    Ok(cubes)
}

/// Exact Δ-diameter of a cube: `Σ_j side_j^{α_j}`.
pub fn delta_diameter(cube: &DyadicCube, metric: &AnisotropicMetric) -> f64 {
    metric.box_diameter(&cube.sides())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric(a: &[f64]) -> AnisotropicMetric {
        AnisotropicMetric::new(a.to_vec()).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(
            metric(&[0.5, 0.5]).delta(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            2.0
        );
        assert_eq!(
            metric(&[0.3, 0.7]).delta(&[0.2, 5.0], &[0.2, 5.0]).unwrap(),
            0.0
        );
        let d = metric(&[0.25, 0.5])
            .delta(&[1.0, 1.0], &[1.0625, 1.25])
            .unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!(matches!(
            metric(&[0.5]).delta(&[0.0, 1.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ball_examples() {
        let m = metric(&[0.5, 0.5]);
        assert!(m.ball_contains(&[0.0, 0.0], 2.0, &[1.0, 1.0]).unwrap());
        assert!(m.ball_contains(&[0.3, 0.4], 1e-9, &[0.3, 0.4]).unwrap());
        assert!(!m.ball_contains(&[0.0, 0.0], 1.9, &[1.0, 1.0]).unwrap());
        assert!(m.ball_contains(&[0.0, 0.0], 0.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn metric_rejects_lipschitz_axis() {
        assert!(AnisotropicMetric::new(vec![0.5, 1.0]).is_err());
        assert!(AnisotropicMetric::new(vec![0.0]).is_err());
    }

    #[test]
    fn grid_examples() {
        let g = GridSpec::interval(0.0, 1.0, 3).unwrap();
        assert_eq!(g.points(), vec![vec![0.0], vec![0.5], vec![1.0]]);
        let g = GridSpec::new(Rectangle::cube(1.0, 2.0, 2).unwrap(), vec![2, 2]).unwrap();
        assert_eq!(
            g.points(),
            vec![
                vec![1.0, 1.0],
                vec![1.0, 2.0],
                vec![2.0, 1.0],
                vec![2.0, 2.0]
            ]
        );
        let g = GridSpec::interval(0.0, 1.0, 2).unwrap();
        assert_eq!(grid_points(&g), vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn grid_cap_and_counts() {
        let r = Rectangle::cube(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            GridSpec::new(r.clone(), vec![300, 300]),
            Err(Error::CapExceeded { .. })
        ));
        assert!(GridSpec::new(r, vec![1, 4]).is_err());
    }

    #[test]
    fn embedding_of_nested_grids() {
        let coarse = GridSpec::interval(1.0, 2.0, 5).unwrap();
        let fine = GridSpec::interval(1.0, 2.0, 17).unwrap();
        let emb = coarse.embedding_in(&fine).unwrap();
        assert_eq!(emb, vec![0, 4, 8, 12, 16]);
        for (k, f) in emb.iter().enumerate() {
            assert_eq!(coarse.point(k), fine.point(*f));
        }
        let odd = GridSpec::interval(1.0, 2.0, 16).unwrap();
        assert!(coarse.embedding_in(&odd).is_err());
    }

    #[test]
    fn decompose_examples() {
        let unit = Rectangle::cube(0.0, 1.0, 1).unwrap();
        let cubes = dyadic_decompose(&unit, &metric(&[0.5]), 1).unwrap();
        assert_eq!(cubes.len(), 4);
        assert!(cubes.iter().all(|c| (c.side(0) - 0.25).abs() < 1e-15));

        let sq = Rectangle::cube(0.0, 1.0, 2).unwrap();
        let cubes = dyadic_decompose(&sq, &metric(&[0.5, 0.5]), 1).unwrap();
        assert_eq!(cubes.len(), 16);
        assert!(cubes.iter().all(|c| c.side(0) == 0.25 && c.side(1) == 0.25));

        let r = Rectangle::new(vec![1.0, -3.0], vec![2.5, 0.5]).unwrap();
        let cubes = dyadic_decompose(&r, &metric(&[0.3, 0.8]), 0).unwrap();
        assert_eq!(cubes.len(), 1);
        assert_eq!(cubes[0].bounds, r);
    }

    #[test]
    fn depth_rounding_is_exact_on_integers() {
        assert_eq!(dyadic_depths(&metric(&[0.3]), 3), vec![10]);
        assert_eq!(dyadic_depths(&metric(&[0.3]), 4), vec![14]);
        assert_eq!(dyadic_depths(&metric(&[0.5, 0.25]), 2), vec![4, 8]);
    }

    #[test]
    fn decompose_cap() {
        let r = Rectangle::cube(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            dyadic_decompose_capped(&r, &metric(&[0.5, 0.5]), 4, 1000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn diameter_examples() {
        let unit = Rectangle::cube(0.0, 1.0, 1).unwrap();
        let m = metric(&[0.5]);
        let cubes = dyadic_decompose(&unit, &m, 1).unwrap();
        assert!((delta_diameter(&cubes[0], &m) - 0.5).abs() < 1e-15);
        assert_eq!(m.box_diameter(&[0.0]), 0.0);
        assert_eq!(metric(&[0.5, 0.5]).box_diameter(&[0.25, 0.25]), 1.0);
    }
}

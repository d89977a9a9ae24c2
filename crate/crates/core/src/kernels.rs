//! Closed-form covariance kernels and their anisotropy data.
//!
//! Every [`Kernel`] carries the per-axis anisotropy exponents `α_j`, the
//! regularity exponents `δ_j ∈ (α_j, 1]` and `Q = Σ 1/α_j`. Kernels are
//! immutable after construction and cheap to share across threads.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{AnisotropicMetric, Rectangle};

/// Hurst parameters `H_1, …, H_N`, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HurstVector(Vec<f64>);

impl HurstVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("H", "needs at least one axis"));
        }
        if let Some(h) = values.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
            return Err(Error::invalid("H", format!("{h} is outside (0, 1)")));
        }
        Ok(HurstVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for HurstVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        HurstVector::new(values)
    }
}

impl From<HurstVector> for Vec<f64> {
    fn from(h: HurstVector) -> Self {
        h.0
    }
}

/// Scalar amplitude profile `f` of a rescaled kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `intercept + Σ slope_j t_j`
    Affine {
        intercept: f64,
        slope: Vec<f64>,
    },
    /// `scale · exp(Σ rate_j t_j)`
    Exponential {
        scale: f64,
        rate: Vec<f64>,
    },
}

impl Profile {
    #[inline]
    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Affine { intercept, slope } => {
                intercept + slope.iter().zip(t).map(|(a, x)| a * x).sum::<f64>()
            }
            Profile::Exponential { scale, rate } => {
                scale * rate.iter().zip(t).map(|(a, x)| a * x).sum::<f64>().exp()
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Profile::Constant { value } if !(*value > 0.0 && value.is_finite()) => Err(
                Error::invalid("rescale.f", "constant profile must be positive"),
            ),
            Profile::Affine { slope, .. } => check_dim(dim, slope.len()),
            Profile::Exponential { scale, rate } => {
                if !(*scale > 0.0) {
                    return Err(Error::invalid(
                        "rescale.f",
                        "exponential scale must be positive",
                    ));
                }
                check_dim(dim, rate.len())
            }
            _ => Ok(()),
        }
    }

    /// Smallest value over the box; affine profiles attain it at a corner.
    fn min_over_box(&self, lower: &[f64], upper: &[f64]) -> f64 {
        match self {
            Profile::Affine { intercept, slope } => {
                intercept
                    + slope
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(a, (lo, hi))| (a * lo).min(a * hi))
                        .sum::<f64>()
            }
            // constant and exponential profiles are positive once validated
            _ => f64::INFINITY,
        }
    }
}

/// Monotone per-axis time change `g_j` of a rescaled kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisMap {
    Identity,
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `scale · exp(rate · x)`
    Exponential {
        scale: f64,
        rate: f64,
    },
}

impl AxisMap {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            AxisMap::Identity => x,
            AxisMap::Affine { intercept, slope } => intercept + slope * x,
            AxisMap::Exponential { scale, rate } => scale * (rate * x).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AxisMap::Exponential { scale, .. } if !(*scale > 0.0) => Err(Error::invalid(
                "rescale.g",
                "exponential scale must be positive",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelVariant {
    /// Multiparameter (Lévy) fractional Brownian motion on `ℝᴺ`.
    Fbm { hurst: f64, axes: usize },
    /// Fractional Brownian sheet.
    Fbs { hurst: HurstVector },
    /// Standard Brownian motion on `ℝ₊`.
    Bm,
    /// Stationary Ornstein-Uhlenbeck process `dX = −θX dt + σ dB`.
    Ou { theta: f64, sigma: f64 },
    /// `f(t) · X_base(g(t))`.
    Rescaled {
        base: Box<Kernel>,
        f: Profile,
        g: Vec<AxisMap>,
    },
}

/// Optional constants of the local-nondeterminism and regularity assumptions.
/// They are never derived analytically; fitted surrogates may be attached.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub a0: Option<f64>,
    pub c0: Option<f64>,
    pub d0: Option<f64>,
    pub rho0: Option<f64>,
    pub eps0: Option<f64>,
}

impl AssumptionConstants {
    fn is_empty(&self) -> bool {
        *self == AssumptionConstants::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSerde")]
pub struct Kernel {
    #[serde(flatten)]
    variant: KernelVariant,
    alpha: Vec<f64>,
    delta: Vec<f64>,
    q: f64,
    #[serde(default, skip_serializing_if = "AssumptionConstants::is_empty")]
    constants: AssumptionConstants,
}

#[derive(Deserialize)]
struct KernelSerde {
    #[serde(flatten)]
    variant: KernelVariant,
    #[serde(default)]
    constants: AssumptionConstants,
}

impl TryFrom<KernelSerde> for Kernel {
    type Error = Error;
    fn try_from(raw: KernelSerde) -> Result<Self> {
        Ok(Kernel::from_variant(raw.variant)?.with_constants(raw.constants))
    }
}

/// Covariance of one-parameter fBm with Hurst index `h`.
#[inline]
pub fn fbm_1d_covariance(h: f64, s: f64, t: f64) -> f64 {
    let two_h = 2.0 * h;
    0.5 * (s.abs().powf(two_h) + t.abs().powf(two_h) - (s - t).abs().powf(two_h))
}

impl Kernel {
    pub fn from_variant(variant: KernelVariant) -> Result<Self> {
        let (alpha, delta) = match &variant {
            KernelVariant::Fbm { hurst, axes } => {
                if !(*hurst > 0.0 && *hurst < 1.0) {
                    return Err(Error::invalid("H", format!("{hurst} is outside (0, 1)")));
                }
                if *axes == 0 {
                    return Err(Error::invalid("N", "needs at least one axis"));
                }
                (vec![*hurst; *axes], vec![1.0; *axes])
            }
            KernelVariant::Fbs { hurst } => (
                hurst.values().to_vec(),
                hurst.values().iter().map(|h| (2.0 * h).min(1.0)).collect(),
            ),
            KernelVariant::Bm => (vec![0.5], vec![1.0]),
            KernelVariant::Ou { theta, sigma } => {
                if !(*theta > 0.0 && *sigma > 0.0) {
                    return Err(Error::invalid("theta/sigma", "both must be positive"));
                }
                (vec![0.5], vec![1.0])
            }
            KernelVariant::Rescaled { base, f, g } => {
                check_dim(base.dim(), g.len())?;
                f.validate(base.dim())?;
                for map in g {
                    map.validate()?;
                }
                (base.alpha.clone(), base.delta.clone())
            }
        };
        let q = alpha.iter().map(|a| 1.0 / a).sum();
        Ok(Kernel {
            variant,
            alpha,
            delta,
            q,
            constants: AssumptionConstants::default(),
        })
    }

    pub fn fbm(hurst: f64, axes: usize) -> Result<Self> {
        Self::from_variant(KernelVariant::Fbm { hurst, axes })
    }

    pub fn fbs(hurst: &[f64]) -> Result<Self> {
        Self::from_variant(KernelVariant::Fbs {
            hurst: HurstVector::new(hurst.to_vec())?,
        })
    }

    pub fn bm() -> Self {
        Self::from_variant(KernelVariant::Bm).expect("BM is always valid")
    }

    pub fn ou(theta: f64, sigma: f64) -> Result<Self> {
        Self::from_variant(KernelVariant::Ou { theta, sigma })
    }

    /// `f(t)·X(g(t))` over this kernel's process. Exponents are inherited.
    pub fn rescale(self, f: Profile, g: Vec<AxisMap>) -> Result<Self> {
        Self::from_variant(KernelVariant::Rescaled {
            base: Box::new(self),
            f,
            g,
        })
    }

    pub fn with_constants(mut self, constants: AssumptionConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            KernelVariant::Fbm { .. } => "fbm",
            KernelVariant::Fbs { .. } => "fbs",
            KernelVariant::Bm => "bm",
            KernelVariant::Ou { .. } => "ou",
            KernelVariant::Rescaled { .. } => "rescaled",
        }
    }

    /// Number of parameter axes `N`.
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn anisotropy_exponents(&self) -> (Vec<f64>, f64) {
        (self.alpha.clone(), self.q)
    }

    pub fn regularity_exponents(&self) -> Vec<f64> {
        self.delta.clone()
    }

    pub fn metric(&self) -> AnisotropicMetric {
        AnisotropicMetric::new(self.alpha.clone()).expect("kernel exponents lie in (0, 1)")
    }

    /// Per-axis Hurst indices when the covariance is a product of 1-axis fBm
    /// covariances.
    pub fn product_axes(&self) -> Option<&[f64]> {
        match &self.variant {
            KernelVariant::Fbs { hurst } => Some(hurst.values()),
            _ => None,
        }
    }

    fn requirement(&self) -> &'static str {
        match self.variant {
            KernelVariant::Fbm { .. } => "point must differ from the origin",
            KernelVariant::Fbs { .. } | KernelVariant::Bm => {
                "coordinates must be strictly positive"
            }
            KernelVariant::Ou { .. } => "time must be nonnegative",
            KernelVariant::Rescaled { .. } => "f(t) > 0 and g(t) admissible for the base kernel",
        }
    }

    fn point_ok(&self, p: &[f64]) -> bool {
        if p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match &self.variant {
            KernelVariant::Fbm { .. } => p.iter().any(|x| *x != 0.0),
            KernelVariant::Fbs { .. } | KernelVariant::Bm => p.iter().all(|x| *x > 0.0),
            KernelVariant::Ou { .. } => p[0] >= 0.0,
            KernelVariant::Rescaled { base, f, g } => {
                let image: Vec<f64> = g.iter().zip(p).map(|(m, x)| m.eval(*x)).collect();
                f.eval(p) > 0.0 && base.point_ok(&image)
            }
        }
    }

    /// Whether the closed box `[lower, upper]` (possibly degenerate) is admissible.
    fn box_ok(&self, lower: &[f64], upper: &[f64]) -> bool {
        match &self.variant {
            KernelVariant::Fbm { .. } => !lower
                .iter()
                .zip(upper)
                .all(|(lo, hi)| *lo <= 0.0 && 0.0 <= *hi),
            KernelVariant::Fbs { .. } | KernelVariant::Bm => lower.iter().all(|x| *x > 0.0),
            KernelVariant::Ou { .. } => lower[0] >= 0.0,
            KernelVariant::Rescaled { base, f, g } => {
                if f.min_over_box(lower, upper) <= 0.0 {
                    return false;
                }
                let (mut lo, mut hi) = (Vec::with_capacity(g.len()), Vec::with_capacity(g.len()));
                for (map, (a, b)) in g.iter().zip(lower.iter().zip(upper)) {
                    let (ga, gb) = (map.eval(*a), map.eval(*b));
                    lo.push(ga.min(gb));
                    hi.push(ga.max(gb));
                }
                base.box_ok(&lo, &hi)
            }
        }
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        check_dim(self.dim(), p.len())?;
        if self.point_ok(p) {
            Ok(())
        } else {
            Err(Error::Domain {
                kernel: self.name(),
                point: p.to_vec(),
                requirement: self.requirement(),
            })
        }
    }

    pub fn check_rect(&self, rect: &Rectangle) -> Result<()> {
        check_dim(self.dim(), rect.dim())?;
        if self.box_ok(rect.lower(), rect.upper()) {
            Ok(())
        } else {
            Err(Error::Domain {
                kernel: self.name(),
                point: rect.lower().to_vec(),
                requirement: self.requirement(),
            })
        }
    }

    /// `C(s, t)` after checking both points against the admissible domain.
    pub fn covariance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.check_point(s)?;
        self.check_point(t)?;
        Ok(self.covariance_unchecked(s, t))
    }

    /// `C(s, t)` without domain checks; callers guarantee admissibility.
    pub fn covariance_unchecked(&self, s: &[f64], t: &[f64]) -> f64 {
        match &self.variant {
            KernelVariant::Fbm { hurst, .. } => {
                let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let diff = s
                    .iter()
                    .zip(t)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let two_h = 2.0 * hurst;
                0.5 * (norm(s).powf(two_h) + norm(t).powf(two_h) - diff.powf(two_h))
            }
            KernelVariant::Fbs { hurst } => hurst
                .values()
                .iter()
                .zip(s.iter().zip(t))
                .map(|(h, (a, b))| fbm_1d_covariance(*h, *a, *b))
                .product(),
            KernelVariant::Bm => s[0].min(t[0]),
            KernelVariant::Ou { theta, sigma } => {
                let f = |x: f64| sigma / (2.0 * theta).sqrt() * (-theta * x).exp();
                let g = |x: f64| (2.0 * theta * x).exp();
                f(s[0]) * f(t[0]) * g(s[0]).min(g(t[0]))
            }
            KernelVariant::Rescaled { base, f, g } => {
                let gs: Vec<f64> = g.iter().zip(s).map(|(m, x)| m.eval(*x)).collect();
                let gt: Vec<f64> = g.iter().zip(t).map(|(m, x)| m.eval(*x)).collect();
                f.eval(s) * f.eval(t) * base.covariance_unchecked(&gs, &gt)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        let fbm = Kernel::fbm(0.5, 1).unwrap();
        assert_eq!(fbm.covariance(&[1.0], &[2.0]).unwrap(), 1.0);
        let fbs = Kernel::fbs(&[0.5, 0.5]).unwrap();
        assert_eq!(fbs.covariance(&[1.0, 2.0], &[3.0, 1.0]).unwrap(), 1.0);
        let ou = Kernel::ou(0.5, 1.0).unwrap();
        assert!((ou.covariance(&[0.0], &[0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_is_symmetric() {
        let k = Kernel::fbm(0.37, 2).unwrap();
        let (s, t) = ([0.3, -1.2], [2.0, 0.7]);
        assert_eq!(k.covariance(&s, &t).unwrap(), k.covariance(&t, &s).unwrap());
    }

    #[test]
    fn domain_violations() {
        assert!(matches!(
            Kernel::fbm(0.3, 2)
                .unwrap()
                .covariance(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::Domain { .. })
        ));
        assert!(Kernel::fbs(&[0.3, 0.6])
            .unwrap()
            .covariance(&[1.0, 0.0], &[1.0, 1.0])
            .is_err());
        assert!(Kernel::bm().covariance(&[-1.0], &[1.0]).is_err());
        assert!(Kernel::ou(1.0, 1.0)
            .unwrap()
            .covariance(&[-0.1], &[1.0])
            .is_err());
        assert!(matches!(
            Kernel::bm().covariance(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let r = Rectangle::cube(-1.0, 1.0, 2).unwrap();
        assert!(Kernel::fbm(0.3, 2).unwrap().check_rect(&r).is_err());
        let r = Rectangle::new(vec![-1.0, 0.5], vec![1.0, 1.0]).unwrap();
        assert!(Kernel::fbm(0.3, 2).unwrap().check_rect(&r).is_ok());
    }

    #[test]
    fn parameter_validation() {
        assert!(Kernel::fbm(1.0, 1).is_err());
        assert!(Kernel::fbm(0.5, 0).is_err());
        assert!(Kernel::fbs(&[]).is_err());
        assert!(Kernel::fbs(&[0.5, 0.0]).is_err());
        assert!(Kernel::ou(0.0, 1.0).is_err());
        assert!(Kernel::bm()
            .rescale(Profile::Constant { value: 1.0 }, vec![])
            .is_err());
        assert!(Kernel::bm()
            .rescale(Profile::Constant { value: -1.0 }, vec![AxisMap::Identity])
            .is_err());
    }

    #[test]
    fn exponent_examples() {
        let (alpha, q) = Kernel::fbm(0.25, 2).unwrap().anisotropy_exponents();
        assert_eq!(alpha, vec![0.25, 0.25]);
        assert_eq!(q, 8.0);
        assert_eq!(Kernel::fbs(&[0.5, 0.25]).unwrap().q(), 6.0);
        let (alpha, q) = Kernel::ou(3.0, 0.2).unwrap().anisotropy_exponents();
        assert_eq!((alpha, q), (vec![0.5], 2.0));

        assert_eq!(
            Kernel::fbm(0.3, 3).unwrap().regularity_exponents(),
            vec![1.0; 3]
        );
        assert_eq!(
            Kernel::fbs(&[0.3, 0.7]).unwrap().regularity_exponents(),
            vec![0.6, 1.0]
        );
        assert_eq!(
            Kernel::ou(1.0, 1.0).unwrap().regularity_exponents(),
            vec![1.0]
        );
    }

    #[test]
    fn regularity_exceeds_anisotropy() {
        let kernels = [
            Kernel::fbm(0.9, 2).unwrap(),
            Kernel::fbs(&[0.1, 0.5, 0.95]).unwrap(),
            Kernel::bm(),
            Kernel::ou(0.7, 2.0).unwrap(),
            Kernel::fbs(&[0.2, 0.8])
                .unwrap()
                .rescale(
                    Profile::Constant { value: 2.0 },
                    vec![AxisMap::Identity, AxisMap::Identity],
                )
                .unwrap(),
        ];
        for k in kernels {
            assert!(
                k.alpha().iter().zip(k.delta()).all(|(a, d)| d > a),
                "{}",
                k.name()
            );
            let q: f64 = k.alpha().iter().map(|a| 1.0 / a).sum();
            assert_eq!(k.q(), q);
        }
    }

    #[test]
    fn rescale_identity_is_base() {
        let r = Kernel::bm()
            .rescale(Profile::Constant { value: 1.0 }, vec![AxisMap::Identity])
            .unwrap();
        for (s, t) in [(0.3, 1.7), (2.0, 2.0), (5.0, 0.1)] {
            assert_eq!(
                r.covariance(&[s], &[t]).unwrap(),
                Kernel::bm().covariance(&[s], &[t]).unwrap()
            );
        }
        assert_eq!(
            r.anisotropy_exponents(),
            Kernel::bm().anisotropy_exponents()
        );
    }

    #[test]
    fn rescaled_bm_is_ou() {
        let (theta, sigma): (f64, f64) = (0.8, 1.3);
        let r = Kernel::bm()
            .rescale(
                Profile::Exponential {
                    scale: sigma / (2.0 * theta).sqrt(),
                    rate: vec![-theta],
                },
                vec![AxisMap::Exponential {
                    scale: 1.0,
                    rate: 2.0 * theta,
                }],
            )
            .unwrap();
        let v = r.covariance(&[0.0], &[0.0]).unwrap();
        assert!((v - sigma * sigma / (2.0 * theta)).abs() < 1e-14);
        assert_eq!(r.regularity_exponents(), vec![1.0]);
    }

    #[test]
    fn scaled_profile_quadruples_covariance() {
        let base = Kernel::fbm(0.35, 2).unwrap();
        let r = base
            .clone()
            .rescale(Profile::Constant { value: 2.0 }, vec![AxisMap::Identity; 2])
            .unwrap();
        for (s, t) in [
            ([0.5, 1.0], [1.5, 0.2]),
            ([1.0, 1.0], [1.0, 1.0]),
            ([-0.3, 2.0], [0.4, 0.4]),
        ] {
            assert_eq!(
                r.covariance(&s, &t).unwrap(),
                4.0 * base.covariance(&s, &t).unwrap()
            );
        }
    }

    #[test]
    fn rescale_rejects_image_outside_base_domain() {
        let r = Kernel::bm()
            .rescale(
                Profile::Constant { value: 1.0 },
                vec![AxisMap::Affine {
                    intercept: -2.0,
                    slope: 1.0,
                }],
            )
            .unwrap();
        assert!(r.covariance(&[1.0], &[3.0]).is_err());
        assert!(r
            .check_rect(&Rectangle::new(vec![1.0], vec![3.0]).unwrap())
            .is_err());
        assert!(r
            .check_rect(&Rectangle::new(vec![2.5], vec![3.0]).unwrap())
            .is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let k = Kernel::fbs(&[0.3, 0.6])
            .unwrap()
            .rescale(
                Profile::Affine {
                    intercept: 1.0,
                    slope: vec![0.1, 0.2],
                },
                vec![
                    AxisMap::Identity,
                    AxisMap::Exponential {
                        scale: 1.0,
                        rate: 0.5,
                    },
                ],
            )
            .unwrap();
        let text = serde_json::to_string(&k).unwrap();
        let back: Kernel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, k);
        assert!(
            serde_json::from_str::<Kernel>(r#"{"variant":"fbm","hurst":1.5,"axes":1}"#).is_err()
        );
    }
}

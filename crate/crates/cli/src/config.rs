//! Experiment configuration: the TOML tree, `--set` overrides and resolution
//! into core types.

use std::path::{Path, PathBuf};

use polarlab_core::geometry::DEFAULT_GRID_CAP;
use polarlab_core::io::load_point_cloud;
use polarlab_core::kernels::{AssumptionConstants, AxisMap, Profile};
use polarlab_core::matrixproc::Shift;
use polarlab_core::{
    Beta, EnsembleSpec, GridSpec, HermMatrix, Kernel, Rectangle, SymMatrix, TargetSet,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_REPLICATE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub kernel: Option<KernelConfig>,
    pub domain: Option<DomainConfig>,
    pub target: Option<TargetConfig>,
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub lab: LabConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub minkowski: MinkowskiConfig,
    #[serde(default)]
    pub oscillate: OscillateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Fbm,
    Fbs,
    Bm,
    Ou,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum HurstValue {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub variant: VariantName,
    #[serde(rename = "H")]
    pub hurst: Option<HurstValue>,
    /// Parameter dimension of a Lévy fBm; defaults to the domain dimension.
    pub axes: Option<usize>,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub rescale: Option<RescaleConfig>,
    pub constants: Option<AssumptionConstants>,
    /// Name used for per-kernel output files.
    pub label: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleConfig {
    pub f: Profile,
    /// One map per axis; missing means identity on every axis.
    pub g: Option<Vec<AxisMap>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Option<Vec<usize>>,
    /// Successive grids, each embedded in the next.
    pub refinements: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: String,
    pub x: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub points: Option<Vec<Vec<f64>>>,
    /// CSV file of cloud points, relative to the config file.
    pub file: Option<PathBuf>,
    pub mesh: Option<f64>,
    pub members: Option<Vec<TargetConfig>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub beta: u8,
    pub dim: usize,
    /// Real part of the shift, as rows.
    pub shift: Option<Vec<Vec<f64>>>,
    /// Imaginary part of the shift (β = 2 only), as rows.
    pub shift_im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub n: Option<usize>,
    pub epsilons: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub components: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Also write the binary field dump.
    #[serde(default)]
    pub binary: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub kernels: Vec<KernelConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinkowskiConfig {
    pub radii: Option<Vec<f64>>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillateConfig {
    pub r0: Option<f64>,
    pub probes: Option<Vec<Vec<f64>>>,
    pub eps_grid: Option<Vec<f64>>,
    pub anchor: Option<Vec<f64>>,
    #[serde(default)]
    pub orders: Vec<u32>,
    pub constant: Option<f64>,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    pub max_grid_points: Option<usize>,
    pub max_replicates: Option<usize>,
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to a
/// bare string.
pub fn parse_override(raw: &str) -> Result<(String, toml::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {raw}: expected key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set {raw}: empty key segment")));
    }
    let value = value.trim();
    let parsed = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    Ok((key.to_string(), parsed))
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("nonempty key");
    let mut node = table;
    let mut walked = String::new();
    for part in parts {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(part);
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: `{walked}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Reads the configuration. Without overrides the file is deserialized
/// directly so errors carry line and column.
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config: ExperimentConfig = if overrides.is_empty() {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        let mut table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for raw in overrides {
            let (key, value) = parse_override(raw)?;
            apply_override(&mut table, &key, value)?;
        }
        toml::Value::Table(table).try_into().map_err(|e| {
            CliError::Config(format!("{} (with --set overrides): {e}", path.display()))
        })?
    };
    if let Some(dir) = path.parent() {
        config.rebase_paths(dir);
    }
    Ok(config)
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing field `{field}`"))
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{field}`: {reason}"))
}

/// Wraps a core error raised while resolving `field`.
fn at(field: &str) -> impl Fn(polarlab_core::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Config(msg) => CliError::Config(format!("`{field}`: {msg}")),
        other => other,
    }
}

impl ExperimentConfig {
    fn rebase_paths(&mut self, dir: &Path) {
        fn walk(t: &mut TargetConfig, dir: &Path) {
            if let Some(f) = &t.file {
                if f.is_relative() {
                    t.file = Some(dir.join(f));
                }
            }
            for m in t.members.iter_mut().flatten() {
                walk(m, dir);
            }
        }
        if let Some(t) = &mut self.target {
            walk(t, dir);
        }
    }

    pub fn replicates(&self) -> Result<usize, CliError> {
        let n = self.lab.n.unwrap_or(DEFAULT_REPLICATES);
        if n == 0 {
            return Err(invalid("lab.n", "need at least one replicate"));
        }
        let cap = self.limits.max_replicates.unwrap_or(DEFAULT_REPLICATE_CAP);
        if n > cap {
            return Err(CliError::Resource(format!(
                "lab.n = {n} exceeds limits.max_replicates = {cap}"
            )));
        }
        Ok(n)
    }

    pub fn epsilons(&self) -> Result<Vec<f64>, CliError> {
        let eps = self
            .lab
            .epsilons
            .clone()
            .ok_or_else(|| missing("lab.epsilons"))?;
        if eps.is_empty() {
            return Err(invalid("lab.epsilons", "empty list"));
        }
        Ok(eps)
    }

    pub fn k(&self) -> usize {
        self.lab.k.unwrap_or(2)
    }

    pub fn rect(&self) -> Result<Rectangle, CliError> {
        let d = self.domain.as_ref().ok_or_else(|| missing("domain"))?;
        Rectangle::new(d.lower.clone(), d.upper.clone()).map_err(at("domain"))
    }

    /// Grids from coarse to fine; a single grid when no refinements are set.
    pub fn grids(&self) -> Result<Vec<GridSpec>, CliError> {
        let d = self.domain.as_ref().ok_or_else(|| missing("domain"))?;
        let rect = self.rect()?;
        let cap = self.limits.max_grid_points.unwrap_or(DEFAULT_GRID_CAP);
        let all = match (&d.refinements, &d.counts) {
            (Some(r), _) if !r.is_empty() => r.clone(),
            (Some(_), _) => return Err(invalid("domain.refinements", "empty list")),
            (None, Some(c)) => vec![c.clone()],
            (None, None) => return Err(missing("domain.counts")),
        };
        all.into_iter()
            .map(|counts| GridSpec::with_cap(rect.clone(), counts, cap).map_err(at("domain")))
            .collect()
    }

    /// The finest grid.
    pub fn grid(&self) -> Result<GridSpec, CliError> {
        Ok(self.grids()?.pop().expect("at least one grid"))
    }

    pub fn kernel(&self) -> Result<Kernel, CliError> {
        let k = self.kernel.as_ref().ok_or_else(|| missing("kernel"))?;
        resolve_kernel(k, self.domain_dim(), "kernel")
    }

    fn domain_dim(&self) -> Option<usize> {
        self.domain.as_ref().map(|d| d.lower.len())
    }

    /// Kernels for `sweep`: the `sweep.kernels` list, else the single kernel.
    pub fn sweep_kernels(&self) -> Result<Vec<(String, Kernel)>, CliError> {
        if self.sweep.kernels.is_empty() {
            let k = self.kernel.as_ref().ok_or_else(|| missing("kernel"))?;
            return Ok(vec![(kernel_label(k, 0), self.kernel()?)]);
        }
        self.sweep
            .kernels
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let field = format!("sweep.kernels[{i}]");
                Ok((
                    kernel_label(k, i),
                    resolve_kernel(k, self.domain_dim(), &field)?,
                ))
            })
            .collect()
    }

    pub fn target(&self) -> Result<TargetSet, CliError> {
        let t = self.target.as_ref().ok_or_else(|| missing("target"))?;
        let target = resolve_target(t, "target")?;
        target.validate().map_err(at("target"))?;
        Ok(target)
    }

    pub fn ensemble(&self, kernel: Kernel) -> Result<EnsembleSpec, CliError> {
        let e = self.ensemble.as_ref().ok_or_else(|| missing("ensemble"))?;
        let beta = Beta::try_from(e.beta).map_err(at("ensemble.beta"))?;
        let shift = match (beta, &e.shift, &e.shift_im) {
            (_, None, None) => {
                return EnsembleSpec::centered(beta, e.dim, kernel).map_err(at("ensemble"))
            }
            (Beta::One, _, Some(_)) => {
                return Err(invalid("ensemble.shift_im", "β = 1 shifts are real"))
            }
            (Beta::One, Some(re), None) => {
                Shift::Real(SymMatrix::from_rows(re).map_err(at("ensemble.shift"))?)
            }
            (Beta::Two, re, im) => {
                let zero = || vec![vec![0.0; e.dim]; e.dim];
                let re = re.clone().unwrap_or_else(zero);
                let im = im.clone().unwrap_or_else(zero);
                let flat = |rows: &[Vec<f64>], field: &str| -> Result<Vec<f64>, CliError> {
                    if rows.len() != e.dim || rows.iter().any(|r| r.len() != e.dim) {
                        return Err(invalid(field, format!("expected {0}×{0} rows", e.dim)));
                    }
                    Ok(rows.concat())
                };
                let m = HermMatrix::new(
                    e.dim,
                    flat(&re, "ensemble.shift")?,
                    flat(&im, "ensemble.shift_im")?,
                )
                .map_err(at("ensemble.shift"))?;
                Shift::Complex(m)
            }
        };
        EnsembleSpec::new(beta, e.dim, kernel, shift).map_err(at("ensemble"))
    }
}

pub fn kernel_label(k: &KernelConfig, index: usize) -> String {
    if let Some(l) = &k.label {
        return l.clone();
    }
    let name = match k.variant {
        VariantName::Fbm => "fbm",
        VariantName::Fbs => "fbs",
        VariantName::Bm => "bm",
        VariantName::Ou => "ou",
    };
    match &k.hurst {
        Some(HurstValue::Scalar(h)) => format!("{name}_H{h}"),
        Some(HurstValue::List(hs)) => {
            let parts: Vec<String> = hs.iter().map(|h| h.to_string()).collect();
            format!("{name}_H{}", parts.join("-"))
        }
        None if matches!(k.variant, VariantName::Bm | VariantName::Ou) => name.to_string(),
        None => format!("{name}_{index}"),
    }
}

pub fn resolve_kernel(
    k: &KernelConfig,
    domain_dim: Option<usize>,
    field: &str,
) -> Result<Kernel, CliError> {
    let f = |name: &str| format!("{field}.{name}");
    let base = match k.variant {
        VariantName::Fbm => {
            let h = match &k.hurst {
                Some(HurstValue::Scalar(h)) => *h,
                Some(HurstValue::List(_)) => {
                    return Err(invalid(&f("H"), "fbm takes a scalar Hurst index"))
                }
                None => return Err(missing(&f("H"))),
            };
            let axes = k.axes.or(domain_dim).unwrap_or(1);
            Kernel::fbm(h, axes).map_err(at(&f("H")))?
        }
        VariantName::Fbs => {
            let hs = match &k.hurst {
                Some(HurstValue::List(hs)) => hs.clone(),
                Some(HurstValue::Scalar(h)) => vec![*h; domain_dim.unwrap_or(1)],
                None => return Err(missing(&f("H"))),
            };
            Kernel::fbs(&hs).map_err(at(&f("H")))?
        }
        VariantName::Bm => {
            if k.hurst.is_some() {
                return Err(invalid(&f("H"), "Brownian motion has no Hurst parameter"));
            }
            Kernel::bm()
        }
        VariantName::Ou => {
            let theta = k.theta.ok_or_else(|| missing(&f("theta")))?;
            let sigma = k.sigma.ok_or_else(|| missing(&f("sigma")))?;
            Kernel::ou(theta, sigma).map_err(at(field))?
        }
    };
    let kernel = match &k.rescale {
        Some(r) => {
            let g =
                r.g.clone()
                    .unwrap_or_else(|| vec![AxisMap::Identity; base.dim()]);
            base.rescale(r.f.clone(), g).map_err(at(&f("rescale")))?
        }
        None => base,
    };
    Ok(match &k.constants {
        Some(c) => kernel.with_constants(c.clone()),
        None => kernel,
    })
}

fn resolve_target(t: &TargetConfig, field: &str) -> Result<TargetSet, CliError> {
    let need = |v: &Option<Vec<f64>>, name: &str| {
        v.clone().ok_or_else(|| missing(&format!("{field}.{name}")))
    };
    let set =
        match t.kind.as_str() {
            "point" => TargetSet::point(need(&t.x, "x")?),
            "segment" => TargetSet::segment(need(&t.a, "a")?, need(&t.b, "b")?),
            "box" => TargetSet::cuboid(need(&t.lower, "lower")?, need(&t.upper, "upper")?),
            "point_cloud" => {
                let mesh = t.mesh.ok_or_else(|| missing(&format!("{field}.mesh")))?;
                let points = match (&t.points, &t.file) {
                    (Some(p), None) => p.clone(),
                    (None, Some(path)) => {
                        load_point_cloud(path).map_err(at(&format!("{field}.file")))?
                    }
                    (Some(_), Some(_)) => {
                        return Err(invalid(field, "give either `points` or `file`, not both"))
                    }
                    (None, None) => return Err(missing(&format!("{field}.points"))),
                };
                TargetSet::cloud(points, mesh)
            }
            "union" => {
                let members = t
                    .members
                    .as_ref()
                    .ok_or_else(|| missing(&format!("{field}.members")))?;
                let resolved = members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| resolve_target(m, &format!("{field}.members[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                TargetSet::union(resolved)
            }
            other => return Err(invalid(
                &format!("{field}.kind"),
                format!(
                    "unknown kind `{other}`, expected point, segment, box, point_cloud or union"
                ),
            )),
        };
    set.map_err(at(field))
}

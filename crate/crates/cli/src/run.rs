use std::path::{Path, PathBuf};
use std::time::Instant;

use polarlab_core::digest::config_digest;
use polarlab_core::io::{write_field_binary, write_field_csv};
use polarlab_core::labs::{
    collision_sweep, collision_threshold, covering_profile, extrapolate_to_zero,
    global_modulus_check, hitting_sweep, oscillation_scan, regime_sweep, CoveringConfig, Regime,
    SweepRow,
};
use polarlab_core::targets::{minkowski_fit, polarity_classify};
use polarlab_core::{RngSeed, Sampler};
use serde_json::{json, Value};

use crate::config::{self, ExperimentConfig};
use crate::error::CliError;
use crate::output::{manifest, num, opt, persist, plot_data, Artifact, RunRecord, Series};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "POLARLAB_OUT";
pub const DEFAULT_OUT: &str = "polarlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Sample,
    Hit,
    Collide,
    Sweep,
    Minkowski,
    Oscillate,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Sample => "sample",
            Subcommand::Hit => "hit",
            Subcommand::Collide => "collide",
            Subcommand::Sweep => "sweep",
            Subcommand::Minkowski => "minkowski",
            Subcommand::Oscillate => "oscillate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub overrides: Vec<String>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub record: RunRecord,
}

/// Digest and files of one experiment, before persistence.
pub struct Report {
    pub digest: String,
    pub artifacts: Vec<Artifact>,
}

pub fn run(cmd: Subcommand, args: &RunArgs) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let config = config::load(&args.config, &args.overrides)?;
    let (seed, generated) = match config.seed {
        Some(s) => (s, false),
        None => {
            let s = generate_seed();
            log::warn!("no seed configured; generated seed {s}");
            (s, true)
        }
    };
    log::info!("{} with seed {seed}", cmd.name());
    if args.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Resource(e.to_string()))?;
    let threads = pool.current_num_threads();
    let report = pool.install(|| execute(cmd, &config, seed))?;
    let dir = output_dir(args.out.as_deref(), &config);
    let mut artifacts = report.artifacts;
    let record = RunRecord {
        subcommand: cmd.name().to_string(),
        config_digest: report.digest,
        seed,
        seed_generated: generated,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        threads,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: manifest(&artifacts),
    };
    artifacts.push(Artifact::json("run.json", &record));
    let files = persist(&dir, &artifacts)?;
    log::info!("wrote {} files to {}", files.len(), dir.display());
    Ok(Outcome { dir, files, record })
}

/// `--out`, then `output.dir`, then the environment, then a fixed default.
pub fn output_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn generate_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    // splitmix64 finalizer over time and pid
    let mut z = nanos ^ ((std::process::id() as u64) << 32);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one subcommand without touching the filesystem.
pub fn execute(cmd: Subcommand, config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    match cmd {
        Subcommand::Sample => sample(config, seed),
        Subcommand::Hit => hit(config, seed),
        Subcommand::Collide => collide(config, seed),
        Subcommand::Sweep => sweep(config, seed),
        Subcommand::Minkowski => minkowski(config),
        Subcommand::Oscillate => oscillate(config, seed),
    }
}

/// Digest of the resolved inputs of a subcommand.
pub fn digest_of(cmd: Subcommand, inputs: Value) -> String {
    config_digest(&json!({ "subcommand": cmd.name(), "inputs": inputs }))
}

fn summary(cmd: Subcommand, digest: &str, seed: Option<u64>, body: Value) -> Artifact {
    let mut v = json!({ "subcommand": cmd.name(), "config_digest": digest, "seed": seed });
    if let (Value::Object(head), Value::Object(rest)) = (&mut v, body) {
        head.extend(rest);
    }
    Artifact::json("summary.json", &v)
}

fn components(config: &ExperimentConfig, default: usize) -> Result<usize, CliError> {
    match config.lab.components {
        Some(0) => Err(CliError::Config(
            "invalid `lab.components`: need at least 1".into(),
        )),
        Some(d) => Ok(d),
        None => Ok(default),
    }
}

fn sample(config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let cmd = Subcommand::Sample;
    let kernel = config.kernel()?;
    let grid = config.grid()?;
    let d = components(config, 1)?;
    let digest = digest_of(
        cmd,
        json!({ "kernel": kernel, "grid": grid, "components": d, "seed": seed }),
    );
    let sampler = Sampler::new(&kernel, &grid)?;
    let field = sampler.sample(d, RngSeed::new(seed))?;
    let mut csv = Vec::new();
    write_field_csv(&field, &mut csv)?;
    let mut artifacts = vec![Artifact::new("field.csv", csv)];
    if config.sample.binary {
        let mut bin = Vec::new();
        write_field_binary(&field, &mut bin)?;
        artifacts.push(Artifact::new("field.pfld", bin));
    }
    let ranges: Vec<[f64; 2]> = (0..d)
        .map(|c| {
            let xs = field.component(c);
            [
                xs.iter().copied().fold(f64::INFINITY, f64::min),
                xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ]
        })
        .collect();
    artifacts.push(summary(
        cmd,
        &digest,
        Some(seed),
        json!({
            "kernel": kernel.name(),
            "Q": kernel.q(),
            "alpha": kernel.alpha(),
            "grid_points": grid.len(),
            "components": d,
            "jitter": sampler.jitter(),
            "component_ranges": ranges,
        }),
    ));
    Ok(Report { digest, artifacts })
}

const SWEEP_COLUMNS: [&str; 6] = [
    "epsilon",
    "refinement",
    "grid_points",
    "p_hat",
    "stderr",
    "n",
];

fn sweep_cells(r: &SweepRow) -> Vec<String> {
    vec![
        num(r.epsilon),
        r.refinement.to_string(),
        r.grid_points.to_string(),
        num(r.estimate.p_hat),
        num(r.estimate.stderr),
        r.estimate.n.to_string(),
    ]
}

/// One `(ε, p̂, stderr)` series per refinement.
fn sweep_series(rows: &[SweepRow], refinements: usize) -> Vec<Series> {
    (0..refinements)
        .map(|g| {
            let cells: Vec<&SweepRow> = rows.iter().filter(|r| r.refinement == g).collect();
            Series {
                label: format!(
                    "refinement {g} ({} points)",
                    cells.first().map_or(0, |r| r.grid_points)
                ),
                rows: cells
                    .iter()
                    .map(|r| vec![r.epsilon, r.estimate.p_hat, r.estimate.stderr])
                    .collect(),
            }
        })
        .collect()
}

fn hit(config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let cmd = Subcommand::Hit;
    let kernel = config.kernel()?;
    let grids = config.grids()?;
    let target = config.target()?;
    let eps = config.epsilons()?;
    let n = config.replicates()?;
    let d = target.ambient_dim();
    if components(config, d)? != d {
        return Err(CliError::Config(format!(
            "invalid `lab.components`: the target lives in dimension {d}"
        )));
    }
    let digest = digest_of(
        cmd,
        json!({ "kernel": kernel, "grids": grids, "target": target, "epsilons": eps, "n": n, "seed": seed }),
    );
    let rows = hitting_sweep(&kernel, &grids, &target, &eps, n, RngSeed::new(seed))?;
    let extrapolated: Vec<Option<f64>> = (0..grids.len())
        .map(|g| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.refinement == g)
                .map(|r| (r.epsilon, r.estimate.p_hat))
                .unzip();
            extrapolate_to_zero(&x, &y).ok()
        })
        .collect();
    let table: Vec<Vec<String>> = rows.iter().map(sweep_cells).collect();
    let artifacts = vec![
        Artifact::csv("hit.csv", &SWEEP_COLUMNS, &table)?,
        Artifact::new(
            "hit.dat",
            plot_data(
                &["epsilon", "p_hat", "stderr"],
                &sweep_series(&rows, grids.len()),
                &[],
            )
            .into_bytes(),
        ),
        summary(
            cmd,
            &digest,
            Some(seed),
            json!({
                "Q": kernel.q(),
                "d": d,
                "extrapolated_p0": extrapolated,
                "estimates": rows,
            }),
        ),
    ];
    Ok(Report { digest, artifacts })
}

const REGIME_COLUMNS: [&str; 9] = [
    "epsilon",
    "refinement",
    "grid_points",
    "p_hat",
    "stderr",
    "n",
    "Q",
    "threshold",
    "regime",
];

fn regime_table(rows: &[SweepRow], q: f64, threshold: f64, regime: Regime) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut cells = sweep_cells(r);
            cells.extend([num(q), num(threshold), regime.as_str().to_string()]);
            cells
        })
        .collect()
}

fn collide(config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let cmd = Subcommand::Collide;
    let spec = config.ensemble(config.kernel()?)?;
    let grids = config.grids()?;
    let eps = config.epsilons()?;
    let n = config.replicates()?;
    let k = config.k();
    let threshold = collision_threshold(spec.beta, k)?;
    let q = spec.kernel.q();
    let regime = Regime::classify(q, threshold);
    let digest = digest_of(
        cmd,
        json!({ "ensemble": spec, "grids": grids, "k": k, "epsilons": eps, "n": n, "seed": seed }),
    );
    let rows = collision_sweep(&spec, &grids, k, &eps, n, RngSeed::new(seed))?;
    let artifacts = vec![
        Artifact::csv(
            "collide.csv",
            &REGIME_COLUMNS,
            &regime_table(&rows, q, threshold, regime),
        )?,
        Artifact::new(
            "collide.dat",
            plot_data(
                &["epsilon", "p_hat", "stderr"],
                &sweep_series(&rows, grids.len()),
                &[],
            )
            .into_bytes(),
        ),
        summary(
            cmd,
            &digest,
            Some(seed),
            json!({ "Q": q, "threshold": threshold, "regime": regime, "k": k, "estimates": rows }),
        ),
    ];
    Ok(Report { digest, artifacts })
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn sweep(config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let cmd = Subcommand::Sweep;
    let kernels = config.sweep_kernels()?;
    let grids = config.grids()?;
    let eps = config.epsilons()?;
    let n = config.replicates()?;
    let k = config.k();
    let mut stems: Vec<String> = kernels.iter().map(|(l, _)| file_stem(l)).collect();
    stems.sort();
    if stems.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config(
            "invalid `sweep.kernels`: duplicate labels".into(),
        ));
    }
    let specs = kernels
        .into_iter()
        .map(|(label, kernel)| Ok((label, config.ensemble(kernel)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let digest = digest_of(
        cmd,
        json!({
            "ensembles": specs.iter().map(|(l, s)| json!({ "label": l, "spec": s })).collect::<Vec<_>>(),
            "grids": grids, "k": k, "epsilons": eps, "n": n, "seed": seed,
        }),
    );
    let mut artifacts = Vec::new();
    let mut verdicts = Vec::new();
    for (label, spec) in &specs {
        log::info!("sweep {label}: Q = {}", spec.kernel.q());
        let v = regime_sweep(spec, k, &eps, &grids, n, RngSeed::new(seed))?;
        let stem = file_stem(label);
        artifacts.push(Artifact::csv(
            format!("sweep_{stem}.csv"),
            &REGIME_COLUMNS,
            &regime_table(&v.estimates, v.q, v.threshold, v.regime),
        )?);
        let trailer = vec![
            format!(
                "Q = {} threshold = {} regime = {}",
                v.q,
                v.threshold,
                v.regime.as_str()
            ),
            format!(
                "trend slopes of log p_hat on log epsilon: {:?}",
                v.trend_slopes
            ),
        ];
        artifacts.push(Artifact::new(
            format!("sweep_{stem}.dat"),
            plot_data(
                &["epsilon", "p_hat", "stderr"],
                &sweep_series(&v.estimates, grids.len()),
                &trailer,
            )
            .into_bytes(),
        ));
        verdicts.push(json!({ "label": label, "verdict": v }));
    }
    artifacts.push(summary(
        cmd,
        &digest,
        Some(seed),
        json!({ "k": k, "verdicts": verdicts }),
    ));
    Ok(Report { digest, artifacts })
}

/// Sixteen log-spaced radii from 10⁻¹ down to 10⁻³.
pub fn default_radii() -> Vec<f64> {
    (0..16)
        .map(|i| 10f64.powf(-1.0 - 2.0 * i as f64 / 15.0))
        .collect()
}

fn minkowski(config: &ExperimentConfig) -> Result<Report, CliError> {
    let cmd = Subcommand::Minkowski;
    let target = config.target()?;
    let radii = config.minkowski.radii.clone().unwrap_or_else(default_radii);
    let kappa = config.minkowski.kappa.unwrap_or(0.0);
    let kernel = config
        .kernel
        .as_ref()
        .map(|_| config.kernel())
        .transpose()?;
    let digest = digest_of(
        cmd,
        json!({ "target": target, "radii": radii, "kernel": kernel, "kappa": kappa }),
    );
    let fit = minkowski_fit(&target, &radii)?;
    let d = target.ambient_dim();
    let table: Vec<Vec<String>> = (0..fit.r_grid.len())
        .map(|i| {
            vec![
                num(fit.r_grid[i]),
                num(fit.volumes[i]),
                num(fit.volume_stderr[i]),
            ]
        })
        .collect();
    let series = Series {
        label: String::new(),
        rows: fit
            .r_grid
            .iter()
            .zip(&fit.volumes)
            .map(|(r, v)| vec![r.ln(), v.ln()])
            .collect(),
    };
    let trailer = vec![
        format!(
            "fit: log_volume = {} + {} * log_r",
            fit.intercept, fit.slope
        ),
        format!("theta_hat = {}", fit.theta_hat),
        format!("rms_residual = {}", fit.log_log_slope_residual),
    ];
    let polarity = kernel.as_ref().map(|k| {
        json!({
            "Q": k.q(),
            "kappa": kappa,
            "verdict": polarity_classify(k.q(), d, fit.theta_hat, kappa),
        })
    });
    let artifacts = vec![
        Artifact::csv("minkowski.csv", &["r", "volume", "stderr"], &table)?,
        Artifact::new(
            "minkowski.dat",
            plot_data(&["log_r", "log_volume"], &[series], &trailer).into_bytes(),
        ),
        summary(
            cmd,
            &digest,
            None,
            json!({
                "d": d,
                "theta_hat": fit.theta_hat,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "rms_residual": fit.log_log_slope_residual,
                "polarity": polarity,
            }),
        ),
    ];
    Ok(Report { digest, artifacts })
}

fn oscillate(config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let cmd = Subcommand::Oscillate;
    let kernel = config.kernel()?;
    let grid = config.grid()?;
    let n = config.replicates()?;
    let d = components(config, 1)?;
    let o = &config.oscillate;
    let r0 = o.r0.unwrap_or(0.125);
    let probes = o
        .probes
        .clone()
        .unwrap_or_else(|| vec![grid.rect().center()]);
    let eps_grid = o
        .eps_grid
        .clone()
        .unwrap_or_else(|| (4..=7).map(|k| 2f64.powi(-k)).collect());
    let covering = if o.orders.is_empty() {
        None
    } else {
        Some(CoveringConfig {
            kernel: kernel.clone(),
            grid: grid.clone(),
            components: d,
            anchor: o
                .anchor
                .clone()
                .unwrap_or_else(|| grid.rect().lower().to_vec()),
            target: config.target()?,
            orders: o.orders.clone(),
            constant: o.constant,
            theta: o.theta.unwrap_or(0.0),
            kappa: o.kappa.unwrap_or(0.0),
            n,
            seed: RngSeed::new(seed),
        })
    };
    let digest = digest_of(
        cmd,
        json!({
            "kernel": kernel, "grid": grid, "components": d, "n": n, "seed": seed,
            "r0": r0, "probes": probes, "eps_grid": eps_grid,
            "covering": covering.as_ref().map(|c| json!({
                "anchor": c.anchor, "target": c.target, "orders": c.orders,
                "constant": c.constant, "theta": c.theta, "kappa": c.kappa,
            })),
        }),
    );
    let s = RngSeed::new(seed);
    let osc = oscillation_scan(&kernel, &grid, d, r0, &probes, n, s)?;
    let modulus = global_modulus_check(&kernel, &grid, d, &eps_grid, n, s)?;
    let p = osc.probes.len();
    let osc_rows: Vec<Vec<String>> = osc
        .statistics
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i / p).to_string(), (i % p).to_string(), num(*v)])
        .collect();
    let mod_rows: Vec<Vec<String>> = modulus
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.epsilon),
                r.offsets.to_string(),
                r.empty.to_string(),
                opt(r.max_ratio),
                opt(r.p99_ratio),
                opt(r.median_ratio),
                opt(r.violation_fraction),
            ]
        })
        .collect();
    let mod_series = Series {
        label: String::new(),
        rows: modulus
            .rows
            .iter()
            .filter_map(|r| Some(vec![r.epsilon, r.max_ratio?, r.p99_ratio?]))
            .collect(),
    };
    let mut artifacts = vec![
        Artifact::csv(
            "oscillation.csv",
            &["replicate", "probe", "statistic"],
            &osc_rows,
        )?,
        Artifact::csv(
            "modulus.csv",
            &[
                "epsilon",
                "offsets",
                "empty",
                "max_ratio",
                "p99_ratio",
                "median_ratio",
                "violation_fraction",
            ],
            &mod_rows,
        )?,
        Artifact::new(
            "modulus.dat",
            plot_data(&["epsilon", "max_ratio", "p99_ratio"], &[mod_series], &[]).into_bytes(),
        ),
    ];
    let profile = covering.as_ref().map(covering_profile).transpose()?;
    if let Some(prof) = &profile {
        let rows: Vec<Vec<String>> = prof
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.order.to_string(),
                    num(r.threshold),
                    num(r.cube_diameter),
                    num(r.mean_good_fraction),
                    num(r.mean_selected),
                    num(r.mean_phi_mass),
                    num(r.phi_mass_stderr),
                ]
            })
            .collect();
        artifacts.push(Artifact::csv(
            "covering.csv",
            &[
                "order",
                "threshold",
                "cube_diameter",
                "mean_good_fraction",
                "mean_selected",
                "mean_phi_mass",
                "phi_mass_stderr",
            ],
            &rows,
        )?);
        let series = Series {
            label: String::new(),
            rows: prof
                .rows
                .iter()
                .map(|r| vec![r.order as f64, r.mean_phi_mass, r.phi_mass_stderr])
                .collect(),
        };
        artifacts.push(Artifact::new(
            "covering.dat",
            plot_data(&["order", "mean_phi_mass", "stderr"], &[series], &[]).into_bytes(),
        ));
    }
    artifacts.push(summary(
        cmd,
        &digest,
        Some(seed),
        json!({
            "Q": kernel.q(),
            "oscillation": {
                "r_grid": osc.r_grid,
                "probes": osc.probes,
                "quantiles": osc.quantiles,
                "fitted_constant": osc.fitted_constant,
                "violation_fraction": osc.violation_fraction,
            },
            "modulus": { "k4": modulus.k4, "rows": modulus.rows },
            "covering": profile.map(|p| json!({
                "constant": p.constant,
                "constant_fitted": p.constant_fitted,
                "rows": p.rows,
            })),
        }),
    ));
    Ok(Report { digest, artifacts })
}

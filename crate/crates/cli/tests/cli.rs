use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polarlab_cli::config::parse_str;
use polarlab_cli::output::{plot_data, Series};
use polarlab_cli::run::{execute, Subcommand};
use polarlab_core::digest::bytes_digest;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_polarlab");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn polarlab(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("POLARLAB_OUT")
        .env("RUST_LOG", "info")
        .output()
        .expect("spawn polarlab")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const HIT: &str = r#"
seed = 2
[kernel]
variant = "bm"
[domain]
lower = [1.0]
upper = [2.0]
refinements = [[17], [33]]
[target]
kind = "point"
x = [0.0]
[lab]
n = 300
epsilons = [0.2, 0.1, 0.05]
"#;

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = configs().join("sample_fbs.toml");
    let o = polarlab(&[
        "sample",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record = json(&out.join("run.json"));
    let outputs = record["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs
        .iter()
        .map(|e| e["path"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["field.csv", "field.pfld", "summary.json"]);
    for e in outputs {
        let bytes = fs::read(out.join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["sha256"].as_str().unwrap(), bytes_digest(&bytes));
        assert_eq!(e["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    assert_eq!(record["seed"], 7);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["config_digest"], record["config_digest"]);
    assert_eq!(summary["grid_points"], 33 * 33);
    let dump =
        polarlab_core::io::read_field_binary(fs::File::open(out.join("field.pfld")).unwrap())
            .unwrap();
    assert_eq!(dump.counts, vec![33, 33]);
    assert_eq!(dump.components, 2);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hit.toml", HIT);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let o = polarlab(&[
            "hit",
            "-c",
            cfg.to_str().unwrap(),
            "-o",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["hit.csv", "hit.dat", "summary.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let dat = fs::read_to_string(a.join("hit.dat")).unwrap();
    assert_eq!(dat.matches("# refinement").count(), 2);
    let csv = fs::read_to_string(a.join("hit.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "epsilon,refinement,grid_points,p_hat,stderr,n"
    );
    assert_eq!(csv.lines().count(), 1 + 6);
}

#[test]
fn missing_hurst_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "seed = 1\n[kernel]\nvariant = \"fbm\"\n[domain]\nlower = [1.0]\nupper = [2.0]\ncounts = [8]\n",
    );
    let out = tmp.path().join("never");
    let o = polarlab(&[
        "sample",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kernel.H"), "{err}");
    assert!(!out.exists());
}

#[test]
fn syntax_and_unknown_fields_report_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "seed = 1\n[kernel]\nvariant = \"bm\"\nHurst = 0.5\n",
    );
    let o = polarlab(&["sample", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("Hurst"), "{err}");

    let cfg = write(tmp.path(), "broken.toml", "seed = 1\n[kernel\n");
    let o = polarlab(&["sample", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = polarlab(&[
        "sample",
        "-c",
        tmp.path().join("absent.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn caps_map_to_resource_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hit.toml", HIT);
    let out = tmp.path().join("out");
    let o = polarlab(&[
        "hit",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "limits.max_replicates=100",
    ]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    // a dense covariance beyond the cap
    let o = polarlab(&[
        "sample",
        "-c",
        configs().join("sample_fbs.toml").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "kernel.variant=fbm",
        "--set",
        "kernel.H=0.5",
        "--set",
        "domain.counts=[80, 80]",
    ]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!out.exists());
}

#[test]
fn core_errors_map_to_exit_codes() {
    use polarlab_cli::CliError;
    use polarlab_core::Error;
    let code = |e: Error| CliError::from(e).exit_code();
    assert_eq!(code(Error::NotPsd { pivot: -1.0 }), 3);
    assert_eq!(
        code(Error::NoConvergence {
            iterations: 30,
            index: 0
        }),
        3
    );
    assert_eq!(code(Error::DegenerateAnchor { anchor: vec![0.0] }), 3);
    assert_eq!(
        code(Error::CapExceeded {
            what: "grid points",
            requested: 2,
            cap: 1
        }),
        4
    );
    assert_eq!(code(Error::EmptyTarget), 2);
    assert_eq!(
        code(Error::AtGridPoint {
            index: 3,
            source: Box::new(Error::Pairing {
                deviation: 1.0,
                index: 0
            }),
        }),
        3
    );
}

#[test]
fn output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hit.toml", HIT);
    let env_out = tmp.path().join("from-env");
    let o = Command::new(BIN)
        .args(["hit", "-c", cfg.to_str().unwrap()])
        .env("POLARLAB_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_out.join("hit.csv").exists());
}

#[test]
fn absent_seed_is_generated_and_logged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hit.toml", &HIT.replace("seed = 2\n", ""));
    let out = tmp.path().join("out");
    let o = polarlab(&[
        "hit",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let record = json(&out.join("run.json"));
    assert_eq!(record["seed_generated"], true);
    let seed = record["seed"].as_u64().unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("generated seed {seed}")));
    assert_eq!(json(&out.join("summary.json"))["seed"].as_u64(), Some(seed));
}

fn digest(cmd: Subcommand, text: &str) -> String {
    let cfg = parse_str(text).unwrap();
    execute(cmd, &cfg, cfg.seed.unwrap()).unwrap().digest
}

#[test]
fn digest_tracks_semantic_fields_only() {
    let base = digest(Subcommand::Hit, HIT);
    let reordered = r#"
[lab]
epsilons = [0.2, 0.1, 0.05]
n = 300
[target]
x = [0.0]
kind = "point"
[domain]
refinements = [[17], [33]]
upper = [2.0]
lower = [1.0]
[kernel]
variant = "bm"
[output]
dir = "elsewhere"
"#;
    assert_eq!(
        digest(Subcommand::Hit, &format!("seed = 2\n{reordered}")),
        base
    );
    assert_eq!(
        digest(
            Subcommand::Hit,
            &HIT.replace("upper = [2.0]", "upper = [2.00]")
        ),
        base
    );
    assert_ne!(
        digest(Subcommand::Hit, &HIT.replace("n = 300", "n = 301")),
        base
    );
    assert_ne!(
        digest(Subcommand::Hit, &HIT.replace("seed = 2", "seed = 3")),
        base
    );
    assert_ne!(
        digest(Subcommand::Hit, &HIT.replace("x = [0.0]", "x = [0.5]")),
        base
    );
    assert_ne!(
        digest(Subcommand::Hit, &HIT.replace("0.05]", "0.04]")),
        base
    );
}

#[test]
fn set_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hit.toml", HIT);
    let out = tmp.path().join("out");
    let o = polarlab(&[
        "hit",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "lab.n=50",
        "--set",
        "lab.epsilons=[0.3, 0.1]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("hit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",50")));

    let o = polarlab(&["hit", "-c", cfg.to_str().unwrap(), "--set", "seed.x=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = polarlab(&["hit", "-c", cfg.to_str().unwrap(), "--set", "lab.n"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_trio_regimes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("sweep_trio.toml");
    let o = polarlab(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "lab.n=100",
        "--set",
        "domain.refinements=[[17], [33]]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (h, regime) in [
        ("0.3", "supercritical"),
        ("0.5", "critical"),
        ("0.8", "subcritical"),
    ] {
        let csv = fs::read_to_string(out.join(format!("sweep_fbm_H{h}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().ends_with("Q,threshold,regime"));
        assert!(lines.all(|l| l.ends_with(regime)), "{h}");
        let dat = fs::read_to_string(out.join(format!("sweep_fbm_H{h}.dat"))).unwrap();
        assert_eq!(dat.matches("# refinement").count(), 2);
    }
    assert_eq!(
        json(&out.join("summary.json"))["verdicts"]
            .as_array()
            .unwrap()
            .len(),
        3
    );
}

#[test]
fn minkowski_segment_theta_near_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("minkowski_segment.toml");
    let o = polarlab(&[
        "minkowski",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let theta = json(&out.join("summary.json"))["theta_hat"]
        .as_f64()
        .unwrap();
    assert!((0.9..=1.1).contains(&theta), "{theta}");
    let dat = fs::read_to_string(out.join("minkowski.dat")).unwrap();
    assert!(dat.starts_with("# log_r log_volume\n"));
    assert!(dat.contains("# fit: log_volume = "));
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 16);
}

#[test]
fn empty_plot_data_is_header_only() {
    assert_eq!(
        plot_data(&["epsilon", "p_hat", "stderr"], &[], &[]),
        "# epsilon p_hat stderr\n"
    );
    let s = [
        Series {
            label: "a".into(),
            rows: vec![vec![1.0, 2.0]],
        },
        Series {
            label: "b".into(),
            rows: vec![vec![3.0, 4.5]],
        },
    ];
    assert_eq!(
        plot_data(&["x", "y"], &s, &[]),
        "# x y\n# a\n1 2\n\n\n# b\n3 4.5\n"
    );
}

#[test]
fn collide_and_oscillate_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = polarlab(&[
        "collide",
        "-c",
        configs().join("collide_bm.toml").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "lab.n=200",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["regime"], "critical");
    assert_eq!(summary["threshold"], 2.0);

    let out = tmp.path().join("o");
    let o = polarlab(&[
        "oscillate",
        "-c",
        configs().join("oscillate_bm.toml").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--set",
        "lab.n=40",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "oscillation.csv",
        "modulus.csv",
        "modulus.dat",
        "covering.csv",
        "covering.dat",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rows = fs::read_to_string(out.join("covering.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 3);
}

//! End-to-end behaviour of the `nepv` binary: output format, sidecar and
//! exit codes.

use std::path::Path;
use std::process::{Command, Output};

use nepv_cli::output::{meta_path, CSV_COLUMNS};
use nepv_cli::ExperimentSpec;

const SMALL_KS: &str = r#"
kind = "ks-perturb"

[estimator]
samples = 20

[ks]
n = 12
k = 2
h = [0.1]
eps = [1e-8, 1e-6]
seed = 7
"#;

fn nepv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nepv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn csv_header_is_the_documented_column_order() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "ks.toml", SMALL_KS);
    let out = nepv(&["run", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kind,replicate,seed,h,beta,eps,eps2,delta_target,delta,l,g,d,g_over_d,kappa,chi,\
         xi_star,tau_star,gamma_star,residual,iterations,converged,d_method,notes,status"
    );
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let fields: Vec<_> = row.split(',').collect();
        assert_eq!(fields.len(), CSV_COLUMNS.len(), "{row}");
        assert_eq!(fields[0], "ks-perturb");
        assert_eq!(*fields.last().unwrap(), "ok");
        assert_eq!(fields[3], "1.0000e-01");
    }
}

#[test]
fn sidecar_round_trips_the_resolved_spec() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "ks.toml", SMALL_KS);
    let csv = dir.path().join("out.csv");
    let out = nepv(&[
        "run",
        &config,
        "--out",
        csv.to_str().unwrap(),
        "--seed",
        "99",
        "--samples",
        "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = std::fs::read_to_string(meta_path(&csv)).unwrap();
    assert!(meta.contains("# wall_time_s:"));
    let spec = ExperimentSpec::from_toml(&meta).unwrap();
    assert_eq!(spec.seed(), 99);
    assert_eq!(spec.estimator.samples, 10);

    // Rerunning the sidecar reproduces the CSV byte for byte.
    let again = dir.path().join("again.csv");
    let rerun = nepv(&[
        "run",
        meta_path(&csv).to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn config_errors_exit_with_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "unknown.toml",
        &SMALL_KS.replace("seed = 7", "seed = 7\nwidth = 3"),
    );
    let out = nepv(&["run", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));

    let invalid = write(dir.path(), "invalid.toml", &SMALL_KS.replace("k = 2", "k = 12"));
    let out = nepv(&["run", &invalid]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ks.k"));

    let out = nepv(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3_after_writing_output() {
    let dir = tempfile::tempdir().unwrap();
    // A perturbation this large makes the perturbed B indefinite.
    let config = write(
        dir.path(),
        "fail.toml",
        "kind = \"tr-perturb\"\n[tr]\nn = 10\nk = 2\nbeta = [5]\neps = [100.0, 1e-8]\nseed = 1\n",
    );
    let csv = dir.path().join("fail.csv");
    let out = nepv(&["run", &config, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    let status: Vec<_> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(status, ["failed", "ok"]);
}

#[test]
fn unwritable_output_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "ks.toml", SMALL_KS);
    let bad = dir.path().join("no/such/dir/out.csv");
    let out = nepv(&["run", &config, "--out", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_configs_parse() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentSpec::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen > 0);
}

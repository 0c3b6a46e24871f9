use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use thermovisc::{build_mesh, write_field_csv, ScalarField64};

fn thermovisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermovisc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn negative_mu_cites_a5() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.ini",
        "[scenario]\ncommand = solve\n[problem]\nmu = -1\n",
    );
    let out = thermovisc(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(A5)") && err.contains("line 4"), "{err}");
}

#[test]
fn unknown_flux_key_is_named_with_all_other_issues() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.ini",
        "[scenario]\ncommand = solve\nmesh = 8\n[problem]\nflux = radial2\nf = power:alpha=0.2\n",
    );
    let out = thermovisc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("radial2") && err.contains("line 5"), "{err}");
    assert!(err.contains("line 6"), "second issue also reported: {err}");
}

#[test]
fn not_converged_exits_2_and_still_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "hard.ini",
        "[scenario]\ncommand = solve\nmesh = 16\n[problem]\nf = shifted:r0=-1,M=20,alpha=1\n\
         g = scaled:sine:10\n[solver]\nmax_iters = 5\n",
    );
    let out_dir = tmp.path().join("out");
    let out = thermovisc(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], false);
    assert!(summary["results"]["trace"]["stop_reason"].is_string());
    let trace = fs::read_to_string(out_dir.join("trace.dat")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 5);
}

#[test]
fn g_from_field_file_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = build_mesh(8).unwrap();
    let g = ScalarField64::from_fn_dirichlet(mesh, |p| p.x * (1.0 - p.x) * p.y);
    let mut buf = Vec::new();
    write_field_csv(&g, &mut buf).unwrap();
    fs::create_dir(tmp.path().join("data")).unwrap();
    fs::write(tmp.path().join("data/g.csv"), buf).unwrap();
    let cfg = write(
        tmp.path(),
        "file.ini",
        "[scenario]\ncommand = solve\nmesh = 8\n[problem]\ng = data/g.csv\n",
    );
    let out_dir = tmp.path().join("out");
    let out = thermovisc(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("u.csv").exists());

    // The file pins the mesh: overriding it is an error, not a silent resample.
    let out = thermovisc(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--mesh",
        "16",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mesh_override_and_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = thermovisc(&[
        "run",
        "--config",
        "builtin:epsilon-linear",
        "--out",
        tmp.path().to_str().unwrap(),
        "--mesh",
        "12",
        "--jobs",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(tmp.path().join("epsilon.dat")).unwrap();
    assert!(table.starts_with("# epsilon  dist_theta_L1  dist_u_H1\n"));
    assert_eq!(table.lines().count(), 4);
    let u = fs::read_to_string(tmp.path().join("eps_00/u.csv")).unwrap();
    assert!(u.starts_with("# scalar_field nx=12 ny=12"));
}

#[test]
fn catalog_lists_and_exports_every_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = thermovisc(&["catalog", "--export", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let listing = String::from_utf8_lossy(&out.stdout);
    for e in thermovisc_cli::catalog::CATALOG {
        assert!(listing.contains(e.name));
        let exported = tmp.path().join(format!("{}.ini", e.name));
        assert_eq!(fs::read_to_string(exported).unwrap(), e.text);
    }
}

#[test]
fn validate_reports_estimates() {
    let out = thermovisc(&["validate", "--config", "builtin:uniqueness-small-g"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["violations"].as_array().unwrap().is_empty());
    assert!((report["g_l2"].as_f64().unwrap() - 0.05).abs() < 1e-3);
}

#[test]
fn unknown_builtin_and_missing_file_exit_1() {
    assert_eq!(
        thermovisc(&["validate", "--config", "builtin:nope"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        thermovisc(&["validate", "--config", "/definitely/not/here.ini"])
            .status
            .code(),
        Some(1)
    );
}

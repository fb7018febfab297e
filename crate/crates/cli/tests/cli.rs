use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracpm_cli::{EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};

fn fracpm(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpm"))
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).expect("csv opens");
    reader
        .records()
        .map(|r| r.expect("record").iter().map(str::to_string).collect())
        .collect()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .expect("dir")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn unknown_subcommand_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&fracpm(tmp.path(), &["solve-everything"])), EXIT_CONFIG);
}

#[test]
fn invalid_config_is_rejected_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "horizon = 0.1\nunknown_key = 3\n").unwrap();
    let o = fracpm(tmp.path(), &["solve-pde", "--config", "bad.toml", "--out", "out"]);
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(!tmp.path().join("out").exists());

    fs::write(tmp.path().join("neg.toml"), "[problem]\nsigma = -1.0\n").unwrap();
    let o = fracpm(tmp.path(), &["solve-pde", "--config", "neg.toml", "--out", "out"]);
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(String::from_utf8_lossy(&o.stderr).contains("viscosity"));

    let o = fracpm(tmp.path(), &["solve-pde", "--threads", "0", "--out", "out"]);
    assert_eq!(code(&o), EXIT_CONFIG);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unwritable_output_is_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("taken"), "a file").unwrap();
    let o = fracpm(tmp.path(), &["verify-operators", "--out", "taken"]);
    assert_eq!(code(&o), EXIT_RUNTIME);
}

#[test]
fn constant_density_conserves_mass_without_dissipation() {
    let tmp = tempfile::tempdir().unwrap();
    // σ = 0.05 keeps the cutoff of the regularised datum inactive on the box.
    let config = "horizon = 0.02\ndt = 2e-3\n[problem]\nsigma = 0.05\n[grid]\nn = 32\n\
        [initial]\nshape = \"constant\"\nvalue = 0.25\n";
    fs::write(tmp.path().join("flat.toml"), config).unwrap();
    let o = fracpm(tmp.path(), &["solve-pde", "--config", "flat.toml", "--out", "out"]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let out = tmp.path().join("out");
    let header = csv::Reader::from_path(out.join("diagnostics.csv")).unwrap().headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap_or_else(|| panic!("column {name}"));
    let rows = read_csv(&out.join("diagnostics.csv"));
    assert_eq!(rows.len(), 11);
    let mass0: f64 = rows[0][col("mass")].parse().unwrap();
    for row in &rows {
        let mass: f64 = row[col("mass")].parse().unwrap();
        assert!((mass - mass0).abs() <= 1e-13 * mass0, "mass {mass} vs {mass0}");
        let (min, max): (f64, f64) = (row[col("min")].parse().unwrap(), row[col("linf")].parse().unwrap());
        assert!(max - min <= 1e-14, "range {min}..{max}");
        for name in ["dissipation_visc", "dissipation_frac"] {
            let v: f64 = row[col(name)].parse().unwrap();
            assert!(v.abs() <= 1e-12, "{name} = {v}");
        }
    }
    let snapshots = entries(&out).iter().filter(|n| n.starts_with("snapshot_")).count();
    assert_eq!(snapshots, 5);
}

#[test]
fn beta_zeta_sweep_writes_gaps_and_only_inside_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let config = "horizon = 0.02\ndt = 2e-3\n[zeta_sweep]\ngrid = { n = 64 }\n";
    fs::write(tmp.path().join("sweep.toml"), config).unwrap();
    let o = fracpm(tmp.path(), &["converge-beta-zeta", "--config", "sweep.toml", "--out", "out", "--strict"]);
    let out = tmp.path().join("out");
    assert_eq!(entries(tmp.path()), vec!["out".to_string(), "sweep.toml".to_string()]);
    assert_eq!(entries(&out), vec!["checks.csv", "gaps.csv", "manifest.txt", "rates.csv"]);
    let gaps = read_csv(&out.join("gaps.csv"));
    assert_eq!(gaps.iter().filter(|r| r[0] == "beta").count(), 4);
    assert_eq!(gaps.iter().filter(|r| r[0] == "zeta").count(), 4);
    for r in &gaps {
        let sup: f64 = r[3].parse().unwrap();
        assert!(sup.is_finite() && sup >= 0.0);
    }
    let checks = read_csv(&out.join("checks.csv"));
    let all_pass = checks.iter().all(|r| r.last().unwrap() == "true");
    assert_eq!(code(&o), if all_pass { EXIT_OK } else { EXIT_ACCEPTANCE });
}

#[test]
fn manifest_hashes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fracpm(tmp.path(), &["verify-operators", "--out", "out"]);
    assert_eq!(code(&o), EXIT_OK);
    let out = tmp.path().join("out");
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for name in entries(&out) {
        if name == "manifest.txt" {
            continue;
        }
        let hash = fracpm_cli::output::blob_hash(&fs::read(out.join(&name)).unwrap());
        assert!(manifest.contains(&format!("\"{name}\" = \"{hash}\"")), "{name} missing from manifest");
    }
    assert!(manifest.contains("subcommand = \"verify-operators\""));
}

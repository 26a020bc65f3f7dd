use std::path::Path;
use std::process::Command;

fn fluxlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fluxlab")).args(args).output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn scenario_list_names_every_scenario() {
    let o = fluxlab(&["scenario-list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for id in fluxlab::scenarios::REGISTRY {
        assert!(text.lines().any(|l| l.starts_with(&format!("{id},"))), "{id}");
    }
}

#[test]
fn config_run_writes_stable_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
seed = 4

[[scan]]
scenario = "flat_shear"
ladder = "0.2,2,3"
fluxes = ["cet", "dr"]
grid = { n = 256 }
test_function = { center = [0.1, 0.05], radius = 0.4 }

[bv]
cubic = "burgers"
drop_jump_correction = true
"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fluxlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["verdicts.csv", "scan_00_flat_shear_cet.csv", "scan_01_flat_shear_dr.csv", "bv_ledger.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let ledger = read(&a, "bv_ledger.csv");
    assert!(ledger.starts_with("# bv ledger cubic=burgers drop_jump_correction=true\n"));
    assert!(ledger.lines().any(|l| l == "heaviside,cr3,1/12,0"), "{ledger}");
    let scan = read(&a, "scan_00_flat_shear_cet.csv");
    assert_eq!(scan.lines().filter(|l| l.starts_with("cet,")).count(), 3);
}

#[test]
fn text_format_reports_to_stdout() {
    let o = fluxlab(&["bv-check", "--format", "text"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# fluxlab report\npassed true\n"));
    assert!(text.contains("\n[bv]\n"));
}

#[test]
fn failures_exit_with_two_and_keep_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    // the audit finishes before the scan fails
    std::fs::write(
        &cfg,
        "[audit]\nscenarios = [\"flat_shear\"]\nresolution = 64\n\n[[scan]]\nscenario = \"nope\"\nladder = \"0.1,2,2\"\ntest_function = { center = [0.0, 0.0], radius = 0.5 }\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = fluxlab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("scan[0]:nope"), "{err}");
    assert!(read(&out, "audit.csv").lines().count() > 1);

    let o = fluxlab(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = fluxlab(&["kernel-opt", "--m", "1,0,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_verdicts_exit_with_one() {
    // a too-short budget target: the fraction cannot be met in 60 evaluations
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.toml");
    std::fs::write(&cfg, "[[kernel_opt]]\nm = [[1.0, 0.0], [0.0, -1.0]]\nbudget = 60\ntarget_fraction = 0.01\n").unwrap();
    let o = fluxlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.lines().any(|l| l.contains("reaches_fraction_of_radial") && l.ends_with(",false")));
}

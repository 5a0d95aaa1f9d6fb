//! End-to-end checks of the batch front end: catalogue listing, scenario
//! validation, report determinism and exit codes.

use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_fieldprobe");

const SCENARIO: &str = r#"
seed = 42

[lattice]
n_t = 32
n_x = 96
dt = 0.07
dx = 0.1

[system]
mass = 0.9

[[probes]]
mass = 0.6
lambda = 0.3
coupling = { shape = "rectangle", t0 = 8, t1 = 10, x0 = 42, x1 = 52, amplitude = 8.0 }

[[probes]]
mass = 0.7
lambda = 0.4
coupling = { shape = "rectangle", t0 = 14, t1 = 15, x0 = 40, x1 = 55, amplitude = 0.6 }

[test_functions]
h = { shape = "bump", t0 = 20, t1 = 24, x0 = 40, x1 = 56, amplitude = 1.0 }
h2 = { shape = "bump", t0 = 21, t1 = 23, x0 = 44, x1 = 52, amplitude = 0.7 }

[[experiments]]
name = "scattered_pair"

[[experiments]]
name = "variance"

[[experiments]]
name = "instruments_compose"

[[experiments]]
name = "factorization"
samples = 3

[[experiments]]
name = "born_sweep"

[[experiments]]
name = "worldline_response"
"#;

fn write_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, SCENARIO).unwrap();
    path
}

#[test]
fn list_catalogue_is_stable_and_complete() {
    let out = Command::new(BIN).args(["list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "scattered_pair",
        "induced_observable",
        "variance",
        "star_product",
        "instruments_compose",
        "factorization",
        "born_sweep",
        "worldline_response",
    ] {
        assert!(text.contains(name), "catalogue missing {name}");
    }
    let json_out = Command::new(BIN).args(["list", "--json"]).output().unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 8);
}

#[test]
fn validate_accepts_good_and_rejects_bad() {
    let dir = tempdir();
    let path = write_scenario(&dir);
    let ok = Command::new(BIN).args(["validate"]).arg(&path).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad_path = dir.join("bad.toml");
    std::fs::write(&bad_path, SCENARIO.replace("scattered_pair", "no_such_thing")).unwrap();
    let bad = Command::new(BIN).args(["validate"]).arg(&bad_path).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("no_such_thing"));
}

#[test]
fn run_is_deterministic_and_exits_clean() {
    let dir = tempdir();
    let path = write_scenario(&dir);
    let out1 = dir.join("out1");
    let out2 = dir.join("out2");
    for out in [&out1, &out2] {
        let status = Command::new(BIN)
            .args(["run"])
            .arg(&path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success(), "run failed");
    }
    // byte-identical reports and data files
    let mut names: Vec<String> = std::fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "nondeterministic output in {name}");
    }
    // reports carry the config hash and pass flags
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("00_scattered_pair.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["experiment"], serde_json::json!("scattered_pair"));
}

#[test]
fn seed_override_changes_randomized_outputs() {
    let dir = tempdir();
    let path = write_scenario(&dir);
    let out1 = dir.join("s1");
    let out2 = dir.join("s2");
    for (out, seed) in [(&out1, "1"), (&out2, "2")] {
        let status = Command::new(BIN)
            .args(["run"])
            .arg(&path)
            .arg("--out")
            .arg(out)
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out1.join("03_factorization.json")).unwrap();
    let b = std::fs::read(out2.join("03_factorization.json")).unwrap();
    assert_ne!(a, b, "seed override should change randomized reports");
}

#[test]
fn zero_coupling_scattered_pair_reports_trivial_and_passes() {
    let dir = tempdir();
    let zero = SCENARIO.replace("amplitude = 8.0", "amplitude = 0.0");
    let path = dir.join("zero.toml");
    std::fs::write(&path, &zero).unwrap();
    let out = dir.join("zero_out");
    // probe 1 still couples, so only run the single-probe experiments
    let trimmed = zero
        .split("[[experiments]]")
        .next()
        .unwrap()
        .to_string()
        + "[[experiments]]\nname = \"scattered_pair\"\n";
    std::fs::write(&path, trimmed).unwrap();
    let status = Command::new(BIN)
        .args(["run"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("00_scattered_pair.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert_eq!(report["outputs"]["f_minus_norm_inf"], serde_json::json!(0.0));
}

#[test]
fn tolerance_failure_exits_with_code_two() {
    let dir = tempdir();
    // an impossibly tight identity tolerance forces a tolerance failure
    let strict = format!(
        "{SCENARIO}\n[tolerances]\nidentity = 1e-30\nadditivity = 1e-30\n"
    );
    let path = dir.join("strict.toml");
    std::fs::write(&path, strict).unwrap();
    let out = Command::new(BIN)
        .args(["run"])
        .arg(&path)
        .arg("--out")
        .arg(dir.join("strict_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL"), "{text}");
}

#[test]
fn reports_embed_version_and_hash() {
    let dir = tempdir();
    let path = write_scenario(&dir);
    let out = dir.join("meta_out");
    assert!(Command::new(BIN)
        .args(["run"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("01_variance.json")).unwrap()).unwrap();
    assert_eq!(report["version"], serde_json::json!(env!("CARGO_PKG_VERSION")));
    assert_eq!(report["seed"], serde_json::json!(42));
    assert!(report["inputs"]["coupling_sup"].is_array());
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fieldprobe-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

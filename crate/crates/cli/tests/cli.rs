mod schema;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use nlct::io::{read_measurements, read_volume, write_volume};
use nlct::{Grid, Signal};
use serde_json::Value;

fn ct(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ct"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("ct runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> Value {
    json(&Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name))
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "ct failed: {}", String::from_utf8_lossy(&o.stderr));
}

const SMALL_2D: &str = r#"{
  "phantom": { "dims": [32, 32], "voxel": 0.2, "preset": "soft" },
  "operator": { "kind": "radon2d", "angles": 60 },
  "reconstruction": { "method": "nonlinear", "iterations": 150 }
}"#;

#[test]
fn default_phantom_is_64_cubed_f32_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&ct(&["phantom"], None, &a));
    assert_ok(&ct(&["phantom"], None, &b));
    let raw = fs::read(a.join("phantom.raw")).unwrap();
    assert_eq!(raw.len(), 64 * 64 * 64 * 4);
    assert_eq!(raw, fs::read(b.join("phantom.raw")).unwrap());
    let side = json(&a.join("phantom.json"));
    assert_eq!(side["dims"], serde_json::json!([64, 64, 64]));
    assert_eq!(side["dtype"], "f32le");
    assert!(fs::read(a.join("phantom_z.pgm")).unwrap().starts_with(b"P5\n64 64\n255\n"));
    let manifest = json(&a.join("manifest_phantom.json"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["versions"]["nlct"].is_string());
    assert!(manifest["files"]["phantom.raw"].is_string());
}

#[test]
fn zero_dims_rejected_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{ "phantom": { "dims": [0, 64, 64] } }"#);
    let o = ct(&["phantom"], Some(&cfg), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("phantom.dims"));
    assert!(schema::validate(&schema("experiment.schema.json"), &json(&cfg), "$").is_err());
}

#[test]
fn unknown_key_rejected_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{ "reconstruction": { "method": "nonlinear", "iterations": 5, "lamda": 1 } }"#);
    let o = ct(&["reconstruct"], Some(&cfg), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("reconstruction.lamda"), "{err}");
    assert!(schema::validate(&schema("experiment.schema.json"), &json(&cfg), "$").is_err());
}

#[test]
fn shipped_configs_match_schema_and_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let exp = schema("experiment.schema.json");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        schema::validate(&exp, &json(&path), "$").unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let dir = tempfile::tempdir().unwrap();
        // `phantom` parses every block but only rasterizes
        let o = Command::new(env!("CARGO_BIN_EXE_ct"))
            .args(["phantom", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_ok(&o);
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn zero_phantom_gives_zero_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let vol = dir.path().join("zero.raw");
    let grid = Grid::new(vec![32, 32], vec![0.1, 0.1]).unwrap();
    write_volume(&vol, &Signal::with_grid(vec![0.0; 1024], grid).unwrap()).unwrap();
    let body = format!(
        r#"{{ "phantom": {{ "path": {:?}, "voxel": 0.1 }}, "operator": {{ "kind": "radon2d", "angles": 30 }} }}"#,
        vol.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), "c.json", &body);
    let out = dir.path().join("o");
    assert_ok(&ct(&["simulate"], Some(&cfg), &out));
    let set = read_measurements(&out.join("measurements.bin")).unwrap();
    assert!(!set.y.is_empty());
    assert!(set.y.iter().all(|&v| v == 0.0));
}

#[test]
fn simulated_measurements_roundtrip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_2D);
    let out = dir.path().join("o");
    assert_ok(&ct(&["simulate"], Some(&cfg), &out));
    let set = read_measurements(&out.join("measurements.bin")).unwrap();
    let bytes = fs::read(out.join("measurements.bin")).unwrap();
    let again: Vec<u8> = set.y.iter().flat_map(|v| v.to_le_bytes()).collect();
    assert_eq!(bytes, again);
    let truth = read_volume(&out.join("phantom.raw")).unwrap();
    assert_eq!(truth.len(), 32 * 32);
}

#[test]
fn metal_preset_has_near_opaque_rays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{ "phantom": { "preset": "metal" } }"#);
    let out = dir.path().join("o");
    assert_ok(&ct(&["simulate"], Some(&cfg), &out));
    let set = read_measurements(&out.join("measurements.bin")).unwrap();
    let ymax = set.y.iter().cloned().fold(0.0, f64::max);
    assert!(ymax > 0.999, "max y = {ymax}");
}

#[test]
fn reconstruct_needs_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_2D);
    let o = ct(&["reconstruct"], Some(&cfg), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reconstruct_both_methods_and_clamp_knob() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let base = write_config(dir.path(), "c.json", SMALL_2D);
    assert_ok(&ct(&["simulate"], Some(&base), &out));
    assert_ok(&ct(&["reconstruct"], Some(&base), &out));
    let nl = json(&out.join("recon_nonlinear_metrics.json"));
    assert!(nl["psnr"].as_f64().unwrap() > 25.0, "{nl}");
    let csv = fs::read_to_string(out.join("trajectory_nonlinear.csv")).unwrap();
    assert!(csv.starts_with("iter,err,loss,grad_norm,time_ms\n"));
    assert_eq!(csv.lines().count(), 152);

    let lin = SMALL_2D.replace(r#""method": "nonlinear""#, r#""method": "linearized""#);
    let lin_cfg = write_config(dir.path(), "lin.json", &lin);
    assert_ok(&ct(&["reconstruct"], Some(&lin_cfg), &out));
    let good = json(&out.join("recon_linearized_metrics.json"));
    assert_eq!(good["clamped"], 0);

    let clamp = lin.replace(r#""iterations": 150"#, r#""iterations": 150, "eps": 0.9"#);
    let clamp_cfg = write_config(dir.path(), "clamp.json", &clamp);
    assert_ok(&ct(&["reconstruct"], Some(&clamp_cfg), &out));
    let bad = json(&out.join("recon_linearized_metrics.json"));
    assert!(bad["clamped"].as_u64().unwrap() > 0);
    assert!(bad["psnr"].as_f64().unwrap() < good["psnr"].as_f64().unwrap());
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let base = write_config(dir.path(), "c.json", SMALL_2D);
    assert_ok(&ct(&["simulate"], Some(&base), &out));
    let body = SMALL_2D.replace(
        r#""method": "nonlinear", "iterations": 150"#,
        r#""method": "linearized", "iterations": 50, "step": 1e300"#,
    );
    let cfg = write_config(dir.path(), "div.json", &body);
    let o = ct(&["reconstruct"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at iteration"));
}

#[test]
fn mismatched_operator_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let base = write_config(dir.path(), "c.json", SMALL_2D);
    assert_ok(&ct(&["simulate"], Some(&base), &out));
    let other = write_config(dir.path(), "d.json", &SMALL_2D.replace(r#""angles": 60"#, r#""angles": 61"#));
    assert_eq!(ct(&["reconstruct"], Some(&other), &out).status.code(), Some(2));
}

#[test]
fn quick_verify_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let start = Instant::now();
    assert_ok(&ct(&["verify", "--quick", "--seed", "3"], None, &a));
    assert!(start.elapsed().as_secs() < 120);
    let summary = json(&a.join("summary.json"));
    schema::validate(&schema("summary.schema.json"), &summary, "$").unwrap();
    assert_eq!(summary["seed"], 3);
    let quantities: Vec<&str> =
        summary["reports"].as_array().unwrap().iter().map(|r| r["quantity"].as_str().unwrap()).collect();
    for q in [
        "first_step_neighborhood",
        "correlation_case1",
        "correlation_case2",
        "smoothness_ratio",
        "width_full_space",
        "width_l1_sparse",
        "phase_success_high",
        "phase_success_low",
    ] {
        assert!(quantities.contains(&q), "missing {q}");
    }
    for r in summary["reports"].as_array().unwrap() {
        if r["quantity"] == "correlation_case1" || r["quantity"] == "correlation_case2" {
            assert_eq!(r["samples"], 10_000);
        }
    }
    assert!(fs::read_to_string(a.join("phase.csv")).unwrap().starts_with("m,success_rate,trials\n"));

    assert_ok(&ct(&["verify", "--quick", "--seed", "3"], None, &b));
    for f in ["summary.json", "summary.csv", "phase.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn cli_seed_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{ "seed": 11, "phantom": { "dims": [16, 16] } }"#);
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_ct"))
        .args(["phantom", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_ok(&o);
    assert_eq!(json(&out.join("manifest_phantom.json"))["seed"], 5);
}

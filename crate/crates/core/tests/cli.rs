use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONE: &str = "
[model]
dimension = 3

[[model.ends]]
warp = \"cone\"
slope = 1.0
link_scale = 0.9

[domain]
kind = \"coordinate\"
radius = 1.0
";

const COARSE_ELLIPSOID: &str = "
[model]
dimension = 3

[[model.ends]]
warp = \"cone\"
slope = 1.0

[domain]
kind = \"ellipsoid\"
axial = 2.0
equatorial = 1.0

[grid]
outer_radius = 64.0
radial_cells = 8
angular_cells = 8
";

fn conecap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conecap"))
        .args(args)
        .current_dir(dir)
        .env_remove("CONECAP_OUT")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(dir: &Path, preset: &str, config: &Path, out: &Path) -> Output {
    conecap(
        &[
            "run",
            preset,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        dir,
    )
}

fn only_subdir(root: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

#[test]
fn list_presets_names_all_seven() {
    let tmp = tempfile::tempdir().unwrap();
    let out = conecap(&["list-presets"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "thm1-potential",
        "thm2-imcf",
        "scaling-law",
        "liyau",
        "eccentricity",
        "level-areas",
        "two-ends",
    ] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn validate_reports_lines_and_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.toml", CONE);
    let out = conecap(&["validate", "--config", good.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: config hash "));

    let bad = write_config(
        tmp.path(),
        "bad.toml",
        &CONE.replace("slope = 1.0", "slope = -1.0\nhue = 2"),
    );
    let out = conecap(&["validate", "--config", bad.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.ends[0].hue"), "{err}");
    assert!(err.contains("line 8"), "{err}");
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cone.toml", CONE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for root in [&a, &b] {
        let out = run(tmp.path(), "liyau", &cfg, root);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.lines().any(|l| l.starts_with("PASS ")), "{text}");
        assert!(!text.contains("FAIL"));
    }
    let (da, db) = (only_subdir(&a), only_subdir(&b));
    assert_eq!(da.file_name(), db.file_name());
    assert!(da.file_name().unwrap().to_str().unwrap().starts_with("liyau-"));
    for name in ["liyau.csv", "gradient_bound.csv", "summary.json"] {
        assert_eq!(
            fs::read(da.join(name)).unwrap(),
            fs::read(db.join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(da.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert!(
        listed.contains(&"liyau.csv") && listed.contains(&"liyau.gp"),
        "{listed:?}"
    );
}

#[test]
fn output_root_falls_back_to_config_then_default() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cone.toml", &format!("output = \"from-config\"\n{CONE}"));
    let out = conecap(&["run", "scaling-law", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    only_subdir(&tmp.path().join("from-config"));

    let cfg = write_config(tmp.path(), "plain.toml", CONE);
    let out = conecap(&["run", "scaling-law", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success());
    only_subdir(&tmp.path().join("conecap-out"));
}

#[test]
fn failed_checks_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "coarse.toml", COARSE_ELLIPSOID);
    let out = run(tmp.path(), "scaling-law", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL scaling spread"));
    let dir = only_subdir(&tmp.path().join("out"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], false);
}

#[test]
fn unreliable_extrapolation_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{COARSE_ELLIPSOID}\n[ladders]\np = [2.5, 2.2, 1.9]\n");
    let cfg = write_config(tmp.path(), "far.toml", &body);
    let out = run(tmp.path(), "thm2-imcf", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("extrapolation unreliable"));
}

#[test]
fn config_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cone.toml", CONE);
    let out_root = tmp.path().join("out");
    assert_eq!(
        run(tmp.path(), "no-such-preset", &cfg, &out_root).status.code(),
        Some(4)
    );
    // a single-ended model cannot run the two-end decomposition
    assert_eq!(run(tmp.path(), "two-ends", &cfg, &out_root).status.code(), Some(4));
    let pinned = write_config(tmp.path(), "pinned.toml", &format!("preset = \"liyau\"\n{CONE}"));
    assert_eq!(
        run(tmp.path(), "thm1-potential", &pinned, &out_root).status.code(),
        Some(4)
    );
    let small = write_config(tmp.path(), "small.toml", &COARSE_ELLIPSOID.replace("64.0", "16.0"));
    let out = run(tmp.path(), "thm1-potential", &small, &out_root);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s ladder reaches 32"));
}

#[test]
fn missing_config_file_exits_5() {
    let tmp = tempfile::tempdir().unwrap();
    let out = conecap(&["validate", "--config", "absent.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn solver_stall_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{COARSE_ELLIPSOID}\n[solver]\nmax_outer = 2\nmax_halvings = 0\n");
    let cfg = write_config(tmp.path(), "stall.toml", &body);
    let out = run(tmp.path(), "thm1-potential", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver stalled"));
    let dir = only_subdir(&tmp.path().join("out"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stages"][0]["status"], "failed");
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let raw = fs::read_to_string(&path).unwrap();
            if let Err(e) = conecap::config::validate_config(&raw) {
                panic!("{}: {e}", path.display());
            }
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

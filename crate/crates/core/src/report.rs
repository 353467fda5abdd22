//! Result persistence: CSV tables, the JSON summary, gnuplot scripts and
//! the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::presets::{run_pipeline, Preset, PresetOutput, TableOut};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version tag of the JSON summary layout.
pub const SUMMARY_SCHEMA: &str = "conecap-summary/1";

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    /// Absent for the manifest itself.
    pub sha256: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageStatus {
    pub name: String,
    /// `ok`, `failed` or `skipped`.
    pub status: String,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub preset: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub started: String,
    pub finished: String,
    pub stages: Vec<StageStatus>,
    pub files: Vec<FileEntry>,
    /// Whether every acceptance check passed.
    pub passed: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<root>/<preset>-<first 8 hex digits of the config hash>`.
pub fn output_dir(root: &Path, preset: Preset, config: &ExperimentConfig) -> PathBuf {
    root.join(format!("{}-{}", preset.name(), &config.hash()[..8]))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], inventory: &mut Vec<FileEntry>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    inventory.push(FileEntry {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: Some(sha256_hex(bytes)),
    });
    Ok(())
}

/// Shortest representation that reads back to the same value.
fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}

fn table_csv(t: &TableOut, preset: Preset, hash: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(format!("# conecap {ARTIFACT_VERSION} preset {} config {hash}\n", preset.name()).as_bytes());
    for c in &t.comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Internal(format!("CSV encoding of {}: {e}", t.name));
    w.write_record(&t.columns).map_err(to_err)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| fmt_value(*v))).map_err(to_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(format!("CSV encoding of {}: {e}", t.name)))
}

fn plot_script(t: &TableOut) -> Option<String> {
    let plot = t.plot.as_ref()?;
    let mut s = String::new();
    s.push_str(&format!("# gnuplot script for {}.csv\n", t.name));
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set xlabel '{}'\n", t.columns[plot.x]));
    if plot.logx {
        s.push_str("set logscale x\n");
    }
    if plot.logy {
        s.push_str("set logscale y\n");
    }
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{}.png'\n", t.name));
    let series: Vec<String> = plot
        .y
        .iter()
        .map(|&y| format!("'{}.csv' using {}:{} with linespoints", t.name, plot.x + 1, y + 1))
        .collect();
    s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
    Some(s)
}

/// Writes every table as CSV with a plot script, and the JSON summary.
/// Returns the inventory in write order.
pub fn emit_report(output: &PresetOutput, config: &ExperimentConfig, dir: &Path) -> Result<Vec<FileEntry>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hash = config.hash();
    let mut inventory = Vec::new();
    for t in &output.tables {
        write_file(
            dir,
            &format!("{}.csv", t.name),
            &table_csv(t, output.preset, &hash)?,
            &mut inventory,
        )?;
        if let Some(script) = plot_script(t) {
            write_file(dir, &format!("{}.gp", t.name), script.as_bytes(), &mut inventory)?;
        }
    }
    let summary = json!({
        "schema": SUMMARY_SCHEMA,
        "artifact_version": ARTIFACT_VERSION,
        "preset": output.preset,
        "statement": output.statement,
        "config_hash": hash,
        "config": config,
        "passed": output.passed(),
        "checks": output.checks,
        "tables": output.tables.iter().map(|t| json!({ "file": format!("{}.csv", t.name), "columns": t.columns })).collect::<Vec<_>>(),
        "reports": output.reports,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Internal(format!("summary encoding: {e}")))?;
    write_file(dir, "summary.json", text.as_bytes(), &mut inventory)?;
    Ok(inventory)
}

/// Result of a preset run.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub directory: PathBuf,
    pub output: PresetOutput,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn write_manifest(dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifest.files.push(FileEntry {
        name: "manifest.json".into(),
        bytes: 0,
        sha256: None,
    });
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(format!("manifest encoding: {e}")))?;
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Runs a preset and writes its outputs under `<root>/<preset>-<hash8>`.
/// A failing pipeline still leaves a manifest recording the failed stage.
pub fn run_preset(preset: Preset, config: &ExperimentConfig, root: &Path) -> Result<RunOutcome> {
    if let Some(p) = &config.preset {
        if p != preset.name() {
            return Err(Error::InvalidConfig(vec![crate::error::ConfigIssue {
                line: None,
                path: "preset".into(),
                message: format!("configuration is for preset {p:?}, not {:?}", preset.name()),
            }]));
        }
    }
    let dir = output_dir(root, preset, config);
    let mut manifest = RunManifest {
        preset: preset.name().into(),
        config_hash: config.hash(),
        artifact_version: ARTIFACT_VERSION.into(),
        started: now(),
        finished: String::new(),
        stages: Vec::new(),
        files: Vec::new(),
        passed: false,
    };
    let clock = Instant::now();
    let output = match run_pipeline(preset, config) {
        Ok(o) => o,
        Err(e) => {
            manifest.stages.push(StageStatus {
                name: "pipeline".into(),
                status: "failed".into(),
                seconds: clock.elapsed().as_secs_f64(),
                message: Some(e.to_string()),
            });
            manifest.finished = now();
            write_manifest(&dir, &mut manifest)?;
            return Err(e);
        }
    };
    manifest.stages.push(StageStatus {
        name: "pipeline".into(),
        status: "ok".into(),
        seconds: clock.elapsed().as_secs_f64(),
        message: None,
    });
    let clock = Instant::now();
    manifest.files = emit_report(&output, config, &dir)?;
    manifest.stages.push(StageStatus {
        name: "emit".into(),
        status: "ok".into(),
        seconds: clock.elapsed().as_secs_f64(),
        message: None,
    });
    manifest.passed = output.passed();
    manifest.stages.push(StageStatus {
        name: "acceptance".into(),
        status: if manifest.passed { "ok" } else { "failed" }.into(),
        seconds: 0.0,
        message: None,
    });
    manifest.finished = now();
    write_manifest(&dir, &mut manifest)?;
    Ok(RunOutcome {
        manifest,
        directory: dir,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

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

    #[test]
    fn radial_thm2_writes_deterministic_outputs() {
        let cfg = validate_config(CONE).unwrap();
        let root = tempfile::tempdir().unwrap();
        let a = run_preset(Preset::Thm2Imcf, &cfg, root.path()).unwrap();
        assert!(a.manifest.passed, "{:?}", a.output.checks);
        let names: Vec<&str> = a.manifest.files.iter().map(|f| f.name.as_str()).collect();
        for n in [
            "imcf_constant.csv",
            "area_growth.csv",
            "summary.json",
            "manifest.json",
            "imcf_constant.gp",
        ] {
            assert!(names.contains(&n), "{names:?}");
        }
        let first = fs::read(a.directory.join("imcf_constant.csv")).unwrap();
        let text = String::from_utf8(first.clone()).unwrap();
        assert!(text.starts_with("# conecap"));
        assert!(text.lines().any(|l| l.starts_with("end,s,mean")));
        let b = run_preset(Preset::Thm2Imcf, &cfg, root.path()).unwrap();
        assert_eq!(a.directory, b.directory);
        assert_eq!(fs::read(b.directory.join("imcf_constant.csv")).unwrap(), first);
        let summary: serde_json::Value =
            serde_json::from_slice(&fs::read(a.directory.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["schema"], SUMMARY_SCHEMA);
        assert_eq!(summary["passed"], true);
    }

    #[test]
    fn preset_mismatch_rejected() {
        let cfg = validate_config(&format!("preset = \"liyau\"\n{CONE}")).unwrap();
        let root = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_preset(Preset::Thm2Imcf, &cfg, root.path()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn failed_pipeline_leaves_manifest() {
        let cfg = validate_config(CONE).unwrap();
        let root = tempfile::tempdir().unwrap();
        let r = run_preset(Preset::TwoEnds, &cfg, root.path());
        assert!(r.is_err());
        let dir = output_dir(root.path(), Preset::TwoEnds, &cfg);
        let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["stages"][0]["status"], "failed");
    }

    #[test]
    fn value_format_round_trips() {
        for v in [1.0, 0.1, 1e-300, 2.0 / 3.0, -4.5e12] {
            assert_eq!(fmt_value(v).parse::<f64>().unwrap(), v);
        }
    }
}

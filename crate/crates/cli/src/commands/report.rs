//! `kgs report`: aggregates the JSON reports of one output directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::output::write_json;

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct Verdict {
    source: String,
    claim: String,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct Manifest {
    inputs: Vec<String>,
    /// Distinct run configurations, keyed by the report that carried them.
    configs: BTreeMap<String, Value>,
    wall_times_s: BTreeMap<String, f64>,
    verdicts: Vec<Verdict>,
    claims_total: usize,
    claims_failed: usize,
    all_passed: bool,
    reports: BTreeMap<String, Value>,
}

fn read_reports(dir: &Path) -> CliResult<BTreeMap<String, Value>> {
    let entries = std::fs::read_dir(dir).map_err(|e| {
        CliError::Config(format!(
            "cannot read output directory {}: {e}",
            dir.display()
        ))
    })?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
            continue;
        };
        if !name.ends_with(".json") || name == MANIFEST {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed report {}: {e}", path.display())))?;
        out.insert(name, value);
    }
    if out.is_empty() {
        return Err(CliError::Config(format!(
            "no reports found in {}; run wave, spectrum, stability or evolve first",
            dir.display()
        )));
    }
    Ok(out)
}

pub fn run(dir: &Path) -> CliResult<()> {
    let reports = read_reports(dir)?;
    let mut configs = BTreeMap::new();
    let mut wall_times_s = BTreeMap::new();
    let mut verdicts = Vec::new();
    for (name, doc) in &reports {
        if let Some(cfg) = doc.get("config") {
            configs.insert(name.clone(), cfg.clone());
        }
        if let Some(t) = doc.get("wall_time_s").and_then(Value::as_f64) {
            wall_times_s.insert(name.clone(), t);
        }
        for c in doc
            .get("claims")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
        {
            verdicts.push(Verdict {
                source: name.clone(),
                claim: c
                    .get("claim")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_owned(),
                passed: c.get("passed").and_then(Value::as_bool).unwrap_or(false),
                detail: c
                    .get("detail")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_owned(),
            });
        }
    }
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| format!("{}: {} ({})", v.source, v.claim, v.detail))
        .collect();
    let manifest = Manifest {
        inputs: reports.keys().cloned().collect(),
        configs,
        wall_times_s,
        claims_total: verdicts.len(),
        claims_failed: failed.len(),
        all_passed: failed.is_empty(),
        verdicts,
        reports,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Claims(failed))
    }
}

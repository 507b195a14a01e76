pub mod evolve;
pub mod report;
pub mod spectrum;
pub mod stability;
pub mod wave;

use std::path::PathBuf;
use std::time::Instant;

use kgs_core::hillspec::Check;
use kgs_core::waves::WaveProfile;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{write_json, Claims};

/// Common envelope of every per-command JSON report.
#[derive(Serialize)]
struct Report<'a, B: Serialize> {
    command: &'static str,
    config: &'a RunConfig,
    wall_time_s: f64,
    results: B,
    claims: &'a [Check],
    all_passed: bool,
}

fn output_path(cfg: &RunConfig, name: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.output_dir.display())))?;
    Ok(cfg.output_dir.join(name))
}

/// Writes `<command>.json` and turns failed claims into an error.
fn finish<B: Serialize>(
    command: &'static str,
    cfg: &RunConfig,
    started: Instant,
    results: B,
    claims: &Claims,
) -> CliResult<()> {
    let report = Report {
        command,
        config: cfg,
        wall_time_s: started.elapsed().as_secs_f64(),
        results,
        claims: &claims.0,
        all_passed: claims.all_passed(),
    };
    write_json(&output_path(cfg, &format!("{command}.json"))?, &report)?;
    claims.verdict()
}

fn build_wave(cfg: &RunConfig, domain_multiple: usize) -> CliResult<WaveProfile> {
    Ok(WaveProfile::periodic(
        cfg.family,
        cfg.c,
        cfg.length,
        cfg.n,
        domain_multiple,
    )?)
}

/// One-period domain label used in claim names.
fn domain_label(m: usize) -> &'static str {
    if m == 1 {
        "[0,L]"
    } else {
        "[0,2L]"
    }
}

//! Run configuration: optional JSON file, command-line overrides, validation.

use std::path::{Path, PathBuf};

use clap::Args;
use kgs_core::evolve::default_dt;
use kgs_core::waves::{cnoidal_threshold, dnoidal_threshold, Family, System};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Default speed as a multiple of the admissibility threshold.
pub const DEFAULT_C_OVER_THRESHOLD: f64 = 1.2;

/// Fully resolved configuration, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: System,
    pub family: Family,
    #[serde(rename = "L")]
    pub length: f64,
    pub c: f64,
    /// Grid points per period.
    pub n: usize,
    pub domain_multiple: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Relative zero threshold for eigenvalue counts.
    pub zero_tol: f64,
    pub observe_every: usize,
    pub output_dir: PathBuf,
}

/// Config file contents; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<System>,
    pub family: Option<Family>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub c: Option<f64>,
    pub n: Option<usize>,
    pub domain_multiple: Option<usize>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub zero_tol: Option<f64>,
    pub observe_every: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SystemArg {
    Yukawa,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyArg {
    Cnoidal,
    Dnoidal,
}

/// Flags shared by every subcommand; they win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file mirroring the run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Wave period
    #[arg(long = "L", global = true)]
    pub length: Option<f64>,
    /// Grid points per period
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub system: Option<SystemArg>,
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyArg>,
    /// Work on two periods instead of one
    #[arg(long, global = true)]
    pub double_domain: bool,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Final time
    #[arg(long = "T", global = true)]
    pub t_final: Option<f64>,
    /// Perturbation size
    #[arg(long = "eps", global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub zero_tol: Option<f64>,
    /// Record diagnostics every this many steps
    #[arg(long, global = true)]
    pub observe_every: Option<usize>,
    /// Output directory
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
}

pub fn threshold(family: Family, length: f64) -> f64 {
    match family {
        Family::Cnoidal => cnoidal_threshold(length),
        _ => dnoidal_threshold(length),
    }
}

fn threshold_formula(family: Family) -> &'static str {
    match family {
        Family::Cnoidal => "2 pi^2 / L^2",
        _ => "pi^2 / L^2",
    }
}

pub fn load_file(path: &Path) -> CliResult<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))
}

impl Overrides {
    /// Merges file and flags, fills defaults and validates common preconditions.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => ConfigFile::default(),
        };
        let system = self
            .system
            .map(|s| match s {
                SystemArg::Yukawa => System::Yukawa,
                SystemArg::Cubic => System::Cubic,
            })
            .or(file.system);
        let family = self
            .family
            .map(|f| match f {
                FamilyArg::Cnoidal => Family::Cnoidal,
                FamilyArg::Dnoidal => Family::Dnoidal,
            })
            .or(file.family);
        let family = match (family, system) {
            (Some(f), _) => f,
            (None, Some(System::Cubic)) => Family::Dnoidal,
            (None, _) => Family::Cnoidal,
        };
        if !matches!(family, Family::Cnoidal | Family::Dnoidal) {
            return Err(CliError::Config(format!(
                "family must be cnoidal or dnoidal, got {}",
                family.name()
            )));
        }
        let system = system.unwrap_or(family.system());
        if system != family.system() {
            return Err(CliError::Config(format!(
                "the {} family belongs to the {:?} system, not {system:?}",
                family.name(),
                family.system()
            )));
        }
        let length = self
            .length
            .or(file.length)
            .unwrap_or(2.0 * std::f64::consts::PI);
        if !(length.is_finite() && length > 0.0) {
            return Err(CliError::Config(format!(
                "L must be positive and finite, got {length}"
            )));
        }
        let th = threshold(family, length);
        let c = self.c.or(file.c).unwrap_or(DEFAULT_C_OVER_THRESHOLD * th);
        let domain_multiple = if self.double_domain {
            2
        } else {
            file.domain_multiple.unwrap_or(1)
        };
        let dt = self.dt.or(file.dt).unwrap_or_else(|| default_dt(length));
        let observe_every = self
            .observe_every
            .or(file.observe_every)
            .unwrap_or_else(|| ((0.1 / dt).round() as usize).max(1));
        let cfg = RunConfig {
            system,
            family,
            length,
            c,
            n: self.n.or(file.n).unwrap_or(128),
            domain_multiple,
            dt,
            t_final: self.t_final.or(file.t_final).unwrap_or(100.0),
            epsilon: self
                .epsilon
                .or(file.epsilon)
                .unwrap_or(if domain_multiple == 2 { 1e-4 } else { 1e-3 }),
            seed: self.seed.or(file.seed).unwrap_or(7),
            zero_tol: self
                .zero_tol
                .or(file.zero_tol)
                .unwrap_or(kgs_core::hillspec::ZERO_TOL_REL),
            observe_every,
            output_dir: self
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| "out".into()),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn threshold(&self) -> f64 {
        threshold(self.family, self.length)
    }

    /// Total samples on the computational domain.
    pub fn total_points(&self) -> usize {
        self.n * self.domain_multiple
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let th = self.threshold();
        if !(self.c.is_finite() && self.c > th) {
            return bad(format!(
                "c = {} admits no {} wave of period L = {}; the admissible interval is c > {} = {th}",
                self.c,
                self.family.name(),
                self.length,
                threshold_formula(self.family)
            ));
        }
        if self.n < 16 || !self.n.is_multiple_of(2) {
            return bad(format!("n must be even and at least 16, got {}", self.n));
        }
        if self.domain_multiple != 1 && self.domain_multiple != 2 {
            return bad(format!(
                "domain_multiple must be 1 or 2, got {}",
                self.domain_multiple
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return bad(format!(
                "T must be finite and at least dt, got {}",
                self.t_final
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.zero_tol > 0.0 && self.zero_tol < 1.0) {
            return bad(format!(
                "zero_tol must lie in (0, 1), got {}",
                self.zero_tol
            ));
        }
        if self.observe_every == 0 {
            return bad("observe_every must be at least 1".into());
        }
        Ok(())
    }
}

//! `kgs evolve`: perturbed wave dynamics with conservation and orbital
//! distance diagnostics.

use std::time::Instant;

use kgs_core::evolve::{
    fit_growth, make_perturbed, run as integrate, Direction, DistanceMode, GrowthFit,
    OrbitalDistance, RunConfig as Integration, RunDiagnostics, RunParams,
};
use kgs_core::stability::linearized_spectrum;
use serde::Serialize;

use super::{build_wave, domain_label, finish, output_path};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{write_csv, write_json, Claims};

pub const CHARGE_BUDGET: f64 = 1e-10;
pub const ENERGY_BUDGET: f64 = 1e-6;
/// Stable runs must stay within this multiple of epsilon.
pub const STABLE_FACTOR: f64 = 10.0;
pub const GROWTH_BUDGET: f64 = 0.1;

pub const PLOT_SCRIPT: &str = "series.gp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Seeded combination of the lowest Fourier modes
    Random,
    /// Most unstable eigenvector of the linearized generator
    Mode,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveOptions {
    pub perturbation: Option<Perturbation>,
    pub fit: Option<bool>,
}

#[derive(Serialize)]
struct EvolveResults {
    perturbation: Perturbation,
    distance_mode: DistanceMode,
    run: RunParams,
    wave_norm: f64,
    samples: usize,
    max_distance: f64,
    final_distance: f64,
    energy_drift: f64,
    charge_drift: f64,
}

#[derive(Serialize)]
struct GrowthReport<'a> {
    config: &'a RunConfig,
    sigma_linear: f64,
    fit: GrowthFit,
    rel_error: f64,
}

fn plot_script() -> String {
    [
        "# Orbital distance against time on a logarithmic axis.",
        "# usage: gnuplot -e \"datafile='series.csv'; outfile='dist.png'\" series.gp",
        "if (!exists(\"datafile\")) datafile = 'series.csv'",
        "if (!exists(\"outfile\")) outfile = 'dist.png'",
        "set datafile separator ','",
        "set terminal png size 900,600",
        "set output outfile",
        "set logscale y",
        "set format y '%.0e'",
        "set xlabel 't'",
        "set ylabel 'orbital distance'",
        "set grid",
        "plot datafile using 1:4 skip 1 with lines title 'dist(t)'",
        "",
    ]
    .join("\n")
}

fn write_series(cfg: &RunConfig, d: &RunDiagnostics) -> CliResult<()> {
    write_csv(
        &output_path(cfg, "series.csv")?,
        &["t", "E", "F", "dist"],
        &[&d.times, &d.e_series, &d.f_series, &d.dist_series],
    )?;
    std::fs::write(output_path(cfg, PLOT_SCRIPT)?, plot_script())?;
    Ok(())
}

pub fn run(cfg: &RunConfig, opts: EvolveOptions) -> CliResult<()> {
    let started = Instant::now();
    let m = cfg.domain_multiple;
    let perturbation = opts.perturbation.unwrap_or(if m == 1 {
        Perturbation::Random
    } else {
        Perturbation::Mode
    });
    let fit = opts.fit.unwrap_or(perturbation == Perturbation::Mode);
    let w = build_wave(cfg, m)?;

    let (direction, sigma) = match perturbation {
        Perturbation::Random => (Direction::RandomSmooth, None),
        Perturbation::Mode => {
            let spec = linearized_spectrum(&w)?;
            let Some(mode) = spec.unstable_mode else {
                return Err(CliError::Config(format!(
                    "no unstable mode on {} (sigma_max = {:e}); use --perturb random",
                    domain_label(m),
                    spec.sigma_max
                )));
            };
            (Direction::UnstableMode(mode.vector), Some(mode.sigma))
        }
    };
    if fit && sigma.is_none() {
        return Err(CliError::Config(
            "growth fitting needs --perturb mode".into(),
        ));
    }
    let distance_mode = match perturbation {
        Perturbation::Random => DistanceMode::PhaseTranslation,
        Perturbation::Mode => DistanceMode::PhaseOnly,
    };
    let wave_norm = OrbitalDistance::new(&w, distance_mode).wave_norm();
    let initial = make_perturbed(&w, &direction, cfg.epsilon, cfg.seed)?;
    let mut integration =
        Integration::new(cfg.t_final, cfg.dt, cfg.system, cfg.c, cfg.observe_every);
    // past the wave's own size the comparison with it carries no information
    if perturbation == Perturbation::Mode {
        integration.stop_distance = Some(wave_norm);
    }
    let diag = match integrate(&initial, &integration, Some((&w, distance_mode))) {
        Ok(d) => d,
        Err(e) => {
            write_series(cfg, &e.partial)?;
            return Err(e.error.into());
        }
    };
    write_series(cfg, &diag)?;

    let mut claims = Claims::default();
    let (ed, fd) = (diag.energy_drift(), diag.charge_drift());
    claims.add(
        "charge F conserved",
        fd <= CHARGE_BUDGET,
        format!("max relative drift {fd:e}, budget {CHARGE_BUDGET:e}"),
    );
    claims.add(
        "energy E conserved",
        ed <= ENERGY_BUDGET,
        format!("max relative drift {ed:e}, budget {ENERGY_BUDGET:e}"),
    );
    let max_distance = diag.max_distance();
    if perturbation == Perturbation::Random && m == 1 {
        let bound = STABLE_FACTOR * cfg.epsilon;
        claims.add(
            format!(
                "orbital distance stays below {STABLE_FACTOR} epsilon on {}",
                domain_label(m)
            ),
            max_distance <= bound,
            format!("max distance {max_distance:e}, bound {bound:e}"),
        );
    }
    if fit {
        let sigma = sigma.expect("checked above");
        let g = fit_growth(&diag, cfg.epsilon, wave_norm);
        let rel_error = (g.sigma_fit - sigma).abs() / sigma;
        claims.add(
            "fitted growth rate matches the linear sigma",
            g.grew && rel_error <= GROWTH_BUDGET,
            format!(
                "sigma_fit = {}, sigma = {sigma}, relative error {rel_error:e}",
                g.sigma_fit
            ),
        );
        let report = GrowthReport {
            config: cfg,
            sigma_linear: sigma,
            fit: g,
            rel_error,
        };
        write_json(&output_path(cfg, "growth.json")?, &report)?;
    }

    let results = EvolveResults {
        perturbation,
        distance_mode,
        run: diag.params.clone(),
        wave_norm,
        samples: diag.times.len(),
        max_distance,
        final_distance: *diag.dist_series.last().expect("at least one sample"),
        energy_drift: ed,
        charge_drift: fd,
    };
    finish("evolve", cfg, started, results, &claims)
}

//! `kgs stability`: convexity of `d(c)`, instability index and the
//! spectrum of the linearized generator.

use std::time::Instant;

use kgs_core::hillspec::Check;
use kgs_core::stability::{
    d_second_closed_dnoidal, d_second_numeric, instability_index, linearized_spectrum,
    mass_integral_cnoidal, sweep_speeds, IndexReport, MassIntegral,
};
use kgs_core::waves::{solve_modulus_cnoidal, Family};
use serde::Serialize;

use super::{build_wave, domain_label, finish};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::Claims;

pub const SWEEP_POINTS: usize = 20;
pub const CLOSED_FORM_BUDGET: f64 = 1e-6;
pub const IDENTITY_BUDGET: f64 = 1e-8;
/// Largest real part tolerated on a domain where no instability is expected.
pub const SIGMA_ZERO_BUDGET: f64 = 1e-6;
pub const REDUCTION_BUDGET: f64 = 1e-6;

#[derive(Serialize)]
struct Convexity {
    c: f64,
    numeric: f64,
    closed: Option<f64>,
    rel_diff: Option<f64>,
}

#[derive(Serialize)]
struct Linearized {
    sigma_max: f64,
    sigma_reduced: f64,
    tol: f64,
    cluster_radius: f64,
    cluster_gap: f64,
    symmetry_defect: f64,
    mode_residual: Option<f64>,
    /// Eigenvalues with real part above `tol`, as `[re, im]`.
    unstable: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct MassReport {
    #[serde(flatten)]
    integral: MassIntegral,
    matching_form: &'static str,
}

#[derive(Serialize)]
struct StabilityResults {
    d_second: Convexity,
    sweep: Vec<Convexity>,
    mass_integral: Option<MassReport>,
    index: IndexReport,
    linearized: Linearized,
}

fn convexity(cfg: &RunConfig, c: f64) -> CliResult<Convexity> {
    let numeric = d_second_numeric(c, cfg.length, cfg.family)?;
    let closed = match cfg.family {
        Family::Dnoidal => Some(d_second_closed_dnoidal(c, cfg.length)?),
        _ => None,
    };
    let rel_diff = closed.map(|cl| (cl - numeric).abs() / cl.abs());
    Ok(Convexity {
        c,
        numeric,
        closed,
        rel_diff,
    })
}

fn convexity_claims(claims: &mut Claims, what: &str, points: &[&Convexity]) {
    let worst = points
        .iter()
        .map(|p| p.numeric)
        .fold(f64::INFINITY, f64::min);
    claims.add(
        format!("d''(c) > 0 {what}"),
        worst > 0.0,
        format!("min d'' = {worst}"),
    );
    if points.iter().all(|p| p.closed.is_some()) {
        let diff = points
            .iter()
            .filter_map(|p| p.rel_diff)
            .fold(0.0f64, f64::max);
        claims.add(
            format!("closed-form d''(c) agrees with numeric differentiation {what}"),
            diff <= CLOSED_FORM_BUDGET,
            format!("max relative difference {diff:e}, budget {CLOSED_FORM_BUDGET:e}"),
        );
    }
}

fn index_claims(cfg: &RunConfig, r: &IndexReport) -> Vec<Check> {
    let mut out = Claims::default();
    let label = domain_label(r.domain_multiple);
    out.add(
        format!("L_I positive on Z over {label}"),
        r.li_positive_on_z,
        format!("min L_I on Z = {:e}", r.li_min_on_z),
    );
    match (cfg.family, r.domain_multiple) {
        (Family::Cnoidal, 2) => {
            out.add(
                format!("projected count n(L_R hat) = 2 on {label}"),
                r.n_lr_hat == 2,
                format!("n(L_R) = {}, n(L_R hat) = {}", r.n_lr, r.n_lr_hat),
            );
            out.add(
                format!("instability index = 2 on {label}"),
                r.index == 2,
                format!("index = {}", r.index),
            );
        }
        (_, 2) => out.add(
            format!("instability index > 0 on {label}"),
            r.index > 0,
            format!("index = {}", r.index),
        ),
        _ => out.add(
            format!("instability index = 0 on {label}"),
            r.index == 0,
            format!(
                "n(L_R) = {}, n(L_R hat) = {}, <L_R^-1 k, k> = {}",
                r.n_lr, r.n_lr_hat, r.constraint_pairing
            ),
        ),
    }
    out.0
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let mut claims = Claims::default();

    let d_second = convexity(cfg, cfg.c)?;
    convexity_claims(&mut claims, "at the configured speed", &[&d_second]);
    let sweep = sweep_speeds(cfg.family, cfg.length, SWEEP_POINTS)
        .into_iter()
        .map(|c| convexity(cfg, c))
        .collect::<CliResult<Vec<_>>>()?;
    convexity_claims(
        &mut claims,
        &format!("across {SWEEP_POINTS} speeds in (1.1, 10) x threshold"),
        &sweep.iter().collect::<Vec<_>>(),
    );

    let mass_integral = match cfg.family {
        Family::Cnoidal => {
            let k = solve_modulus_cnoidal(cfg.c, cfg.length)?;
            let integral = mass_integral_cnoidal(k, cfg.length, 4 * cfg.n)?;
            claims.add(
                "int varphi^2 = 2 omega int varphi over one period",
                integral.identity_residual <= IDENTITY_BUDGET,
                format!(
                    "relative residual {:e}, budget {IDENTITY_BUDGET:e}",
                    integral.identity_residual
                ),
            );
            Some(MassReport {
                matching_form: integral.matching_form(),
                integral,
            })
        }
        _ => None,
    };

    let w = build_wave(cfg, cfg.domain_multiple)?;
    let index = instability_index(&w)?;
    claims.0.extend(index_claims(cfg, &index));

    let spec = linearized_spectrum(&w)?;
    let label = domain_label(cfg.domain_multiple);
    if cfg.domain_multiple == 1 {
        claims.add(
            format!("J L has no eigenvalue with positive real part on {label}"),
            spec.sigma_max <= SIGMA_ZERO_BUDGET,
            format!(
                "sigma_max = {:e}, budget {SIGMA_ZERO_BUDGET:e}",
                spec.sigma_max
            ),
        );
    } else {
        claims.add(
            format!("J L has a real pair +-sigma, sigma > 0, on {label}"),
            spec.unstable_mode.is_some(),
            format!("sigma_max = {}", spec.sigma_max),
        );
        let rel =
            (spec.sigma_max - spec.sigma_reduced).abs() / spec.sigma_max.max(f64::MIN_POSITIVE);
        claims.add(
            "Schur sigma agrees with the symmetric reduction",
            rel <= REDUCTION_BUDGET,
            format!("relative difference {rel:e}, budget {REDUCTION_BUDGET:e}"),
        );
    }
    let mut unstable: Vec<[f64; 2]> = spec
        .eigenvalues
        .iter()
        .filter(|z| z.re > spec.tol)
        .map(|z| [z.re, z.im])
        .collect();
    unstable.sort_by(|a, b| b[0].total_cmp(&a[0]).then(a[1].total_cmp(&b[1])));
    let linearized = Linearized {
        sigma_max: spec.sigma_max,
        sigma_reduced: spec.sigma_reduced,
        tol: spec.tol,
        cluster_radius: spec.cluster_radius,
        cluster_gap: spec.cluster_gap,
        symmetry_defect: spec.symmetry_defect,
        mode_residual: spec.unstable_mode.as_ref().map(|m| m.residual),
        unstable,
    };

    let results = StabilityResults {
        d_second,
        sweep,
        mass_integral,
        index,
        linearized,
    };
    finish("stability", cfg, started, results, &claims)
}

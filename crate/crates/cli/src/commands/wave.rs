//! `kgs wave`: profile samples and parameters.

use std::collections::BTreeMap;
use std::time::Instant;

use kgs_core::waves::{first_integral_spread, ode_residual_field, WaveParams};
use serde::Serialize;

use super::{build_wave, finish, output_path};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{write_csv, Claims};

pub const RESIDUAL_BUDGET: f64 = 1e-8;
pub const INVARIANT_BUDGET: f64 = 1e-10;

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Params {
    Cnoidal {
        k: f64,
        kprime_sq: f64,
        omega: f64,
        alpha: f64,
        beta1: f64,
        beta2: f64,
        beta3: f64,
        #[serde(rename = "B")]
        b: f64,
    },
    Dnoidal {
        k: f64,
        kprime_sq: f64,
        eta: f64,
        #[serde(rename = "B")]
        b: f64,
    },
}

#[derive(Serialize)]
struct WaveResults {
    threshold: f64,
    params: Params,
    points: usize,
    domain_length: f64,
    ode_residual: f64,
    invariant_residuals: BTreeMap<&'static str, f64>,
    phi_max: f64,
    phi_min: f64,
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let w = build_wave(cfg, cfg.domain_multiple)?;
    let res = ode_residual_field(&w);
    let dphi = w.phi_prime();
    let xs = w.grid().points();
    write_csv(
        &output_path(cfg, "wave.csv")?,
        &["x", "phi", "phi_prime", "residual_local"],
        &[&xs, w.phi.values(), dphi.values(), res.values()],
    )?;

    let mut claims = Claims::default();
    let ode_residual = res.sup_norm();
    claims.add(
        "the sampled profile solves the profile equation",
        ode_residual <= RESIDUAL_BUDGET,
        format!("sup residual {ode_residual:e}, budget {RESIDUAL_BUDGET:e}"),
    );
    let (params, invariant_residuals) = match w.params {
        WaveParams::Cnoidal(p) => {
            let r = p.residuals();
            claims.add(
                "root ordering beta1 < beta2 < beta3",
                r.ordering_holds,
                format!("betas = ({}, {}, {})", p.beta1, p.beta2, p.beta3),
            );
            let spread = first_integral_spread(&w)?;
            let inv = BTreeMap::from([
                ("root_sum", r.root_sum),
                ("root_pairs", r.root_pairs),
                ("root_product", r.root_product),
                ("modulus", r.modulus),
                ("period", r.period),
                ("beta2_from_beta3", r.beta2_from_beta3),
                ("modulus_from_beta3", r.modulus_from_beta3),
                ("first_integral_spread", spread),
            ]);
            let params = Params::Cnoidal {
                k: p.modulus.k(),
                kprime_sq: p.modulus.kprime_sq(),
                omega: p.omega,
                alpha: p.alpha(),
                beta1: p.beta1,
                beta2: p.beta2,
                beta3: p.beta3,
                b: p.b_const,
            };
            (params, inv)
        }
        WaveParams::Dnoidal(p) => {
            let (c_rel, eta_rel) = p.residuals();
            let inv = BTreeMap::from([("speed", c_rel), ("eta", eta_rel)]);
            let params = Params::Dnoidal {
                k: p.modulus.k(),
                kprime_sq: p.modulus.kprime_sq(),
                eta: p.eta,
                b: p.b_const,
            };
            (params, inv)
        }
        WaveParams::Solitary { .. } => unreachable!("config admits periodic families only"),
    };
    // the first-integral spread is a grid statistic and the `_from_beta3`
    // forms go through an ill-conditioned quadratic; the rest are exact identities
    for (name, v) in &invariant_residuals {
        let budget = if matches!(
            *name,
            "first_integral_spread" | "beta2_from_beta3" | "modulus_from_beta3"
        ) {
            RESIDUAL_BUDGET
        } else {
            INVARIANT_BUDGET
        };
        claims.add(
            format!("parameter identity holds: {name}"),
            v.abs() <= budget,
            format!("residual {v:e}, budget {budget:e}"),
        );
    }
    let results = WaveResults {
        threshold: cfg.threshold(),
        params,
        points: w.grid().n(),
        domain_length: w.grid().length(),
        ode_residual,
        invariant_residuals,
        phi_max: w.phi.max(),
        phi_min: w.phi.min(),
    };
    finish("wave", cfg, started, results, &claims)
}

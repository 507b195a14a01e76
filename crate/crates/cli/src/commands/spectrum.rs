//! `kgs spectrum`: eigenvalue counts of the linearized operators and the
//! Lamé comparison for `L_1`.

use std::time::Instant;

use kgs_core::grid::{PeriodicGrid, RealField};
use kgs_core::hillspec::{
    assemble, assemble_scalar, delta_to_lambda, delta_to_lambda_dn, eig_sym_rel,
    ground_state_overlap, lame2_analytic, lame_analytic, lame_residual, orthogonality_check,
    set_difference, verify_counts_with, LameProblem, OperatorKind,
};
use kgs_core::waves::{Family, WaveParams, WaveProfile};
use serde::Serialize;

use super::{build_wave, domain_label, finish};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::Claims;

pub const ORTHOGONALITY_BUDGET: f64 = 1e-8;
/// Relative agreement demanded between discrete and closed-form Lamé eigenvalues.
pub const LAME_BUDGET: f64 = 1e-6;
pub const PLUG_IN_BUDGET: f64 = 1e-8;
const PLUG_IN_POINTS: usize = 256;

#[derive(Serialize)]
struct OperatorEntry {
    operator: OperatorKind,
    size: usize,
    n_negative: usize,
    kernel_dim: usize,
    zero_tol: f64,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct LameEntry {
    problem: LameProblem,
    deltas: Vec<f64>,
    predicted: Vec<f64>,
    discrete: Vec<f64>,
    max_rel_error: f64,
}

#[derive(Serialize)]
struct SpectrumResults {
    domain_multiple: usize,
    modulus: f64,
    operators: Vec<OperatorEntry>,
    lame: Vec<LameEntry>,
    orthogonality: Option<f64>,
    ground_state_overlap: Option<f64>,
}

#[derive(Serialize)]
struct FreeResults {
    points: usize,
    domain_length: f64,
    eigenvalues: Vec<f64>,
    symbols: Vec<f64>,
    max_rel_error: f64,
}

pub fn run(cfg: &RunConfig, free: bool) -> CliResult<()> {
    if free {
        return run_free(cfg);
    }
    let started = Instant::now();
    let m = cfg.domain_multiple;
    let w = build_wave(cfg, m)?;
    let label = domain_label(m);
    let mut claims = Claims::default();
    let mut operators = Vec::new();
    for kind in OperatorKind::all_for(cfg.system) {
        let rep = eig_sym_rel(&assemble(kind, &w)?, cfg.zero_tol, false)?;
        let counts = verify_counts_with(kind, &w, cfg.zero_tol)?;
        claims.extend_prefixed(&format!("{kind:?} on {label}"), &counts.checks);
        operators.push(OperatorEntry {
            operator: kind,
            size: rep.eigenvalues.len(),
            n_negative: rep.n_negative,
            kernel_dim: rep.kernel_dim,
            zero_tol: rep.zero_tol,
            eigenvalues: rep.eigenvalues,
        });
    }
    let l1 = OperatorKind::all_for(cfg.system)[0];

    let (mut orthogonality, mut overlap) = (None, None);
    if m == 2 {
        let rep = eig_sym_rel(&assemble(l1, &w)?, cfg.zero_tol, true)?;
        let ortho = orthogonality_check(&rep, &w)?;
        claims.add(
            format!("{l1:?} on {label}: second and third eigenfunctions orthogonal to phi"),
            ortho <= ORTHOGONALITY_BUDGET,
            format!("max normalized overlap {ortho:e}, budget {ORTHOGONALITY_BUDGET:e}"),
        );
        let (ov, _) = ground_state_overlap(&rep, &w)?;
        claims.add(
            format!("{l1:?} on {label}: ground state has positive overlap with phi"),
            ov > 0.0,
            format!("<chi_0, phi> = {ov}"),
        );
        orthogonality = Some(ortho);
        overlap = Some(ov);
    }

    let single_wave = if m == 1 {
        w.clone()
    } else {
        build_wave(cfg, 1)?
    };
    let single = &operators[0].eigenvalues;
    let single = if m == 1 {
        single.clone()
    } else {
        eig_sym_rel(&assemble(l1, &single_wave)?, cfg.zero_tol, false)?.eigenvalues
    };
    let mut lame = Vec::new();
    let mut compare =
        |problem: LameProblem, deltas: Vec<f64>, predicted: Vec<f64>, discrete: &[f64]| {
            let discrete = discrete[..predicted.len()].to_vec();
            let err = predicted
                .iter()
                .zip(&discrete)
                .map(|(p, d)| (p - d).abs() / p.abs().max(1.0))
                .fold(0.0f64, f64::max);
            claims.add(
                format!("{l1:?}: lowest {problem:?} eigenvalues match the Lamé closed forms"),
                err <= LAME_BUDGET,
                format!("max relative error {err:e}, budget {LAME_BUDGET:e}"),
            );
            lame.push(LameEntry {
                problem,
                deltas,
                predicted,
                discrete,
                max_rel_error: err,
            });
        };
    let (modulus, lame_for) = lame_mapping(&single_wave);
    for problem in [LameProblem::Periodic, LameProblem::Semiperiodic] {
        if problem == LameProblem::Semiperiodic && m == 1 {
            continue;
        }
        let (deltas, predicted) = lame_for(problem);
        if problem == LameProblem::Periodic {
            compare(problem, deltas, predicted, &single);
        } else {
            let semi = set_difference(&single, &operators[0].eigenvalues, 1e-6);
            compare(problem, deltas, predicted, &semi);
        }
    }
    if cfg.family == Family::Cnoidal {
        let k = kgs_core::elliptic::EllipticModulus::new(modulus)?;
        for problem in [LameProblem::Periodic, LameProblem::Semiperiodic] {
            let data = lame_analytic(k, problem);
            for i in 0..data.count {
                let r = lame_residual(&data, i, PLUG_IN_POINTS)?;
                claims.add(
                    format!("{problem:?} Lamé eigenfunction {i} satisfies its equation"),
                    r <= PLUG_IN_BUDGET,
                    format!("relative residual {r:e}, budget {PLUG_IN_BUDGET:e}"),
                );
            }
        }
    }

    let results = SpectrumResults {
        domain_multiple: m,
        modulus,
        operators,
        lame,
        orthogonality,
        ground_state_overlap: overlap,
    };
    finish("spectrum", cfg, started, results, &claims)
}

type LameFn = Box<dyn Fn(LameProblem) -> (Vec<f64>, Vec<f64>)>;

/// Modulus of the wave and the map from a Lamé problem to its closed-form
/// `delta` values and the `L_1` eigenvalues they predict.
fn lame_mapping(w: &WaveProfile) -> (f64, LameFn) {
    match w.params {
        WaveParams::Cnoidal(p) => (
            p.modulus.k(),
            Box::new(move |problem| {
                let d = lame_analytic(p.modulus, problem).deltas().to_vec();
                let l = d.iter().map(|&x| delta_to_lambda(x, &p)).collect();
                (d, l)
            }),
        ),
        WaveParams::Dnoidal(p) => (
            p.modulus.k(),
            Box::new(move |problem| {
                let d = lame2_analytic(p.modulus, problem);
                let l = d
                    .iter()
                    .map(|&x| delta_to_lambda_dn(x, p.eta, p.modulus))
                    .collect();
                (d, l)
            }),
        ),
        WaveParams::Solitary { .. } => unreachable!("config admits periodic families only"),
    }
}

fn run_free(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let g = PeriodicGrid::new(cfg.length * cfg.domain_multiple as f64, cfg.total_points())?;
    let op = assemble_scalar(&RealField::from_fn(g, |_| 0.0), cfg.c)?;
    let rep = eig_sym_rel(&op, cfg.zero_tol, false)?;
    let mut symbols: Vec<f64> = (0..g.n())
        .map(|j| 2.0 * cfg.c + g.wavenumber(j).powi(2))
        .collect();
    symbols.sort_by(f64::total_cmp);
    let max_rel_error = rep
        .eigenvalues
        .iter()
        .zip(&symbols)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0f64, f64::max);
    let mut claims = Claims::default();
    claims.add(
        "free operator -d^2 + 2c has the Fourier symbols as eigenvalues",
        max_rel_error <= 1e-10,
        format!("max relative error {max_rel_error:e}"),
    );
    let results = FreeResults {
        points: g.n(),
        domain_length: g.length(),
        eigenvalues: rep.eigenvalues,
        symbols,
        max_rel_error,
    };
    finish("spectrum", cfg, started, results, &claims)
}

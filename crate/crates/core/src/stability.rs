//! Conserved functionals, the convexity function `d''(c)`, the projected
//! instability index, and the spectrum of the linearized generator `J L`.
//!
//! States are written in real coordinates `U = (u1, v1, u2, v2)` =
//! `(Re u, v, Im u, v_t)`, stacked as four length-`n` blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::elliptic::{complete_e, complete_k, d_complete_e, d_complete_k, EllipticModulus};
use crate::error::{domain, Error, Result};
use crate::evolve::FieldState;
use crate::grid::{quadrature, spectral_derivative, DerivativeOrder, PeriodicGrid, RealField};
use crate::hillspec::{assemble_block, eig_sym, OperatorKind, SpectrumReport};
use crate::waves::{
    cnoidal_params, cnoidal_profile, cnoidal_threshold, dnoidal_params, dnoidal_threshold,
    solve_modulus_cnoidal, solve_modulus_dnoidal, Family, System, WaveProfile,
};

/// Points per period used when a functional is evaluated along the wave branch.
pub const BRANCH_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functionals {
    pub e: f64,
    pub f: f64,
    /// `E + c F`
    pub h: f64,
}

/// Charge `F = \int |u|^2`.
pub fn charge_f(s: &FieldState) -> f64 {
    s.u.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * s.u.grid().dx()
}

/// Energy with Klein-Gordon mass `m^2 = 2c`:
/// `1/2 \int |u_x|^2 + w^2 + v_x^2 + m^2 v^2 - 2 N(u, v)` with
/// `N = v |u|^2` (Yukawa) or `v^2 |u|^2` (cubic).
pub fn energy_e(s: &FieldState, system: System, c: f64) -> f64 {
    let g = s.u.grid();
    let (u1, u2) = s.real_parts();
    let u1x = spectral_derivative(&u1, DerivativeOrder::First);
    let u2x = spectral_derivative(&u2, DerivativeOrder::First);
    let vx = spectral_derivative(&s.v, DerivativeOrder::First);
    let mut acc = 0.0;
    for j in 0..g.n() {
        let (v, w) = (s.v.values()[j], s.w.values()[j]);
        let rho = s.u.values()[j].norm_sqr();
        let coupling = match system {
            System::Yukawa => v * rho,
            System::Cubic => v * v * rho,
        };
        acc += u1x.values()[j].powi(2)
            + u2x.values()[j].powi(2)
            + w * w
            + vx.values()[j].powi(2)
            + 2.0 * c * v * v
            - 2.0 * coupling;
    }
    0.5 * acc * g.dx()
}

pub fn functionals(s: &FieldState, system: System, c: f64) -> Functionals {
    let e = energy_e(s, system, c);
    let f = charge_f(s);
    Functionals { e, f, h: e + c * f }
}

/// `L^2` gradient of `H = E + c F` as the stacked `(u1, v1, u2, v2)` vector.
pub fn h_gradient(s: &FieldState, system: System, c: f64) -> Vec<f64> {
    let n = s.u.grid().n();
    let (u1, u2) = s.real_parts();
    let u1xx = spectral_derivative(&u1, DerivativeOrder::Second);
    let u2xx = spectral_derivative(&u2, DerivativeOrder::Second);
    let vxx = spectral_derivative(&s.v, DerivativeOrder::Second);
    let mut out = vec![0.0; 4 * n];
    for j in 0..n {
        let (a, b) = (u1.values()[j], u2.values()[j]);
        let v = s.v.values()[j];
        let rho = a * a + b * b;
        let (pot, dv) = match system {
            System::Yukawa => (v, rho),
            System::Cubic => (v * v, 2.0 * v * rho),
        };
        out[j] = -u1xx.values()[j] - 2.0 * pot * a + 2.0 * c * a;
        out[n + j] = -vxx.values()[j] + 2.0 * c * v - dv;
        out[2 * n + j] = -u2xx.values()[j] - 2.0 * pot * b + 2.0 * c * b;
        out[3 * n + j] = s.w.values()[j];
    }
    out
}

/// Sup norm of the `H` gradient at the standing wave.
pub fn h_gradient_residual(w: &WaveProfile) -> f64 {
    let s = FieldState::from_wave(w);
    h_gradient(&s, w.system(), w.c())
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `J(a, b, c, d) = (c/2, d, -a/2, -b)` acting blockwise on stacked vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SymplecticJ;

impl SymplecticJ {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len() % 4,
            0,
            "stacked vector length must be a multiple of 4"
        );
        let n = x.len() / 4;
        let mut y = vec![0.0; 4 * n];
        for j in 0..n {
            y[j] = 0.5 * x[2 * n + j];
            y[n + j] = x[3 * n + j];
            y[2 * n + j] = -0.5 * x[j];
            y[3 * n + j] = -x[n + j];
        }
        y
    }

    /// Explicit `J diag(L_R, L_I)` for `2n x 2n` blocks.
    pub fn compose(&self, lr: &DMatrix<f64>, li: &DMatrix<f64>) -> DMatrix<f64> {
        let m = lr.nrows();
        let n = m / 2;
        let d = |r: usize| if r < n { 0.5 } else { 1.0 };
        let mut out = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for r in 0..m {
            for c in 0..m {
                out[(r, m + c)] = d(r) * li[(r, c)];
                out[(m + r, c)] = -d(r) * lr[(r, c)];
            }
        }
        out
    }
}

fn check_branch(family: Family) -> Result<()> {
    match family {
        Family::Cnoidal | Family::Dnoidal => Ok(()),
        _ => domain("d(c) is defined along the periodic branches only"),
    }
}

fn threshold(family: Family, length: f64) -> f64 {
    match family {
        Family::Cnoidal => cnoidal_threshold(length),
        _ => dnoidal_threshold(length),
    }
}

/// `d'(c) = F(wave_c)` evaluated by quadrature on one period.
pub fn branch_charge(family: Family, c: f64, length: f64) -> Result<f64> {
    check_branch(family)?;
    let w = WaveProfile::periodic(family, c, length, BRANCH_POINTS, 1)?;
    Ok(charge_f(&FieldState::from_wave(&w)))
}

/// Central difference of `c -> F(wave_c)` with step `h`, Richardson-extrapolated once.
pub fn d_second_numeric_step(c: f64, length: f64, family: Family, h: f64) -> Result<f64> {
    check_branch(family)?;
    let th = threshold(family, length);
    if c - 2.0 * h <= th {
        return domain(format!(
            "c = {c} is within 2h = {} of the existence threshold {th}",
            2.0 * h
        ));
    }
    let diff = |h: f64| -> Result<f64> {
        Ok(
            (branch_charge(family, c + h, length)? - branch_charge(family, c - h, length)?)
                / (2.0 * h),
        )
    };
    let (d1, d2) = (diff(h)?, diff(0.5 * h)?);
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `d''(c)` with `h = 1e-4 c`.
pub fn d_second_numeric(c: f64, length: f64, family: Family) -> Result<f64> {
    d_second_numeric_step(c, length, family, 1e-4 * c)
}

/// `(4/L) d(KE)/dk / (dc/dk)` along the dnoidal branch.
pub fn d_second_closed_dnoidal(c: f64, length: f64) -> Result<f64> {
    let k = solve_modulus_dnoidal(c, length)?;
    Ok(d_second_closed_dnoidal_k(k, length))
}

/// Same as [`d_second_closed_dnoidal`], parametrized by the modulus.
pub fn d_second_closed_dnoidal_k(k: EllipticModulus, length: f64) -> f64 {
    let (kk, ee) = (complete_k(k), complete_e(k));
    let (dk, de) = (d_complete_k(k), d_complete_e(k));
    let d_ke = dk * ee + kk * de;
    let dc_dk = 4.0 * kk / (length * length) * (dk * (2.0 - k.k_sq()) - k.k() * kk);
    4.0 / length * d_ke / dc_dk
}

/// `f(k) = K^2 (sqrt(1 - k^2 + k^4) + 1 - 2k^2) + 3K (E - k'^2 K)`.
pub fn mass_f(k: EllipticModulus) -> f64 {
    let (kk, ee) = (complete_k(k), complete_e(k));
    let k2 = k.k_sq();
    kk * kk * ((1.0 - k2 + k2 * k2).sqrt() + 1.0 - 2.0 * k2) + 3.0 * kk * (ee - k.kprime_sq() * kk)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassIntegral {
    pub omega: f64,
    /// `\int_0^L varphi` by quadrature.
    pub quadrature: f64,
    /// `(16/L) f(k)`.
    pub closed: f64,
    /// `(16/L) omega f(k)`.
    pub closed_with_omega: f64,
    /// `|\int varphi^2 - 2 omega \int varphi| / \int varphi^2`.
    pub identity_residual: f64,
    /// Relative quadrature mismatch of each closed form.
    pub closed_error: f64,
    pub closed_with_omega_error: f64,
}

impl MassIntegral {
    /// Which closed form the quadrature supports.
    pub fn matching_form(&self) -> &'static str {
        if self.closed_error <= self.closed_with_omega_error {
            "without omega prefactor"
        } else {
            "with omega prefactor"
        }
    }
}

/// Quadrature of `\int_0^L varphi` on `n` points against both closed forms.
pub fn mass_integral_cnoidal(k: EllipticModulus, length: f64, n: usize) -> Result<MassIntegral> {
    let p = cnoidal_params(k, length)?;
    let w = cnoidal_profile(&p, &PeriodicGrid::new(length, n)?)?;
    let varphi = w.phi.map(|&x| 4.0 * x);
    let q1 = quadrature(&varphi);
    let q2 = quadrature(&varphi.map(|&x| x * x));
    let f = mass_f(k);
    let closed = 16.0 / length * f;
    let closed_w = closed * p.omega;
    Ok(MassIntegral {
        omega: p.omega,
        quadrature: q1,
        closed,
        closed_with_omega: closed_w,
        identity_residual: (q2 - 2.0 * p.omega * q1).abs() / q2,
        closed_error: (closed - q1).abs() / q1,
        closed_with_omega_error: (closed_w - q1).abs() / q1,
    })
}

fn operator_kinds(system: System) -> (OperatorKind, OperatorKind) {
    match system {
        System::Yukawa => (OperatorKind::LRcn, OperatorKind::LIcn),
        System::Cubic => (OperatorKind::LRdn, OperatorKind::LIdn),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    pub domain_multiple: usize,
    /// Unconstrained negative count of `L_R`.
    pub n_lr: usize,
    pub kernel_lr: usize,
    pub kernel_li: usize,
    /// `<L_R^{-1} k, k>` on the complement of `Ker L_R`, with `k` the unit
    /// kernel vector of `L_I` placed in the real-part space.
    pub constraint_pairing: f64,
    pub n_lr_hat: usize,
    pub n_li_inv_hat: usize,
    /// Smallest eigenvalue of `L_I` off its kernel.
    pub li_min_on_z: f64,
    pub li_positive_on_z: bool,
    pub cone_dim: usize,
    pub index: i64,
    pub zero_tol_lr: f64,
    pub zero_tol_li: f64,
}

fn check_unambiguous(r: &SpectrumReport) -> Result<()> {
    if let Some(value) = r.ambiguous() {
        return Err(Error::AmbiguousKernel {
            value,
            zero_tol: r.zero_tol,
        });
    }
    Ok(())
}

/// Modified Gram-Schmidt; drops vectors that are numerically dependent.
fn orthonormalize(vs: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for mut v in vs {
        let n0 = v.norm();
        for q in &out {
            let d = q.dot(&v);
            v.axpy(-d, q, 1.0);
        }
        let nv = v.norm();
        if nv > 1e-10 * n0 {
            out.push(v / nv);
        }
    }
    out
}

/// Projected negative counts on `Z = [Ker L_R + Ker L_I]^perp`.
///
/// Kernel vectors of `L_I` are carried over to the real-part space, where
/// they act as the charge constraint on `L_R`.
pub fn instability_index(w: &WaveProfile) -> Result<IndexReport> {
    let (kr, ki) = operator_kinds(w.system());
    let lr = assemble_block(kr, w)?;
    let li = assemble_block(ki, w)?;
    let rr = eig_sym(&lr, None, true)?;
    let ri = eig_sym(&li, None, true)?;
    check_unambiguous(&rr)?;
    check_unambiguous(&ri)?;
    let vr = rr.eigenvectors.as_ref().expect("vectors requested");
    let vi = ri.eigenvectors.as_ref().expect("vectors requested");
    let m = lr.size();

    let ker_r: Vec<DVector<f64>> = rr
        .kernel_indices()
        .into_iter()
        .map(|i| vr.column(i).into())
        .collect();
    let ker_i: Vec<DVector<f64>> = ri
        .kernel_indices()
        .into_iter()
        .map(|i| vi.column(i).into())
        .collect();
    if ker_i.is_empty() {
        return Err(Error::Internal(
            "L_I has no detected kernel; phase symmetry lost".into(),
        ));
    }

    let pairing = {
        let k = &ker_i[0];
        (0..m)
            .filter(|&j| rr.eigenvalues[j].abs() > rr.zero_tol)
            .map(|j| vr.column(j).dot(k).powi(2) / rr.eigenvalues[j])
            .sum::<f64>()
    };

    let basis = orthonormalize(ker_r.iter().chain(ker_i.iter()).cloned().collect());
    let mut p = DMatrix::<f64>::identity(m, m);
    for q in &basis {
        p -= q * q.transpose();
    }
    let plp = &p * &lr.matrix * &p;
    let proj = SymmetricEigen::try_new(plp, f64::EPSILON, 100 * m)
        .ok_or_else(|| Error::Eigen("projected L_R eigensolve did not converge".into()))?;
    let n_lr_hat = proj
        .eigenvalues
        .iter()
        .filter(|&&l| l < -rr.zero_tol)
        .count();

    let ker_li: std::collections::HashSet<usize> = ri.kernel_indices().into_iter().collect();
    let li_min_on_z = (0..m)
        .filter(|j| !ker_li.contains(j))
        .map(|j| ri.eigenvalues[j])
        .fold(f64::INFINITY, f64::min);
    let li_positive_on_z = ri.n_negative == 0 && li_min_on_z > ri.zero_tol;
    if !li_positive_on_z {
        return Err(Error::Internal(format!(
            "L_I is not positive off its kernel (min = {li_min_on_z:e}); negative cone not covered"
        )));
    }
    Ok(IndexReport {
        domain_multiple: crate::hillspec::domain_multiple(w),
        n_lr: rr.n_negative,
        kernel_lr: rr.kernel_dim,
        kernel_li: ri.kernel_dim,
        constraint_pairing: pairing,
        n_lr_hat,
        n_li_inv_hat: 0,
        li_min_on_z,
        li_positive_on_z,
        cone_dim: 0,
        index: n_lr_hat as i64,
        zero_tol_lr: rr.zero_tol,
        zero_tol_li: ri.zero_tol,
    })
}

/// Algebraic multiplicity of the zero eigenvalue of `J L` forced by the phase
/// and translation symmetries (two Jordan chains of length two).
pub const SYMMETRY_CLUSTER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct UnstableMode {
    pub sigma: f64,
    /// Stacked `(u1, v1, u2, v2)`, unit norm in `H^1 x H^1 x H^1 x L^2`.
    pub vector: Vec<f64>,
    /// `||J L x - sigma x||_inf / (sigma ||x||_inf)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSpectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part outside the symmetry cluster.
    pub sigma_max: f64,
    /// Growth-rate tolerance `1e-6 (2c)`.
    pub tol: f64,
    /// Largest modulus inside the symmetry cluster (roundoff splitting).
    pub cluster_radius: f64,
    /// Smallest modulus outside it.
    pub cluster_gap: f64,
    /// `sqrt(-mu_min)` from the symmetric reduction, zero if `mu_min >= 0`.
    pub sigma_reduced: f64,
    /// Max distance from each of `-lambda`, `conj(lambda)` to the spectrum, relative to `max |lambda|`.
    pub symmetry_defect: f64,
    pub unstable_mode: Option<UnstableMode>,
}

fn nearest(set: &[Complex64], z: Complex64) -> f64 {
    set.iter()
        .map(|w| (w - z).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric square root of a positive semidefinite matrix (negative rounding clipped).
fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 100 * a.nrows())
        .ok_or_else(|| Error::Eigen("square-root eigensolve did not converge".into()))?;
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&e.eigenvectors * d * e.eigenvectors.transpose())
}

/// `H^1 x H^1 x H^1 x L^2` norm of a stacked perturbation.
pub fn stacked_norm(x: &[f64], g: &PeriodicGrid) -> f64 {
    let n = g.n();
    let mut acc = 0.0;
    for b in 0..4 {
        let f = RealField::new(*g, x[b * n..(b + 1) * n].to_vec()).expect("block length");
        acc += quadrature(&f.map(|&v| v * v));
        if b < 3 {
            acc += quadrature(&spectral_derivative(&f, DerivativeOrder::First).map(|&v| v * v));
        }
    }
    acc.sqrt()
}

/// Full spectrum of the discretized `J L` with the symmetric-reduction
/// cross-check `lambda^2 = -mu`, `mu in spec(S^{1/2} L_R S^{1/2})`,
/// `S = D L_I D`, `D = diag(1/2, 1)`.
pub fn linearized_spectrum(w: &WaveProfile) -> Result<LinearizedSpectrum> {
    let (kr, ki) = operator_kinds(w.system());
    let lr = assemble_block(kr, w)?.matrix;
    let li = assemble_block(ki, w)?.matrix;
    let m = lr.nrows();
    let n = m / 2;
    let jl = SymplecticJ.compose(&lr, &li);
    let eigenvalues: Vec<Complex64> = jl.clone().complex_eigenvalues().iter().copied().collect();
    if eigenvalues
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Eigen(
            "nonsymmetric eigensolve produced non-finite values".into(),
        ));
    }

    let mut by_mod: Vec<usize> = (0..eigenvalues.len()).collect();
    by_mod.sort_by(|&a, &b| eigenvalues[a].norm().total_cmp(&eigenvalues[b].norm()));
    let cluster_radius = eigenvalues[by_mod[SYMMETRY_CLUSTER - 1]].norm();
    let cluster_gap = eigenvalues[by_mod[SYMMETRY_CLUSTER]].norm();
    let sigma_max = by_mod[SYMMETRY_CLUSTER..]
        .iter()
        .map(|&i| eigenvalues[i].re)
        .fold(0.0f64, f64::max);

    let scale = eigenvalues.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let symmetry_defect = eigenvalues
        .iter()
        .map(|&z| nearest(&eigenvalues, -z).max(nearest(&eigenvalues, z.conj())))
        .fold(0.0f64, f64::max)
        / scale;

    let dvec: Vec<f64> = (0..m).map(|r| if r < n { 0.5 } else { 1.0 }).collect();
    let s = DMatrix::from_fn(m, m, |r, c| dvec[r] * li[(r, c)] * dvec[c]);
    let sh = psd_sqrt(&s)?;
    let red = &sh * &lr * &sh;
    let red = (&red + red.transpose()) * 0.5;
    let re = SymmetricEigen::try_new(red, f64::EPSILON, 100 * m)
        .ok_or_else(|| Error::Eigen("reduced eigensolve did not converge".into()))?;
    let (imin, mu_min) = re
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    let sigma_reduced = if mu_min < 0.0 { (-mu_min).sqrt() } else { 0.0 };

    let tol = 1e-6 * 2.0 * w.c();
    let unstable_mode = if sigma_max > tol {
        let sigma = sigma_reduced;
        let x1 = &sh * re.eigenvectors.column(imin);
        let lx = &lr * &x1;
        let x2 = DVector::from_fn(m, |r, _| -dvec[r] * lx[r] / sigma);
        let mut x: Vec<f64> = x1.iter().chain(x2.iter()).copied().collect();
        let norm = stacked_norm(&x, w.grid());
        x.iter_mut().for_each(|v| *v /= norm);
        let xv = DVector::from_column_slice(&x);
        let res = (&jl * &xv - &xv * sigma).amax() / (sigma * xv.amax());
        Some(UnstableMode {
            sigma,
            vector: x,
            residual: res,
        })
    } else {
        None
    };

    Ok(LinearizedSpectrum {
        eigenvalues,
        sigma_max,
        tol,
        cluster_radius,
        cluster_gap,
        sigma_reduced,
        symmetry_defect,
        unstable_mode,
    })
}

/// `d''(c)` sweep points `c_th (1.1 + 8.9 i/(count-1))`.
pub fn sweep_speeds(family: Family, length: f64, count: usize) -> Vec<f64> {
    let th = threshold(family, length);
    (0..count)
        .map(|i| th * (1.1 + 8.9 * i as f64 / (count.max(2) - 1) as f64))
        .collect()
}

/// Direct closed-form `F` along the dnoidal branch, `4 K E / L`.
pub fn dnoidal_charge_closed(c: f64, length: f64) -> Result<f64> {
    let k = solve_modulus_dnoidal(c, length)?;
    let p = dnoidal_params(k, length)?;
    Ok(4.0 * complete_k(p.modulus) * complete_e(p.modulus) / length)
}

/// Cnoidal `F = (omega/4) \int varphi` in closed form via `f(k)`.
pub fn cnoidal_charge_closed(c: f64, length: f64) -> Result<f64> {
    let k = solve_modulus_cnoidal(c, length)?;
    Ok(0.5 * c * 16.0 / length * mass_f(k))
}

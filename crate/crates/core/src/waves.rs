//! Cnoidal and dnoidal standing-wave profiles.
//!
//! The Yukawa system carries the cnoidal family with `psi = sqrt(2) phi`,
//! where `phi` solves `-phi'' + 2c phi - 2 phi^2 = 0`. The profile is built
//! in the rescaled variable `varphi = 4 phi`, which solves
//! `-varphi'' + omega varphi - varphi^2 / 2 = 0` with `omega = 2c`.
//!
//! The cubic system carries the dnoidal family with `psi = phi` and
//! `(phi')^2 = -phi^4 + 2c phi^2 + 2B`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::elliptic::{complete_k, jacobi, EllipticModulus};
use crate::error::{domain, Error, Result};
use crate::grid::{spectral_derivative, DerivativeOrder, PeriodicGrid, RealField};

/// Modulus bracket used by every inversion.
pub const MODULUS_MIN: f64 = 1e-12;
pub const MODULUS_MAX: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// `f(s, t) = s`
    Yukawa,
    /// `f(s, t) = s t`
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Cnoidal,
    Dnoidal,
    SolitaryCn,
    SolitaryDn,
}

impl Family {
    pub fn system(self) -> System {
        match self {
            Family::Cnoidal | Family::SolitaryCn => System::Yukawa,
            Family::Dnoidal | Family::SolitaryDn => System::Cubic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Cnoidal => "cnoidal",
            Family::Dnoidal => "dnoidal",
            Family::SolitaryCn => "solitary-cn",
            Family::SolitaryDn => "solitary-dn",
        }
    }
}

impl System {
    /// Ratio `psi / phi` of the standing-wave ansatz.
    pub fn psi_ratio(self) -> f64 {
        match self {
            System::Yukawa => SQRT_2,
            System::Cubic => 1.0,
        }
    }
}

/// Lower end `2 pi^2 / L^2` of the cnoidal speed interval.
pub fn cnoidal_threshold(length: f64) -> f64 {
    2.0 * PI * PI / (length * length)
}

/// Lower end `pi^2 / L^2` of the dnoidal speed interval.
pub fn dnoidal_threshold(length: f64) -> f64 {
    PI * PI / (length * length)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnoidalParams {
    pub length: f64,
    pub c: f64,
    pub omega: f64,
    pub modulus: EllipticModulus,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// First-integral constant `B` with `beta1 beta2 beta3 = 6B`.
    pub b_const: f64,
}

/// Relative residuals of the identities tying the cnoidal parameters together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CnoidalResiduals {
    pub ordering_holds: bool,
    pub root_sum: f64,
    pub root_pairs: f64,
    pub root_product: f64,
    pub modulus: f64,
    pub period: f64,
    /// `beta2` recomputed from `(omega, beta3)` by the quadratic-root formula.
    pub beta2_from_beta3: f64,
    /// `k^2` recomputed from `(omega, beta3)`.
    pub modulus_from_beta3: f64,
}

impl CnoidalParams {
    /// Argument scale `sqrt((beta3 - beta1)/12) = 2K/L` of the `cn^2` profile.
    pub fn alpha(&self) -> f64 {
        ((self.beta3 - self.beta1) / 12.0).sqrt()
    }

    pub fn residuals(&self) -> CnoidalResiduals {
        let (b1, b2, b3) = (self.beta1, self.beta2, self.beta3);
        let w = self.omega;
        let kk = complete_k(self.modulus);
        let disc = (9.0 * w * w + 6.0 * w * b3 - 3.0 * b3 * b3).sqrt();
        let beta2_alt = 0.5 * (3.0 * w - b3 + disc);
        let k2_alt = (3.0 * b3 - 3.0 * w - disc) / (3.0 * b3 - 3.0 * w + disc);
        CnoidalResiduals {
            ordering_holds: b1 < 0.0 && 0.0 < b2 && b2 < 2.0 * w && 2.0 * w < b3 && b3 < 3.0 * w,
            root_sum: ((b1 + b2 + b3) - 3.0 * w).abs() / (3.0 * w),
            root_pairs: (b2 * b1 + b3 * b1 + b3 * b2).abs() / (w * w),
            root_product: if self.b_const == 0.0 {
                (b1 * b2 * b3).abs()
            } else {
                (b1 * b2 * b3 - 6.0 * self.b_const).abs() / (6.0 * self.b_const).abs()
            },
            modulus: ((b3 - b2) / (b3 - b1) - self.modulus.k_sq()).abs(),
            period: (4.0 * 3f64.sqrt() * kk / (b3 - b1).sqrt() - self.length).abs() / self.length,
            beta2_from_beta3: (beta2_alt - b2).abs() / w,
            modulus_from_beta3: (k2_alt - self.modulus.k_sq()).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnoidalParams {
    pub length: f64,
    pub c: f64,
    pub modulus: EllipticModulus,
    /// `eta = 2K/L`, both the amplitude and the argument scale.
    pub eta: f64,
    /// First-integral constant `B = -eta^4 k'^2 / 2`.
    pub b_const: f64,
}

impl DnoidalParams {
    /// Relative residuals of `c = 2K^2(2 - k^2)/L^2` and `eta = 2K/L`.
    pub fn residuals(&self) -> (f64, f64) {
        let kk = complete_k(self.modulus);
        let l2 = self.length * self.length;
        let c = 2.0 * kk * kk * (2.0 - self.modulus.k_sq()) / l2;
        let eta = 2.0 * kk / self.length;
        (
            (c - self.c).abs() / self.c,
            (eta - self.eta).abs() / self.eta,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveParams {
    Cnoidal(CnoidalParams),
    Dnoidal(DnoidalParams),
    Solitary { c: f64 },
}

/// A sampled standing-wave profile `phi_c` together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    pub family: Family,
    pub params: WaveParams,
    pub phi: RealField,
    pub psi_ratio: f64,
}

impl WaveProfile {
    pub fn c(&self) -> f64 {
        match self.params {
            WaveParams::Cnoidal(p) => p.c,
            WaveParams::Dnoidal(p) => p.c,
            WaveParams::Solitary { c } => c,
        }
    }

    pub fn system(&self) -> System {
        self.family.system()
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.phi.grid()
    }

    /// Fundamental period of the profile (the grid length for solitary waves).
    pub fn period(&self) -> f64 {
        match self.params {
            WaveParams::Cnoidal(p) => p.length,
            WaveParams::Dnoidal(p) => p.length,
            WaveParams::Solitary { .. } => self.grid().length(),
        }
    }

    /// The companion component `psi = psi_ratio * phi`.
    pub fn psi(&self) -> RealField {
        self.phi.map(|v| self.psi_ratio * v)
    }

    pub fn phi_prime(&self) -> RealField {
        spectral_derivative(&self.phi, DerivativeOrder::First)
    }

    /// Convenience constructor for a periodic family at speed `c` with
    /// period `length`, sampled with `n_per_period` points per period on a
    /// domain of `domain_multiple` periods.
    pub fn periodic(
        family: Family,
        c: f64,
        length: f64,
        n_per_period: usize,
        domain_multiple: usize,
    ) -> Result<Self> {
        let g = PeriodicGrid::new(
            length * domain_multiple as f64,
            n_per_period * domain_multiple,
        )?;
        match family {
            Family::Cnoidal => {
                let k = solve_modulus_cnoidal(c, length)?;
                cnoidal_profile(&cnoidal_params(k, length)?, &g)
            }
            Family::Dnoidal => dnoidal_profile(c, length, &g),
            _ => domain("periodic() builds cnoidal or dnoidal waves only"),
        }
    }
}

/// Bisection to full double precision on a strictly increasing map of `k`.
fn bisect_increasing(target: f64, f: impl Fn(EllipticModulus) -> f64) -> Result<EllipticModulus> {
    let eval = |k: f64| EllipticModulus::new(k).map(&f);
    let (mut lo, mut hi) = (MODULUS_MIN, MODULUS_MAX);
    let (flo, fhi) = (eval(lo)? - target, eval(hi)? - target);
    if flo > 0.0 {
        return Err(Error::Internal(format!(
            "modulus bracket does not contain the root: f(k_min) - target = {flo:e}"
        )));
    }
    if fhi < 0.0 {
        return domain(format!(
            "target {target} needs a modulus beyond 1 - 1e-12 (max reachable value {})",
            fhi + target
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (elo, ehi) = ((eval(lo)? - target).abs(), (eval(hi)? - target).abs());
    EllipticModulus::new(if elo <= ehi { lo } else { hi })
}

/// `omega(k) = 16 K^2 sqrt(1 - k^2 + k^4) / L^2`.
pub fn cnoidal_omega(k: EllipticModulus, length: f64) -> f64 {
    let kk = complete_k(k);
    let k2 = k.k_sq();
    16.0 * kk * kk * (1.0 - k2 + k2 * k2).sqrt() / (length * length)
}

/// `c(k) = 2 K^2 (2 - k^2) / L^2`.
pub fn dnoidal_speed(k: EllipticModulus, length: f64) -> f64 {
    let kk = complete_k(k);
    2.0 * kk * kk * (2.0 - k.k_sq()) / (length * length)
}

/// Unique modulus with `omega(k) = 2c` for the cnoidal family of period `length`.
pub fn solve_modulus_cnoidal(c: f64, length: f64) -> Result<EllipticModulus> {
    check_length(length)?;
    let threshold = cnoidal_threshold(length);
    if !(c > threshold) {
        return Err(Error::NoPeriodicWave {
            family: "cnoidal",
            c,
            threshold,
            length,
        });
    }
    bisect_increasing(2.0 * c, |k| cnoidal_omega(k, length))
}

/// Unique modulus with `c(k) = c` for the dnoidal family of period `length`.
pub fn solve_modulus_dnoidal(c: f64, length: f64) -> Result<EllipticModulus> {
    check_length(length)?;
    let threshold = dnoidal_threshold(length);
    if !(c > threshold) {
        return Err(Error::NoPeriodicWave {
            family: "dnoidal",
            c,
            threshold,
            length,
        });
    }
    bisect_increasing(c, |k| dnoidal_speed(k, length))
}

fn check_length(length: f64) -> Result<()> {
    if length.is_finite() && length > 0.0 {
        Ok(())
    } else {
        domain(format!("period must be positive, got {length}"))
    }
}

/// Closed-form cnoidal parameters for modulus `k` and period `length`.
pub fn cnoidal_params(k: EllipticModulus, length: f64) -> Result<CnoidalParams> {
    check_length(length)?;
    let kk = complete_k(k);
    let k2 = k.k_sq();
    let scale = kk * kk / (length * length);
    let root = (1.0 - k2 + k2 * k2).sqrt();
    let omega = 16.0 * scale * root;
    let beta3 = 16.0 * scale * (root + 1.0 + k2);
    let beta1 = beta3 - 48.0 * scale;
    // beta3 - 48 k^2 K^2/L^2 loses digits as k -> 1; this form does not
    let beta2 = 16.0 * scale * (root + 1.0 - 2.0 * k2);
    Ok(CnoidalParams {
        length,
        c: 0.5 * omega,
        omega,
        modulus: k,
        beta1,
        beta2,
        beta3,
        b_const: beta1 * beta2 * beta3 / 6.0,
    })
}

/// Closed-form dnoidal parameters for modulus `k` and period `length`.
pub fn dnoidal_params(k: EllipticModulus, length: f64) -> Result<DnoidalParams> {
    check_length(length)?;
    let eta = 2.0 * complete_k(k) / length;
    Ok(DnoidalParams {
        length,
        c: dnoidal_speed(k, length),
        modulus: k,
        eta,
        b_const: -0.5 * eta.powi(4) * k.kprime_sq(),
    })
}

fn check_domain_multiple(grid: &PeriodicGrid, period: f64) -> Result<()> {
    let ratio = grid.length() / period;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-12 * ratio {
        return domain(format!(
            "grid length {} is not a multiple of the wave period {period}",
            grid.length()
        ));
    }
    if (grid.n() as f64 / m).fract() != 0.0 {
        return domain("grid size must split evenly into periods");
    }
    Ok(())
}

/// `varphi(x) = beta2 + (beta3 - beta2) cn^2(alpha x; k)` evaluated at one point.
pub fn cnoidal_varphi(p: &CnoidalParams, x: f64) -> Result<f64> {
    let cn = jacobi(p.alpha() * x, p.modulus)?.cn;
    Ok(p.beta2 + (p.beta3 - p.beta2) * cn * cn)
}

/// Samples `phi_c = varphi / 4` on a grid covering whole periods.
pub fn cnoidal_profile(p: &CnoidalParams, g: &PeriodicGrid) -> Result<WaveProfile> {
    check_domain_multiple(g, p.length)?;
    let values = g
        .points()
        .into_iter()
        .map(|x| cnoidal_varphi(p, x).map(|v| 0.25 * v))
        .collect::<Result<Vec<_>>>()?;
    let phi = RealField::new(*g, values)?;
    Ok(WaveProfile {
        family: Family::Cnoidal,
        params: WaveParams::Cnoidal(*p),
        phi,
        psi_ratio: System::Yukawa.psi_ratio(),
    })
}

/// Samples `phi_c = eta dn(eta x; k)` on a grid covering whole periods.
pub fn dnoidal_profile(c: f64, length: f64, g: &PeriodicGrid) -> Result<WaveProfile> {
    let k = solve_modulus_dnoidal(c, length)?;
    let mut p = dnoidal_params(k, length)?;
    // keep the requested speed exactly; the modulus reproduces it to rounding
    p.c = c;
    dnoidal_profile_from_params(&p, g)
}

pub fn dnoidal_profile_from_params(p: &DnoidalParams, g: &PeriodicGrid) -> Result<WaveProfile> {
    check_domain_multiple(g, p.length)?;
    let values = g
        .points()
        .into_iter()
        .map(|x| jacobi(p.eta * x, p.modulus).map(|t| p.eta * t.dn))
        .collect::<Result<Vec<_>>>()?;
    Ok(WaveProfile {
        family: Family::Dnoidal,
        params: WaveParams::Dnoidal(*p),
        phi: RealField::new(*g, values)?,
        psi_ratio: System::Cubic.psi_ratio(),
    })
}

/// Pointwise residual of the profile equation: `-phi'' + 2c phi - 2 phi^2`
/// for the Yukawa family, `(phi')^2 + phi^4 - 2c phi^2 - 2B` for the cubic one.
pub fn ode_residual_field(w: &WaveProfile) -> RealField {
    let c = w.c();
    let phi = &w.phi;
    match w.system() {
        System::Yukawa => {
            let d2 = spectral_derivative(phi, DerivativeOrder::Second);
            let vals = phi
                .values()
                .iter()
                .zip(d2.values())
                .map(|(&f, &f2)| -f2 + 2.0 * c * f - 2.0 * f * f)
                .collect();
            RealField::new(*phi.grid(), vals).expect("same grid")
        }
        System::Cubic => {
            let b = match w.params {
                WaveParams::Dnoidal(p) => p.b_const,
                _ => 0.0,
            };
            let d1 = spectral_derivative(phi, DerivativeOrder::First);
            let vals = phi
                .values()
                .iter()
                .zip(d1.values())
                .map(|(&f, &f1)| f1 * f1 + f.powi(4) - 2.0 * c * f * f - 2.0 * b)
                .collect();
            RealField::new(*phi.grid(), vals).expect("same grid")
        }
    }
}

/// Sup norm of [`ode_residual_field`].
pub fn ode_residual(w: &WaveProfile) -> f64 {
    ode_residual_field(w).sup_norm()
}

/// Grid standard deviation of the cnoidal first integral
/// `(varphi')^2 - (-varphi^3 + 3 omega varphi^2 + 6B)/3`.
pub fn first_integral_spread(w: &WaveProfile) -> Result<f64> {
    let WaveParams::Cnoidal(p) = w.params else {
        return domain("first integral check applies to cnoidal waves");
    };
    let varphi = w.phi.map(|&v| 4.0 * v);
    let d1 = spectral_derivative(&varphi, DerivativeOrder::First);
    let vals: Vec<f64> = varphi
        .values()
        .iter()
        .zip(d1.values())
        .map(|(&f, &f1)| f1 * f1 - (-f.powi(3) + 3.0 * p.omega * f * f + 6.0 * p.b_const) / 3.0)
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    Ok((vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Solitary profile value at distance `x` from the crest.
///
/// These solve the same profile equations as the periodic families:
/// `(3c/2) sech^2(sqrt(c/2) x)` for Yukawa and `sqrt(2c) sech(sqrt(2c) x)`
/// for the cubic system.
pub fn solitary_value(c: f64, system: System, x: f64) -> f64 {
    match system {
        System::Yukawa => {
            let s = 1.0 / ((c / 2.0).sqrt() * x).cosh();
            1.5 * c * s * s
        }
        System::Cubic => {
            let a = (2.0 * c).sqrt();
            a / (a * x).cosh()
        }
    }
}

/// Solitary profile centred at the middle of the grid.
pub fn solitary_profile(c: f64, system: System, g: &PeriodicGrid) -> Result<WaveProfile> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("solitary waves need c > 0, got {c}"));
    }
    let centre = 0.5 * g.length();
    let peak = solitary_value(c, system, 0.0);
    let edge = solitary_value(c, system, centre);
    if edge >= 1e-12 * peak {
        return domain(format!(
            "grid of length {} is too short: edge value {edge:e} exceeds 1e-12 of the peak",
            g.length()
        ));
    }
    let phi = RealField::from_fn(*g, |x| solitary_value(c, system, x - centre));
    Ok(WaveProfile {
        family: match system {
            System::Yukawa => Family::SolitaryCn,
            System::Cubic => Family::SolitaryDn,
        },
        params: WaveParams::Solitary { c },
        phi,
        psi_ratio: system.psi_ratio(),
    })
}

//! Split-step time integration with conserved-quantity and orbital-distance
//! tracking.
//!
//! The energy splits into the free Schrödinger part, the free Klein-Gordon
//! part and the coupling `N`. The flow of `N` is exact: `|u|` and `v` are
//! frozen, so `u <- exp(i V dt) u` with `V = v` or `v^2`, and `w` receives
//! the constant kick `dt s`, `s = |u|^2` or `2 |u|^2 v`. One step is
//! `N(dt/2) . [Schrödinger(dt) x Klein-Gordon(dt)] . N(dt/2)`, with both
//! linear flows solved exactly in Fourier space.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::grid::{ComplexField, FourierPlan, PeriodicGrid, RealField};
use crate::stability::{charge_f, energy_e};
use crate::waves::{System, WaveProfile};

/// PDE state: Schrödinger field `u`, Klein-Gordon field `v` and `w = v_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: ComplexField,
    pub v: RealField,
    pub w: RealField,
    pub time: f64,
}

impl FieldState {
    pub fn new(u: ComplexField, v: RealField, w: RealField, time: f64) -> Result<Self> {
        if u.grid() != v.grid() || v.grid() != w.grid() {
            return domain("u, v and w must share one grid");
        }
        Ok(Self { u, v, w, time })
    }

    /// `(u, v, w) = (psi, phi, 0)` at time zero.
    pub fn from_wave(wave: &WaveProfile) -> Self {
        let g = *wave.grid();
        Self {
            u: wave.psi().to_complex(),
            v: wave.phi.clone(),
            w: RealField::from_fn(g, |_| 0.0),
            time: 0.0,
        }
    }

    pub fn from_parts(
        u1: &RealField,
        u2: &RealField,
        v: RealField,
        w: RealField,
        time: f64,
    ) -> Self {
        let vals = u1
            .values()
            .iter()
            .zip(u2.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Self {
            u: ComplexField::new(*u1.grid(), vals).expect("same grid"),
            v,
            w,
            time,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.u.grid()
    }

    pub fn real_parts(&self) -> (RealField, RealField) {
        (self.u.map(|z| z.re), self.u.map(|z| z.im))
    }

    /// Stacked `(u1, v1, u2, v2)`.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.u.values().iter().map(|z| z.re).collect();
        x.extend_from_slice(self.v.values());
        x.extend(self.u.values().iter().map(|z| z.im));
        x.extend_from_slice(self.w.values());
        x
    }

    pub fn from_stacked(g: PeriodicGrid, x: &[f64], time: f64) -> Self {
        let n = g.n();
        assert_eq!(x.len(), 4 * n, "stacked vector must hold four blocks");
        let u = (0..n).map(|j| Complex64::new(x[j], x[2 * n + j])).collect();
        Self {
            u: ComplexField::new(g, u).expect("length checked"),
            v: RealField::new(g, x[n..2 * n].to_vec()).expect("length checked"),
            w: RealField::new(g, x[3 * n..].to_vec()).expect("length checked"),
            time,
        }
    }

    fn is_finite(&self) -> bool {
        self.u
            .values()
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && self.v.values().iter().all(|x| x.is_finite())
            && self.w.values().iter().all(|x| x.is_finite())
    }
}

/// Precomputed Fourier factors for a fixed grid, step and mass.
#[derive(Debug, Clone)]
pub struct Stepper {
    plan: FourierPlan,
    system: System,
    dt: f64,
    schrodinger: Vec<Complex64>,
    cos_om: Vec<f64>,
    sin_over_om: Vec<f64>,
    om_sin: Vec<f64>,
    skip_coupling: bool,
}

impl Stepper {
    pub fn new(grid: PeriodicGrid, dt: f64, system: System, c: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return domain(format!("time step must be finite and nonzero, got {dt}"));
        }
        if !(c > 0.0) {
            return domain(format!("wave speed must be positive, got {c}"));
        }
        let n = grid.n();
        let mass_sq = 2.0 * c;
        let mut schrodinger = Vec::with_capacity(n);
        let (mut cos_om, mut sin_over_om, mut om_sin) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            let xi = grid.wavenumber(j);
            schrodinger.push(Complex64::from_polar(1.0, -0.5 * xi * xi * dt));
            let om = (xi * xi + mass_sq).sqrt();
            cos_om[j] = (om * dt).cos();
            sin_over_om[j] = (om * dt).sin() / om;
            om_sin[j] = om * (om * dt).sin();
        }
        Ok(Self {
            plan: FourierPlan::new(grid),
            system,
            dt,
            schrodinger,
            cos_om,
            sin_over_om,
            om_sin,
            skip_coupling: false,
        })
    }

    /// Same factors with the coupling switched off (free linear evolution).
    pub fn linear_only(mut self) -> Self {
        self.skip_coupling = true;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Exact flow of the coupling term for time `tau`.
    fn coupling(&self, s: &mut FieldState, tau: f64) {
        if self.skip_coupling {
            return;
        }
        let v = s.v.values();
        let w = s.w.values_mut();
        for (j, z) in s.u.values_mut().iter_mut().enumerate() {
            let rho = z.norm_sqr();
            let (pot, src) = match self.system {
                System::Yukawa => (v[j], rho),
                System::Cubic => (v[j] * v[j], 2.0 * rho * v[j]),
            };
            *z *= Complex64::from_polar(1.0, pot * tau);
            w[j] += tau * src;
        }
    }

    fn linear(&self, s: &mut FieldState) {
        let mut uh = s.u.values().to_vec();
        self.plan.forward_in_place(&mut uh);
        for (z, f) in uh.iter_mut().zip(&self.schrodinger) {
            *z *= f;
        }
        self.plan.inverse_in_place(&mut uh);
        s.u.values_mut().copy_from_slice(&uh);

        let mut vh: Vec<Complex64> =
            s.v.values()
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect();
        let mut wh: Vec<Complex64> =
            s.w.values()
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect();
        self.plan.forward_in_place(&mut vh);
        self.plan.forward_in_place(&mut wh);
        for j in 0..vh.len() {
            let (a, b) = (vh[j], wh[j]);
            vh[j] = a * self.cos_om[j] + b * self.sin_over_om[j];
            wh[j] = b * self.cos_om[j] - a * self.om_sin[j];
        }
        self.plan.inverse_in_place(&mut vh);
        self.plan.inverse_in_place(&mut wh);
        for (dst, z) in s.v.values_mut().iter_mut().zip(&vh) {
            *dst = z.re;
        }
        for (dst, z) in s.w.values_mut().iter_mut().zip(&wh) {
            *dst = z.re;
        }
    }

    /// Advances the state in place by one step.
    pub fn advance(&self, s: &mut FieldState) -> Result<()> {
        self.coupling(s, 0.5 * self.dt);
        self.linear(s);
        self.coupling(s, 0.5 * self.dt);
        s.time += self.dt;
        if !s.is_finite() {
            return Err(Error::BlowUp { time: s.time });
        }
        Ok(())
    }
}

/// One step from `state`.
pub fn step(state: &FieldState, dt: f64, system: System, c: f64) -> Result<FieldState> {
    if !(dt > 0.0) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let mut s = state.clone();
    Stepper::new(*state.grid(), dt, system, c)?.advance(&mut s)?;
    Ok(s)
}

/// `1e-3 (L / 2 pi)^2`.
pub fn default_dt(length: f64) -> f64 {
    1e-3 * (length / (2.0 * std::f64::consts::PI)).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    PhaseTranslation,
    PhaseOnly,
}

/// `H^1` multipliers `1 + xi^2`, with translation factors and coefficient
/// access shared by the distance evaluations.
struct SpectralWave {
    weight: Vec<f64>,
    wavenumber: Vec<f64>,
    nyquist: Vec<bool>,
    psi: Vec<Complex64>,
    phi: Vec<Complex64>,
    psi_norm_sq: f64,
    phi_norm_sq: f64,
    length: f64,
}

impl SpectralWave {
    fn new(w: &WaveProfile, plan: &FourierPlan) -> Self {
        let g = *w.grid();
        let n = g.n();
        let weight: Vec<f64> = (0..n).map(|j| 1.0 + g.wavenumber(j).powi(2)).collect();
        let psi = plan.forward(w.psi().to_complex().values());
        let phi = plan.forward(w.phi.to_complex().values());
        let norm = |c: &[Complex64]| {
            g.length()
                * c.iter()
                    .zip(&weight)
                    .map(|(z, q)| q * z.norm_sqr())
                    .sum::<f64>()
        };
        Self {
            psi_norm_sq: norm(&psi),
            phi_norm_sq: norm(&phi),
            wavenumber: (0..n).map(|j| g.wavenumber(j)).collect(),
            nyquist: (0..n).map(|j| g.is_nyquist(j)).collect(),
            weight,
            psi,
            phi,
            length: g.length(),
        }
    }

    /// Coefficient of `T_y f`, `T_y f(x) = f(x + y)`.
    fn shift(&self, j: usize, y: f64) -> Complex64 {
        if self.nyquist[j] {
            Complex64::new((self.wavenumber[j] * y).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, self.wavenumber[j] * y)
        }
    }
}

struct SpectralState {
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    w_norm_sq: f64,
}

fn spectral_state(s: &FieldState, plan: &FourierPlan) -> SpectralState {
    let u = plan.forward(s.u.values());
    let v = plan.forward(s.v.to_complex().values());
    let dx = s.grid().dx();
    SpectralState {
        w_norm_sq: s.w.values().iter().map(|x| x * x).sum::<f64>() * dx,
        u,
        v,
    }
}

/// Squared distance at translation `y`, minimized over the phase in closed
/// form and evaluated from coefficient differences to avoid cancellation.
fn distance_sq_at(st: &SpectralState, sw: &SpectralWave, y: f64) -> f64 {
    let mut iu = Complex64::new(0.0, 0.0);
    for j in 0..st.u.len() {
        iu += sw.weight[j] * st.u[j] * (sw.psi[j] * sw.shift(j, y)).conj();
    }
    let rot = if iu.norm() > 0.0 {
        iu / iu.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut acc = 0.0;
    for j in 0..st.u.len() {
        let t = sw.shift(j, y);
        acc += sw.weight[j]
            * ((st.u[j] - rot * sw.psi[j] * t).norm_sqr() + (st.v[j] - sw.phi[j] * t).norm_sqr());
    }
    acc * sw.length + st.w_norm_sq
}

/// Reusable orbital-distance evaluator for one wave.
pub struct OrbitalDistance {
    plan: FourierPlan,
    wave: SpectralWave,
    mode: DistanceMode,
}

impl OrbitalDistance {
    pub fn new(w: &WaveProfile, mode: DistanceMode) -> Self {
        let plan = FourierPlan::new(*w.grid());
        let wave = SpectralWave::new(w, &plan);
        Self { plan, wave, mode }
    }

    /// `X`-norm of the wave `(psi, phi, 0)`.
    pub fn wave_norm(&self) -> f64 {
        (self.wave.psi_norm_sq + self.wave.phi_norm_sq).sqrt()
    }

    /// Distance together with the optimal translation.
    pub fn evaluate(&self, s: &FieldState) -> (f64, f64) {
        let st = spectral_state(s, &self.plan);
        if self.mode == DistanceMode::PhaseOnly {
            return (distance_sq_at(&st, &self.wave, 0.0).sqrt(), 0.0);
        }
        let n = s.grid().n();
        let dx = s.grid().dx();
        let (mut best_y, mut best) = (0.0, f64::INFINITY);
        for j in 0..n {
            let y = j as f64 * dx;
            let d = distance_sq_at(&st, &self.wave, y);
            if d < best {
                best = d;
                best_y = y;
            }
        }
        let f = |y: f64| distance_sq_at(&st, &self.wave, y);
        let (y, d) = golden_section(f, best_y - dx, best_y + dx, 1e-10 * self.wave.length);
        let (y, d) = if d < best { (y, d) } else { (best_y, best) };
        (d.sqrt(), y.rem_euclid(self.wave.length))
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `inf ||(u, v, w) - (e^{is} T_y psi, T_y phi, 0)||` in `H^1 x H^1 x L^2`.
pub fn orbital_distance(state: &FieldState, w: &WaveProfile, mode: DistanceMode) -> Result<f64> {
    if state.grid() != w.grid() {
        return domain("state and wave must share one grid");
    }
    Ok(OrbitalDistance::new(w, mode).evaluate(state).0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    RandomSmooth,
    /// Stacked `(u1, v1, u2, v2)` perturbation.
    UnstableMode(Vec<f64>),
}

/// Lowest Fourier modes used by the random perturbation.
pub const RANDOM_MODES: usize = 8;

fn x_inner(a: &[f64], b: &[f64], g: &PeriodicGrid, plan: &FourierPlan) -> f64 {
    let n = g.n();
    let mut acc = 0.0;
    for blk in 0..4 {
        let fa = plan.forward(
            &a[blk * n..(blk + 1) * n]
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect::<Vec<_>>(),
        );
        let fb = plan.forward(
            &b[blk * n..(blk + 1) * n]
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect::<Vec<_>>(),
        );
        for j in 0..n {
            let wgt = if blk == 3 {
                1.0
            } else {
                1.0 + g.wavenumber(j).powi(2)
            };
            acc += wgt * (fa[j] * fb[j].conj()).re;
        }
    }
    acc * g.length()
}

/// `(psi, phi, 0) + epsilon * direction`.
///
/// Random directions use the lowest modes of each component with a seeded
/// generator. Both kinds are normalized in `X`; the phase tangent `(0, 0, psi, 0)`
/// is projected out of mode directions so that the initial phase-only distance
/// is exactly `epsilon`.
pub fn make_perturbed(
    w: &WaveProfile,
    direction: &Direction,
    epsilon: f64,
    seed: u64,
) -> Result<FieldState> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return domain(format!("epsilon must be non-negative, got {epsilon}"));
    }
    let g = *w.grid();
    let n = g.n();
    let plan = FourierPlan::new(g);
    let mut x = match direction {
        Direction::RandomSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = vec![0.0; 4 * n];
            let two_pi_over_l = 2.0 * std::f64::consts::PI / g.length();
            for blk in 0..4 {
                let coef: Vec<(f64, f64)> = (0..RANDOM_MODES)
                    .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                for j in 0..n {
                    let t = g.point(j) * two_pi_over_l;
                    x[blk * n + j] = coef
                        .iter()
                        .enumerate()
                        .map(|(m, &(a, b))| a * (m as f64 * t).cos() + b * (m as f64 * t).sin())
                        .sum();
                }
            }
            x
        }
        Direction::UnstableMode(v) => {
            if v.len() != 4 * n {
                return domain(format!("mode has length {}, expected {}", v.len(), 4 * n));
            }
            let mut x = v.clone();
            let mut tangent = vec![0.0; 4 * n];
            tangent[2 * n..3 * n].copy_from_slice(w.psi().values());
            let ratio = x_inner(&x, &tangent, &g, &plan) / x_inner(&tangent, &tangent, &g, &plan);
            x.iter_mut()
                .zip(&tangent)
                .for_each(|(a, t)| *a -= ratio * t);
            x
        }
    };
    let norm = x_inner(&x, &x, &g, &plan).sqrt();
    if !(norm > 0.0) {
        return domain("perturbation direction vanishes");
    }
    x.iter_mut().for_each(|a| *a *= epsilon / norm);
    let base = FieldState::from_wave(w).to_stacked();
    x.iter_mut().zip(&base).for_each(|(a, b)| *a += b);
    Ok(FieldState::from_stacked(g, &x, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParams {
    pub system: System,
    pub c: f64,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub observe_every: usize,
    pub distance_mode: Option<DistanceMode>,
    pub stop_distance: Option<f64>,
    /// Set when the run ended early at `stop_distance`.
    pub stopped_at: Option<f64>,
    pub n: usize,
    pub domain_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub times: Vec<f64>,
    pub e_series: Vec<f64>,
    pub f_series: Vec<f64>,
    /// Orbital distance; NaN when no reference wave was given.
    pub dist_series: Vec<f64>,
    pub params: RunParams,
}

impl RunDiagnostics {
    pub fn max_relative_drift(series: &[f64]) -> f64 {
        let s0 = series[0];
        series.iter().map(|s| (s - s0).abs()).fold(0.0, f64::max) / s0.abs()
    }

    pub fn energy_drift(&self) -> f64 {
        Self::max_relative_drift(&self.e_series)
    }

    pub fn charge_drift(&self) -> f64 {
        Self::max_relative_drift(&self.f_series)
    }

    pub fn max_distance(&self) -> f64 {
        self.dist_series.iter().copied().fold(0.0, f64::max)
    }
}

/// A run stopped early, with everything recorded up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub error: Error,
    pub partial: Box<RunDiagnostics>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} samples recorded)",
            self.error,
            self.partial.times.len()
        )
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub t_final: f64,
    pub dt: f64,
    pub system: System,
    pub c: f64,
    pub observe_every: usize,
    /// Ends the run at the first observation whose distance exceeds this value.
    pub stop_distance: Option<f64>,
}

impl RunConfig {
    pub fn new(t_final: f64, dt: f64, system: System, c: f64, observe_every: usize) -> Self {
        Self {
            t_final,
            dt,
            system,
            c,
            observe_every,
            stop_distance: None,
        }
    }
}

/// Integrates to `t_final`, recording `E`, `F` and (with a reference wave)
/// the orbital distance every `observe_every` steps and at the end. The step
/// is adjusted down so that a whole number of steps lands on `t_final`.
pub fn run(
    initial: &FieldState,
    cfg: &RunConfig,
    reference: Option<(&WaveProfile, DistanceMode)>,
) -> std::result::Result<RunDiagnostics, RunError> {
    let fail = |error: Error, partial: RunDiagnostics| RunError {
        error,
        partial: Box::new(partial),
    };
    let g = *initial.grid();
    let steps = (cfg.t_final / cfg.dt).ceil().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    let mut diag = RunDiagnostics {
        times: Vec::new(),
        e_series: Vec::new(),
        f_series: Vec::new(),
        dist_series: Vec::new(),
        params: RunParams {
            system: cfg.system,
            c: cfg.c,
            dt,
            t_final: cfg.t_final,
            steps,
            observe_every: cfg.observe_every,
            distance_mode: reference.map(|r| r.1),
            stop_distance: cfg.stop_distance,
            stopped_at: None,
            n: g.n(),
            domain_length: g.length(),
        },
    };
    if !(cfg.t_final > 0.0) || !(cfg.dt > 0.0) || cfg.dt > cfg.t_final || cfg.observe_every == 0 {
        return Err(fail(
            Error::Domain(format!(
                "need 0 < dt <= T and observe_every >= 1 (dt = {}, T = {}, every = {})",
                cfg.dt, cfg.t_final, cfg.observe_every
            )),
            diag,
        ));
    }
    if let Some((w, _)) = reference {
        if w.grid() != initial.grid() {
            return Err(fail(
                Error::Domain("reference wave is on a different grid".into()),
                diag,
            ));
        }
    }
    let dist = reference.map(|(w, mode)| OrbitalDistance::new(w, mode));
    let stepper = match Stepper::new(g, dt, cfg.system, cfg.c) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, diag)),
    };
    let mut s = initial.clone();
    let t0 = s.time;
    let record = |d: &mut RunDiagnostics, s: &FieldState| {
        d.times.push(s.time);
        d.e_series.push(energy_e(s, cfg.system, cfg.c));
        d.f_series.push(charge_f(s));
        d.dist_series
            .push(dist.as_ref().map_or(f64::NAN, |o| o.evaluate(s).0));
    };
    record(&mut diag, &s);
    for k in 1..=steps {
        if let Err(e) = stepper.advance(&mut s) {
            return Err(fail(e, diag));
        }
        // keep the clock exact instead of accumulating dt
        s.time = t0 + k as f64 * dt;
        if k % cfg.observe_every == 0 || k == steps {
            record(&mut diag, &s);
            let last = *diag.dist_series.last().expect("recorded");
            if cfg.stop_distance.is_some_and(|d| last > d) {
                diag.params.stopped_at = Some(s.time);
                break;
            }
        }
    }
    Ok(diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub sigma_fit: f64,
    pub window: (f64, f64),
    /// RMS misfit of `log(dist)` about the fitted line.
    pub residual: f64,
    pub samples: usize,
    pub grew: bool,
}

/// Least-squares slope of `log(dist)` between the first crossing of
/// `10 epsilon` and the first crossing of `0.1 wave_norm`.
pub fn fit_growth(diag: &RunDiagnostics, epsilon: f64, wave_norm: f64) -> GrowthFit {
    let d = &diag.dist_series;
    let t = &diag.times;
    let no_growth = GrowthFit {
        sigma_fit: 0.0,
        window: (f64::NAN, f64::NAN),
        residual: f64::NAN,
        samples: 0,
        grew: false,
    };
    let Some(lo) = d.iter().position(|&x| x >= 10.0 * epsilon) else {
        return no_growth;
    };
    let hi = d[lo..]
        .iter()
        .position(|&x| x >= 0.1 * wave_norm)
        .map_or(d.len() - 1, |i| lo + i);
    if hi <= lo + 1 {
        return no_growth;
    }
    let xs = &t[lo..=hi];
    let ys: Vec<f64> = d[lo..=hi].iter().map(|x| x.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    GrowthFit {
        sigma_fit: slope,
        window: (xs[0], xs[xs.len() - 1]),
        residual,
        samples: xs.len(),
        grew: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waves::Family;
    use std::f64::consts::PI;

    const L: f64 = 2.0 * PI;

    fn sup_diff(a: &FieldState, b: &FieldState) -> f64 {
        a.to_stacked()
            .iter()
            .zip(b.to_stacked())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn rotated_wave(w: &WaveProfile, t: f64) -> FieldState {
        let mut s = FieldState::from_wave(w);
        let r = Complex64::from_polar(1.0, w.c() * t);
        s.u.values_mut().iter_mut().for_each(|z| *z *= r);
        s.time = t;
        s
    }

    #[test]
    fn zero_stays_zero() {
        let g = PeriodicGrid::new(L, 32).unwrap();
        let z = RealField::from_fn(g, |_| 0.0);
        let s = FieldState::from_parts(&z, &z, z.clone(), z.clone(), 0.0);
        let t = step(&s, 0.01, System::Cubic, 0.5).unwrap();
        assert_eq!(sup_diff(&s, &t), 0.0);
        assert!(step(&s, -0.01, System::Cubic, 0.5).is_err());
    }

    #[test]
    fn coupling_preserves_modulus() {
        let w = WaveProfile::periodic(Family::Cnoidal, 0.8, L, 64, 1).unwrap();
        let mut s = make_perturbed(&w, &Direction::RandomSmooth, 0.1, 2).unwrap();
        let before: Vec<f64> = s.u.values().iter().map(|z| z.norm()).collect();
        let st = Stepper::new(*w.grid(), 0.3, System::Yukawa, 0.8).unwrap();
        st.coupling(&mut s, 0.3);
        for (z, m) in s.u.values().iter().zip(before) {
            assert!((z.norm() - m).abs() < 1e-15 * m.max(1.0));
        }
    }

    #[test]
    fn linear_flow_is_reversible() {
        let w = WaveProfile::periodic(Family::Dnoidal, 0.5, L, 64, 1).unwrap();
        let s = make_perturbed(&w, &Direction::RandomSmooth, 0.3, 9).unwrap();
        let fwd = Stepper::new(*w.grid(), 0.01, System::Cubic, 0.5)
            .unwrap()
            .linear_only();
        let back = Stepper::new(*w.grid(), -0.01, System::Cubic, 0.5)
            .unwrap()
            .linear_only();
        let mut t = s.clone();
        fwd.advance(&mut t).unwrap();
        back.advance(&mut t).unwrap();
        assert!(sup_diff(&s, &t) < 1e-10);
        // the full step is symmetric too
        let f = Stepper::new(*w.grid(), 0.01, System::Cubic, 0.5).unwrap();
        let b = Stepper::new(*w.grid(), -0.01, System::Cubic, 0.5).unwrap();
        let mut t = s.clone();
        f.advance(&mut t).unwrap();
        b.advance(&mut t).unwrap();
        assert!(sup_diff(&s, &t) < 1e-10);
    }

    #[test]
    fn standing_wave_second_order() {
        for fam in [Family::Cnoidal, Family::Dnoidal] {
            let c = if fam == Family::Cnoidal { 0.6 } else { 0.3 };
            let w = WaveProfile::periodic(fam, c, L, 64, 1).unwrap();
            let t = 2.0;
            let err = |dt: f64| {
                let st = Stepper::new(*w.grid(), dt, w.system(), c).unwrap();
                let mut s = FieldState::from_wave(&w);
                for _ in 0..(t / dt).round() as usize {
                    st.advance(&mut s).unwrap();
                }
                sup_diff(&s, &rotated_wave(&w, t))
            };
            let (e1, e2) = (err(0.02), err(0.01));
            let ratio = e1 / e2;
            assert!(
                (3.5..4.5).contains(&ratio),
                "{fam:?}: {e1:e} {e2:e} ratio {ratio}"
            );
        }
    }

    #[test]
    fn conservation_short_run() {
        let w = WaveProfile::periodic(Family::Cnoidal, 0.6, L, 64, 1).unwrap();
        let s = make_perturbed(&w, &Direction::RandomSmooth, 1e-2, 4).unwrap();
        let cfg = RunConfig::new(5.0, 1e-3, System::Yukawa, 0.6, 500);
        let d = run(&s, &cfg, Some((&w, DistanceMode::PhaseTranslation))).unwrap();
        assert_eq!(d.times.len(), d.dist_series.len());
        assert_eq!(d.times.len(), 11);
        assert!((d.times[10] - 5.0).abs() < 1e-12);
        assert!(d.charge_drift() < 1e-12, "{}", d.charge_drift());
        assert!(d.energy_drift() < 1e-6, "{}", d.energy_drift());
    }

    #[test]
    fn blow_up_reports_partial() {
        let w = WaveProfile::periodic(Family::Dnoidal, 0.5, L, 32, 1).unwrap();
        let mut s = FieldState::from_wave(&w);
        s.v.values_mut()[3] = f64::NAN;
        let cfg = RunConfig::new(1.0, 0.1, System::Cubic, 0.5, 1);
        let e = run(&s, &cfg, None).unwrap_err();
        assert!(matches!(e.error, Error::BlowUp { .. }));
        assert_eq!(e.partial.times.len(), 1);
    }

    #[test]
    fn distance_symmetries() {
        let w = WaveProfile::periodic(Family::Cnoidal, 0.7, L, 128, 1).unwrap();
        let s = rotated_wave(&w, 1.234);
        assert!(orbital_distance(&s, &w, DistanceMode::PhaseOnly).unwrap() < 1e-10);
        assert!(orbital_distance(&s, &w, DistanceMode::PhaseTranslation).unwrap() < 1e-10);
        // translate by a non-grid offset using the exact profile
        let crate::waves::WaveParams::Cnoidal(p) = w.params else {
            unreachable!()
        };
        let y0 = 0.377;
        let g = *w.grid();
        let phi = RealField::from_fn(g, |x| {
            0.25 * crate::waves::cnoidal_varphi(&p, x + y0).unwrap()
        });
        let psi = phi.map(|&v| std::f64::consts::SQRT_2 * v);
        let z = RealField::from_fn(g, |_| 0.0);
        let t = FieldState::from_parts(&psi, &z, phi, z.clone(), 0.0);
        let (d, y) = OrbitalDistance::new(&w, DistanceMode::PhaseTranslation).evaluate(&t);
        assert!(d < 1e-8 && (y - y0).abs() < 1e-8, "{d:e} {y}");
        assert!(orbital_distance(&t, &w, DistanceMode::PhaseOnly).unwrap() > 0.1);
    }

    #[test]
    fn perturbation_bounds_and_determinism() {
        let w = WaveProfile::periodic(Family::Dnoidal, 0.4, L, 64, 1).unwrap();
        let a = make_perturbed(&w, &Direction::RandomSmooth, 1e-2, 11).unwrap();
        let b = make_perturbed(&w, &Direction::RandomSmooth, 1e-2, 11).unwrap();
        assert_eq!(a, b);
        let d = orbital_distance(&a, &w, DistanceMode::PhaseTranslation).unwrap();
        assert!(d <= 1e-2 * (1.0 + 1e-12));
        let z = make_perturbed(&w, &Direction::RandomSmooth, 0.0, 11).unwrap();
        assert_eq!(z, FieldState::from_wave(&w));
    }

    #[test]
    fn mode_perturbation_has_exact_phase_distance() {
        let w = WaveProfile::periodic(Family::Cnoidal, 0.6, L, 32, 2).unwrap();
        let spec = crate::stability::linearized_spectrum(&w).unwrap();
        let mode = spec.unstable_mode.unwrap().vector;
        let eps = 1e-4;
        let s = make_perturbed(&w, &Direction::UnstableMode(mode), eps, 0).unwrap();
        let d = orbital_distance(&s, &w, DistanceMode::PhaseOnly).unwrap();
        assert!((d / eps - 1.0).abs() < 1e-6, "{}", d / eps);
    }

    #[test]
    fn growth_fit_synthetic() {
        let eps = 1e-5;
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.1).collect();
        let dist: Vec<f64> = times.iter().map(|t| eps * (0.3 * t).exp()).collect();
        let n = times.len();
        let diag = RunDiagnostics {
            e_series: vec![1.0; n],
            f_series: vec![1.0; n],
            dist_series: dist,
            times,
            params: RunParams {
                system: System::Yukawa,
                c: 1.0,
                dt: 0.1,
                t_final: 40.0,
                steps: 400,
                observe_every: 1,
                distance_mode: None,
                stop_distance: None,
                stopped_at: None,
                n: 16,
                domain_length: 1.0,
            },
        };
        let f = fit_growth(&diag, eps, 1.0);
        assert!(f.grew && (f.sigma_fit - 0.3).abs() < 1e-6);
        let mut flat = diag.clone();
        flat.dist_series = vec![eps; n];
        assert!(!fit_growth(&flat, eps, 1.0).grew);
    }
}

//! Uniform periodic grids, the discrete Fourier transform contract, spectral
//! differentiation and periodic quadrature.
//!
//! Fourier coefficients use the normalisation `f_hat[m] = (1/n) sum_j f_j e^{-i xi_m x_j}`
//! with `xi_m = 2 pi m / length`, so `f_j = sum_m f_hat[m] e^{i xi_m x_j}` and
//! `cos(2 pi x / length)` has coefficient 1/2 on modes +1 and -1.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    length: f64,
    n: usize,
}

impl PeriodicGrid {
    /// Grid on `[0, length)` with `n` samples; `n` must be even and at least 16.
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return domain(format!("grid length must be positive, got {length}"));
        }
        if n < 16 || !n.is_multiple_of(2) {
            return domain(format!("grid size must be even and >= 16, got {n}"));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.length / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Integer mode carried by FFT slot `j`, in `{-n/2, ..., n/2 - 1}`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// FFT slot holding integer mode `m`.
    pub fn slot(&self, m: i64) -> Option<usize> {
        let n = self.n as i64;
        if m < -n / 2 || m >= n / 2 {
            return None;
        }
        Some(if m >= 0 { m as usize } else { (m + n) as usize })
    }

    /// Angular wavenumber `2 pi m / length` of FFT slot `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64 / self.length
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// The same spacing on a domain `factor` times longer.
    pub fn extended(&self, factor: usize) -> Result<Self> {
        Self::new(self.length * factor as f64, self.n * factor)
    }
}

/// Samples of a function on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField<T> {
    grid: PeriodicGrid,
    values: Vec<T>,
}

pub type RealField = SampledField<f64>;
pub type ComplexField = SampledField<Complex64>;

impl<T> SampledField<T> {
    pub fn new(grid: PeriodicGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return domain(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.n()
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> T) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.point(j))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> SampledField<U> {
        SampledField {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl RealField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|&v| Complex64::new(v, 0.0))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Fourier coefficients of a sampled field, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl FourierCoefficients {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Coefficient of integer mode `m`; zero outside the resolved band.
    pub fn get(&self, m: i64) -> Complex64 {
        self.grid
            .slot(m)
            .map(|j| self.coeffs[j])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `length * sum |f_hat|^2`, equal to the discrete L2 norm squared.
    pub fn norm_sq(&self) -> f64 {
        self.grid.length() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

impl DerivativeOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => domain(format!(
                "spectral derivative order must be 1 or 2, got {order}"
            )),
        }
    }
}

/// FFT plans for one grid. Immutable after construction, so one plan can
/// be shared across threads.
#[derive(Clone)]
pub struct FourierPlan {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierPlan")
            .field("grid", &self.grid)
            .finish()
    }
}

impl FourierPlan {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// In-place normalised forward transform (values -> coefficients).
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let scale = 1.0 / self.grid.n() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    /// In-place inverse transform (coefficients -> values).
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward_in_place(&mut buf);
        buf
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf
    }

    /// Multiplies each coefficient by `(i xi)^order`; the Nyquist mode is
    /// dropped for odd order.
    pub fn apply_derivative_symbol(&self, coeffs: &mut [Complex64], order: DerivativeOrder) {
        for (j, c) in coeffs.iter_mut().enumerate() {
            let xi = self.grid.wavenumber(j);
            match order {
                DerivativeOrder::First => {
                    if self.grid.is_nyquist(j) {
                        *c = Complex64::new(0.0, 0.0);
                    } else {
                        *c *= Complex64::new(0.0, xi);
                    }
                }
                DerivativeOrder::Second => *c *= -xi * xi,
            }
        }
    }

    pub fn derivative_complex(
        &self,
        values: &[Complex64],
        order: DerivativeOrder,
    ) -> Vec<Complex64> {
        let mut buf = self.forward(values);
        self.apply_derivative_symbol(&mut buf, order);
        self.inverse_in_place(&mut buf);
        buf
    }

    pub fn derivative_real(&self, values: &[f64], order: DerivativeOrder) -> Vec<f64> {
        let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivative_complex(&buf, order)
            .into_iter()
            .map(|c| c.re)
            .collect()
    }
}

pub fn dft_forward(f: &ComplexField) -> FourierCoefficients {
    let plan = FourierPlan::new(*f.grid());
    FourierCoefficients {
        grid: *f.grid(),
        coeffs: plan.forward(f.values()),
    }
}

pub fn dft_inverse(c: &FourierCoefficients) -> ComplexField {
    let plan = FourierPlan::new(c.grid);
    SampledField {
        grid: c.grid,
        values: plan.inverse(&c.coeffs),
    }
}

pub fn spectral_derivative(f: &RealField, order: DerivativeOrder) -> RealField {
    let plan = FourierPlan::new(*f.grid());
    SampledField {
        grid: *f.grid(),
        values: plan.derivative_real(f.values(), order),
    }
}

pub fn spectral_derivative_complex(f: &ComplexField, order: DerivativeOrder) -> ComplexField {
    let plan = FourierPlan::new(*f.grid());
    SampledField {
        grid: *f.grid(),
        values: plan.derivative_complex(f.values(), order),
    }
}

/// Periodic rectangle rule, all weights `length / n`.
pub fn quadrature(f: &RealField) -> f64 {
    f.grid().dx() * f.values().iter().sum::<f64>()
}

/// Discrete L2 inner product of two real fields on the same grid.
pub fn inner(f: &[f64], g: &[f64], grid: &PeriodicGrid) -> f64 {
    grid.dx() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
}

/// Dense Fourier-collocation matrix of `d^2/dx^2` (Nyquist mode included).
pub fn second_derivative_matrix(grid: &PeriodicGrid) -> DMatrix<f64> {
    let n = grid.n();
    let h = 2.0 * PI / n as f64;
    let scale = (2.0 * PI / grid.length()).powi(2);
    // the matrix is a circulant; build the first column then copy
    let col: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                -PI * PI / (3.0 * h * h) - 1.0 / 6.0
            } else {
                let s = (0.5 * d as f64 * h).sin();
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                -sign / (2.0 * s * s)
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| scale * col[(i + n - j) % n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, l: f64) -> PeriodicGrid {
        PeriodicGrid::new(l, n).unwrap()
    }

    fn naive_dft(values: &[Complex64]) -> Vec<Complex64> {
        let n = values.len();
        (0..n)
            .map(|m| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, v) in values.iter().enumerate() {
                    let arg = -2.0 * PI * (m * j) as f64 / n as f64;
                    acc += v * Complex64::from_polar(1.0, arg);
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicGrid::new(1.0, 15).is_err());
        assert!(PeriodicGrid::new(1.0, 8).is_err());
        assert!(PeriodicGrid::new(1.0, 33).is_err());
        assert!(PeriodicGrid::new(-1.0, 32).is_err());
        assert!(PeriodicGrid::new(1.0, 32).is_ok());
    }

    #[test]
    fn mode_slots_cover_band() {
        let g = grid(16, 1.0);
        let modes: Vec<i64> = (0..16).map(|j| g.mode(j)).collect();
        assert_eq!(modes[8], -8);
        assert_eq!(modes[7], 7);
        for m in -8..8 {
            assert_eq!(g.mode(g.slot(m).unwrap()), m);
        }
        assert!(g.slot(8).is_none());
    }

    #[test]
    fn constant_and_cosine_modes() {
        let l = 3.0;
        let g = grid(32, l);
        let c = dft_forward(&SampledField::from_fn(g, |_| Complex64::new(2.5, 0.0)));
        assert!((c.get(0).re - 2.5).abs() < 1e-15);
        for m in 1..16 {
            assert!(c.get(m).norm() < 1e-15);
        }
        let c = dft_forward(&SampledField::from_fn(g, |x| {
            Complex64::new((2.0 * PI * x / l).cos(), 0.0)
        }));
        assert!((c.get(1).re - 0.5).abs() < 1e-15);
        assert!((c.get(-1).re - 0.5).abs() < 1e-15);
        assert!(c.get(0).norm() < 1e-15 && c.get(2).norm() < 1e-15);
    }

    #[test]
    fn matches_direct_dft() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = grid(48, 2.0);
        let vals: Vec<Complex64> = (0..48)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = SampledField::new(g, vals.clone()).unwrap();
        let fast = dft_forward(&f);
        let slow = naive_dft(&vals);
        for (a, b) in fast.as_slice().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-14);
        }
        let back = dft_inverse(&fast);
        for (a, b) in back.values().iter().zip(&vals) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivatives_of_trig_and_constants() {
        let l = 5.0;
        let g = grid(64, l);
        let kx = 2.0 * PI / l;
        let f = SampledField::from_fn(g, |x| (kx * x).sin());
        let d = spectral_derivative(&f, DerivativeOrder::First);
        for (j, v) in d.values().iter().enumerate() {
            assert!((v - kx * (kx * g.point(j)).cos()).abs() < 1e-12);
        }
        let c = SampledField::from_fn(g, |_| 4.0);
        let d = spectral_derivative(&c, DerivativeOrder::Second);
        assert!(d.sup_norm() < 1e-12);
        assert!(DerivativeOrder::from_int(3).is_err());
    }

    #[test]
    fn derivative_of_cn_squared_against_finite_differences() {
        use crate::elliptic::{complete_k, jacobi, EllipticModulus};
        let m = EllipticModulus::new(0.8).unwrap();
        let kk = complete_k(m);
        let l = 2.0 * kk;
        let g = grid(128, l);
        let f = |x: f64| {
            let cn = jacobi(x, m).unwrap().cn;
            cn * cn
        };
        let d = spectral_derivative(&SampledField::from_fn(g, f), DerivativeOrder::First);
        let h = 1e-3;
        for j in (0..128).step_by(7) {
            let x = g.point(j);
            let fd =
                (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
            assert!((d.values()[j] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn quadrature_basics() {
        let l = 7.0;
        let g = grid(32, l);
        assert!((quadrature(&SampledField::from_fn(g, |_| 3.0)) - 21.0).abs() < 1e-13);
        let c = SampledField::from_fn(g, |x| (2.0 * PI * x / l).cos());
        assert!(quadrature(&c).abs() < 1e-14);
    }

    #[test]
    fn dn_squared_integrates_to_twice_e() {
        use crate::elliptic::{complete_e, complete_k, jacobi, EllipticModulus};
        for &k in &[0.3, 0.7, 0.95] {
            let m = EllipticModulus::new(k).unwrap();
            let g = grid(128, 2.0 * complete_k(m));
            let f = SampledField::from_fn(g, |x| jacobi(x, m).unwrap().dn.powi(2));
            assert!((quadrature(&f) - 2.0 * complete_e(m)).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_matrix_matches_fft_derivative() {
        let g = grid(32, 3.3);
        let d2 = second_derivative_matrix(&g);
        let f: Vec<f64> = g.points().iter().map(|x| (x.sin() * 1.3).exp()).collect();
        let plan = FourierPlan::new(g);
        let want = plan.derivative_real(&f, DerivativeOrder::Second);
        let got = &d2 * nalgebra::DVector::from_column_slice(&f);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((&d2 - d2.transpose()).amax() < 1e-12);
    }

    proptest! {
        #[test]
        fn parseval_and_roundtrip(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = grid(64, 1.7);
            let vals: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let f = SampledField::new(g, vals.clone()).unwrap();
            let c = dft_forward(&f);
            let direct: f64 = vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dx();
            prop_assert!((direct - c.norm_sq()).abs() < 1e-12 * direct.max(1.0));
            let back = dft_inverse(&c);
            let err = back.values().iter().zip(&vals).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-13);
        }

        #[test]
        fn second_order_is_first_applied_twice(a in 0.1f64..0.5, shift in 0.0f64..6.0) {
            let g = grid(64, 2.0 * PI);
            let f = SampledField::from_fn(g, |x| 1.0 / (1.1 + a * (x + shift).cos()));
            let once = spectral_derivative(&f, DerivativeOrder::Second);
            let twice = spectral_derivative(&spectral_derivative(&f, DerivativeOrder::First), DerivativeOrder::First);
            let err = once.values().iter().zip(twice.values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-11 * once.sup_norm().max(1.0), "err {}", err);
        }
    }
}

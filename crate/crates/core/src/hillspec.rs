//! Dense self-adjoint discretizations of the linearized operators about a
//! standing wave, their spectra, and the analytic Lamé data they reduce to.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::elliptic::{jacobi, EllipticModulus};
use crate::error::{domain, Error, Result};
use crate::grid::{
    inner, second_derivative_matrix, spectral_derivative, DerivativeOrder, PeriodicGrid, RealField,
};
use crate::waves::{CnoidalParams, Family, System, WaveProfile};

/// Default relative kernel tolerance: `zero_tol = ZERO_TOL_REL * max |lambda|`.
pub const ZERO_TOL_REL: f64 = 1e-8;
/// Neighbour gap, in units of `zero_tol`, above which an eigenvalue counts as simple.
pub const SIMPLE_GAP_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OperatorKind {
    L1cn,
    L2cn,
    L3cn,
    LRcn,
    LIcn,
    L1dn,
    L2dn,
    L3dn,
    LRdn,
    LIdn,
    Custom,
}

impl OperatorKind {
    pub fn is_block(self) -> bool {
        matches!(self, Self::LRcn | Self::LIcn | Self::LRdn | Self::LIdn)
    }

    pub fn system(self) -> Option<System> {
        use OperatorKind::*;
        match self {
            L1cn | L2cn | L3cn | LRcn | LIcn => Some(System::Yukawa),
            L1dn | L2dn | L3dn | LRdn | LIdn => Some(System::Cubic),
            Custom => None,
        }
    }

    pub fn all_for(system: System) -> [OperatorKind; 5] {
        use OperatorKind::*;
        match system {
            System::Yukawa => [L1cn, L2cn, L3cn, LRcn, LIcn],
            System::Cubic => [L1dn, L2dn, L3dn, LRdn, LIdn],
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        use OperatorKind::*;
        Some(match s {
            "L1cn" => L1cn,
            "L2cn" => L2cn,
            "L3cn" => L3cn,
            "LRcn" => LRcn,
            "LIcn" => LIcn,
            "L1dn" => L1dn,
            "L2dn" => L2dn,
            "L3dn" => L3dn,
            "LRdn" => LRdn,
            "LIdn" => LIdn,
            _ => return None,
        })
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s).ok_or_else(|| Error::Domain(format!("unknown operator kind {s:?}")))
    }
}

/// A symmetric dense operator on one or two stacked copies of a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HillOperator {
    pub kind: OperatorKind,
    pub grid: PeriodicGrid,
    /// 1 for scalar operators, 2 for the 2x2 block operators.
    pub blocks: usize,
    pub matrix: DMatrix<f64>,
}

impl HillOperator {
    /// Wraps a matrix after checking symmetry to `1e-10 ||A||_F`; the result is
    /// exactly symmetrized.
    pub fn new(
        kind: OperatorKind,
        grid: PeriodicGrid,
        blocks: usize,
        matrix: DMatrix<f64>,
    ) -> Result<Self> {
        let size = blocks * grid.n();
        if matrix.nrows() != size || matrix.ncols() != size {
            return domain(format!(
                "operator must be {size}x{size}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        let scale = matrix.norm();
        if asym > 1e-10 * scale {
            return domain(format!(
                "operator is not symmetric: max |A - A^T| = {asym:e}"
            ));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self {
            kind,
            grid,
            blocks,
            matrix,
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn domain_length(&self) -> f64 {
        self.grid.length()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }
}

/// `-d^2/dx^2 + 2c + potential(x)` by Fourier collocation.
pub fn assemble_scalar(potential: &RealField, c: f64) -> Result<HillOperator> {
    let g = *potential.grid();
    let mut a = -second_derivative_matrix(&g);
    for (j, &p) in potential.values().iter().enumerate() {
        a[(j, j)] += 2.0 * c + p;
    }
    HillOperator::new(OperatorKind::Custom, g, 1, a)
}

fn check_family(kind: OperatorKind, w: &WaveProfile) -> Result<()> {
    if kind.system() != Some(w.system()) {
        return domain(format!(
            "operator {kind:?} does not match the {} wave",
            w.family.name()
        ));
    }
    Ok(())
}

/// Scalar operators `L_1, L_2, L_3` about the sampled wave.
///
/// Yukawa: potentials `-4 phi`, `-2 phi`, `+2 phi`. Cubic: `-6 phi^2`,
/// `-2 phi^2`, `+2 phi^2`.
pub fn assemble_named_scalar(kind: OperatorKind, w: &WaveProfile) -> Result<HillOperator> {
    use OperatorKind::*;
    check_family(kind, w)?;
    let coef = match kind {
        L1cn => -4.0,
        L2cn | L2dn => -2.0,
        L3cn | L3dn => 2.0,
        L1dn => -6.0,
        _ => return domain(format!("{kind:?} is not a scalar operator")),
    };
    let potential = match w.system() {
        System::Yukawa => w.phi.map(|&p| coef * p),
        System::Cubic => w.phi.map(|&p| coef * p * p),
    };
    let mut op = assemble_scalar(&potential, w.c())?;
    op.kind = kind;
    Ok(op)
}

/// 2x2 block operators acting on `(u, v)` pairs.
///
/// `LRcn = [[L_2, -2 sqrt2 phi], [-2 sqrt2 phi, -d^2 + 2c]]`,
/// `LRdn = [[L_2, -4 phi^2], [-4 phi^2, L_2]]` and `LI = diag(L_2, I)`.
pub fn assemble_block(kind: OperatorKind, w: &WaveProfile) -> Result<HillOperator> {
    use OperatorKind::*;
    check_family(kind, w)?;
    let g = *w.grid();
    let n = g.n();
    let c = w.c();
    let d2 = second_derivative_matrix(&g);
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let phi = w.phi.values();
    let l2_pot: Vec<f64> = match w.system() {
        System::Yukawa => phi.iter().map(|p| -2.0 * p).collect(),
        System::Cubic => phi.iter().map(|p| -2.0 * p * p).collect(),
    };
    let put_l2 = |a: &mut DMatrix<f64>, off: usize| {
        for i in 0..n {
            for j in 0..n {
                a[(off + i, off + j)] = -d2[(i, j)];
            }
            a[(off + i, off + i)] += 2.0 * c + l2_pot[i];
        }
    };
    match kind {
        LRcn | LRdn => {
            put_l2(&mut a, 0);
            if kind == LRcn {
                for i in 0..n {
                    for j in 0..n {
                        a[(n + i, n + j)] = -d2[(i, j)];
                    }
                    a[(n + i, n + i)] += 2.0 * c;
                }
            } else {
                put_l2(&mut a, n);
            }
            for i in 0..n {
                let off = match kind {
                    LRcn => -2.0 * std::f64::consts::SQRT_2 * phi[i],
                    _ => -4.0 * phi[i] * phi[i],
                };
                a[(i, n + i)] = off;
                a[(n + i, i)] = off;
            }
        }
        LIcn | LIdn => {
            put_l2(&mut a, 0);
            for i in 0..n {
                a[(n + i, n + i)] = 1.0;
            }
        }
        _ => return domain(format!("{kind:?} is not a block operator")),
    }
    HillOperator::new(kind, g, 2, a)
}

/// Assembles any named operator about the wave.
pub fn assemble(kind: OperatorKind, w: &WaveProfile) -> Result<HillOperator> {
    if kind.is_block() {
        assemble_block(kind, w)
    } else {
        assemble_named_scalar(kind, w)
    }
}

/// Constant 2x2 matrix `S` for which `(S (x) I) L_R (S (x) I)^{-1}` is
/// `diag(L_1, L_3)`.
pub fn similarity_matrix(system: System) -> [[f64; 2]; 2] {
    match system {
        System::Yukawa => [
            [1.0, std::f64::consts::FRAC_1_SQRT_2],
            [-std::f64::consts::FRAC_1_SQRT_2, 1.0],
        ],
        System::Cubic => [[1.0, 1.0], [-1.0, 1.0]],
    }
}

/// Max entry of `(S (x) I) L_R (S (x) I)^{-1} - diag(L_1, L_3)`, relative to `||L_R||_max`.
pub fn similarity_defect(w: &WaveProfile) -> Result<f64> {
    let (lr, l1, l3) = match w.system() {
        System::Yukawa => (OperatorKind::LRcn, OperatorKind::L1cn, OperatorKind::L3cn),
        System::Cubic => (OperatorKind::LRdn, OperatorKind::L1dn, OperatorKind::L3dn),
    };
    let lr = assemble_block(lr, w)?;
    let l1 = assemble_named_scalar(l1, w)?;
    let l3 = assemble_named_scalar(l3, w)?;
    let n = w.grid().n();
    let s = similarity_matrix(w.system());
    let kron = |m: [[f64; 2]; 2]| {
        let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for b in 0..2 {
            for d in 0..2 {
                for i in 0..n {
                    out[(b * n + i, d * n + i)] = m[b][d];
                }
            }
        }
        out
    };
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let sinv = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    let conj = kron(s) * &lr.matrix * kron(sinv);
    let mut target = DMatrix::<f64>::zeros(2 * n, 2 * n);
    target.view_mut((0, 0), (n, n)).copy_from(&l1.matrix);
    target.view_mut((n, n), (n, n)).copy_from(&l3.matrix);
    Ok((conj - target).amax() / lr.matrix.amax())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub kind: OperatorKind,
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    pub n_negative: usize,
    pub kernel_dim: usize,
    pub zero_tol: f64,
    /// Unit (Euclidean) eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: Option<DMatrix<f64>>,
    /// `max_i ||A v_i - lambda_i v_i|| / ||v_i||` (zero when vectors were not kept).
    pub residual: f64,
    /// Spectral norm `max |lambda|`.
    pub norm: f64,
}

impl SpectrumReport {
    pub fn vector(&self, i: usize) -> Option<Vec<f64>> {
        self.eigenvectors
            .as_ref()
            .map(|v| v.column(i).iter().copied().collect())
    }

    /// Simplicity surrogate: nearest neighbour farther than `100 zero_tol`.
    pub fn is_simple(&self, i: usize) -> bool {
        let gap = SIMPLE_GAP_FACTOR * self.zero_tol;
        let e = &self.eigenvalues;
        (i == 0 || e[i] - e[i - 1] > gap) && (i + 1 == e.len() || e[i + 1] - e[i] > gap)
    }

    /// Eigenvalues inside `±zero_tol`.
    pub fn kernel_indices(&self) -> Vec<usize> {
        (0..self.eigenvalues.len())
            .filter(|&i| self.eigenvalues[i].abs() <= self.zero_tol)
            .collect()
    }

    /// First eigenvalue lying strictly between `zero_tol` and `10 zero_tol` in magnitude.
    pub fn ambiguous(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .copied()
            .find(|l| l.abs() > self.zero_tol && l.abs() < 10.0 * self.zero_tol)
    }
}

/// Dense symmetric eigendecomposition. `zero_tol = None` selects
/// `ZERO_TOL_REL * max |lambda|`.
pub fn eig_sym(
    op: &HillOperator,
    zero_tol: Option<f64>,
    want_vectors: bool,
) -> Result<SpectrumReport> {
    eig_sym_with(
        op,
        zero_tol.map_or(Tol::Rel(ZERO_TOL_REL), Tol::Abs),
        want_vectors,
    )
}

/// As [`eig_sym`] with the zero threshold `zero_tol_rel * max |lambda|`.
pub fn eig_sym_rel(
    op: &HillOperator,
    zero_tol_rel: f64,
    want_vectors: bool,
) -> Result<SpectrumReport> {
    eig_sym_with(op, Tol::Rel(zero_tol_rel), want_vectors)
}

#[derive(Clone, Copy)]
enum Tol {
    Abs(f64),
    Rel(f64),
}

fn eig_sym_with(op: &HillOperator, tol: Tol, want_vectors: bool) -> Result<SpectrumReport> {
    let size = op.size();
    let eig = SymmetricEigen::try_new(op.matrix.clone(), f64::EPSILON, 100 * size.max(30))
        .ok_or_else(|| {
            Error::Eigen(format!(
                "symmetric QR did not converge for {size}x{size} {:?}",
                op.kind
            ))
        })?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let norm = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let zero_tol = match tol {
        Tol::Abs(t) => t,
        Tol::Rel(r) => r * norm,
    };
    let n_negative = eigenvalues.iter().filter(|&&l| l < -zero_tol).count();
    let kernel_dim = eigenvalues.iter().filter(|&&l| l.abs() <= zero_tol).count();
    let (eigenvectors, residual) = if want_vectors {
        let v = DMatrix::from_fn(size, size, |r, c| eig.eigenvectors[(r, order[c])]);
        let av = &op.matrix * &v;
        let mut res = 0.0f64;
        for (c, &l) in eigenvalues.iter().enumerate() {
            let r = (av.column(c) - v.column(c) * l).norm() / v.column(c).norm();
            res = res.max(r);
        }
        if res > 1e-8 * norm.max(1.0) {
            return Err(Error::Eigen(format!(
                "eigenpair residual {res:e} exceeds 1e-8 ||A||"
            )));
        }
        (Some(v), res)
    } else {
        (None, 0.0)
    };
    Ok(SpectrumReport {
        kind: op.kind,
        eigenvalues,
        n_negative,
        kernel_dim,
        zero_tol,
        eigenvectors,
        residual,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LameProblem {
    /// Period `2K`.
    Periodic,
    /// Antiperiodic over `2K`, periodic over `4K`.
    Semiperiodic,
}

/// Analytic eigenpairs of `-Psi'' + 12 k^2 sn^2(x) Psi = delta Psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameEigenData {
    pub problem: LameProblem,
    pub modulus: EllipticModulus,
    /// Periodic: `[delta_0, delta_1, delta_2]`; semiperiodic: `[delta~_0, delta~_1]`.
    pub deltas: [f64; 3],
    pub count: usize,
}

impl LameEigenData {
    pub fn deltas(&self) -> &[f64] {
        &self.deltas[..self.count]
    }

    /// Eigenfunction `i` evaluated at `x`.
    pub fn eigenfunction(&self, i: usize, x: f64) -> Result<f64> {
        let k2 = self.modulus.k_sq();
        let j = jacobi(x, self.modulus)?;
        let s2 = j.sn * j.sn;
        Ok(match (self.problem, i) {
            (LameProblem::Periodic, 0 | 2) => {
                let r = (1.0 - k2 + 4.0 * k2 * k2).sqrt();
                let sgn = if i == 0 { -1.0 } else { 1.0 };
                j.dn * (1.0 - (1.0 + 2.0 * k2 + sgn * r) * s2)
            }
            (LameProblem::Periodic, 1) => j.cn * j.sn * j.dn,
            (LameProblem::Semiperiodic, 0) => {
                j.cn * (1.0 - (2.0 + k2 - (4.0 - k2 + k2 * k2).sqrt()) * s2)
            }
            (LameProblem::Semiperiodic, 1) => {
                j.sn * (3.0 - (2.0 + 2.0 * k2 - (4.0 - 7.0 * k2 + 4.0 * k2 * k2).sqrt()) * s2)
            }
            _ => {
                return domain(format!(
                    "no eigenfunction {i} for the {:?} problem",
                    self.problem
                ))
            }
        })
    }
}

/// Closed-form Lamé eigenvalues. The periodic `delta_0, delta_2` use the
/// radicand `1 - k^2 + 4k^4`.
pub fn lame_analytic(k: EllipticModulus, problem: LameProblem) -> LameEigenData {
    let k2 = k.k_sq();
    let k4 = k2 * k2;
    match problem {
        LameProblem::Periodic => {
            let r = (1.0 - k2 + 4.0 * k4).sqrt();
            LameEigenData {
                problem,
                modulus: k,
                deltas: [
                    2.0 + 5.0 * k2 - 2.0 * r,
                    4.0 + 4.0 * k2,
                    2.0 + 5.0 * k2 + 2.0 * r,
                ],
                count: 3,
            }
        }
        LameProblem::Semiperiodic => LameEigenData {
            problem,
            modulus: k,
            deltas: [
                5.0 + 2.0 * k2 - 2.0 * (4.0 - k2 + k4).sqrt(),
                5.0 + 5.0 * k2 - 2.0 * (4.0 - 7.0 * k2 + 4.0 * k4).sqrt(),
                f64::NAN,
            ],
            count: 2,
        },
    }
}

/// Alternative periodic reading with radicand `1 - k^2 + 4k^2`.
pub fn lame_periodic_alt(k: EllipticModulus) -> [f64; 2] {
    let k2 = k.k_sq();
    let r = (1.0 + 3.0 * k2).sqrt();
    [2.0 + 5.0 * k2 - 2.0 * r, 2.0 + 5.0 * k2 + 2.0 * r]
}

/// Discrete `-d^2 + 12 k^2 sn^2` on `[0, periods * 2K]`.
pub fn lame_operator(k: EllipticModulus, periods: usize, n: usize) -> Result<HillOperator> {
    let kk = crate::elliptic::complete_k(k);
    let g = PeriodicGrid::new(2.0 * kk * periods as f64, n)?;
    let pot = g
        .points()
        .into_iter()
        .map(|x| jacobi(x, k).map(|j| 12.0 * k.k_sq() * j.sn * j.sn))
        .collect::<Result<Vec<_>>>()?;
    assemble_scalar(&RealField::new(g, pot)?, 0.0)
}

/// Closed-form eigenvalues of `-Psi'' + 6 k^2 sn^2(x) Psi = delta Psi`:
/// three periodic over `2K`, two antiperiodic over `2K`.
pub fn lame2_analytic(k: EllipticModulus, problem: LameProblem) -> Vec<f64> {
    let k2 = k.k_sq();
    match problem {
        LameProblem::Periodic => {
            let r = 2.0 * (1.0 - k2 + k2 * k2).sqrt();
            vec![2.0 + 2.0 * k2 - r, 4.0 + k2, 2.0 + 2.0 * k2 + r]
        }
        LameProblem::Semiperiodic => vec![1.0 + k2, 1.0 + 4.0 * k2],
    }
}

/// `lambda = delta (beta3 - beta1)/12 - (beta3 - omega)`.
pub fn delta_to_lambda(delta: f64, p: &CnoidalParams) -> f64 {
    delta * (p.beta3 - p.beta1) / 12.0 - (p.beta3 - p.omega)
}

/// For the dnoidal `L_1`: `lambda = eta^2 (delta - 4 - k^2)` for the
/// `6 k^2 sn^2` Lamé problem.
pub fn delta_to_lambda_dn(delta: f64, eta: f64, k: EllipticModulus) -> f64 {
    eta * eta * (delta - 4.0 - k.k_sq())
}

/// Eigenvalues of `double` left after removing one match (within `tol`)
/// for every eigenvalue of `single`. Both inputs sorted ascending.
pub fn set_difference(single: &[f64], double: &[f64], tol: f64) -> Vec<f64> {
    let mut used = vec![false; double.len()];
    for &s in single {
        if let Some(j) = (0..double.len())
            .filter(|&j| !used[j] && (double[j] - s).abs() <= tol)
            .min_by(|&a, &b| (double[a] - s).abs().total_cmp(&(double[b] - s).abs()))
        {
            used[j] = true;
        }
    }
    double
        .iter()
        .zip(used)
        .filter(|(_, u)| !u)
        .map(|(&d, _)| d)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub claim: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub kind: OperatorKind,
    pub domain_multiple: usize,
    pub n_negative: usize,
    pub kernel_dim: usize,
    pub lowest: Vec<f64>,
    pub checks: Vec<Check>,
}

impl CountReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot.abs() / (na * nb)
}

/// Number of whole wave periods covered by the grid.
pub fn domain_multiple(w: &WaveProfile) -> usize {
    (w.grid().length() / w.period()).round() as usize
}

/// Checks the eigenvalue counts, kernels and kernel eigenfunctions claimed
/// for `kind` on the wave's grid (one or two periods).
pub fn verify_counts(kind: OperatorKind, w: &WaveProfile) -> Result<CountReport> {
    verify_counts_with(kind, w, ZERO_TOL_REL)
}

/// [`verify_counts`] with a caller-chosen relative zero threshold.
pub fn verify_counts_with(
    kind: OperatorKind,
    w: &WaveProfile,
    zero_tol_rel: f64,
) -> Result<CountReport> {
    if !(zero_tol_rel > 0.0 && zero_tol_rel < 1.0) {
        return domain(format!(
            "relative zero tolerance must lie in (0, 1), got {zero_tol_rel}"
        ));
    }
    use OperatorKind::*;
    if !matches!(w.family, Family::Cnoidal | Family::Dnoidal) {
        return domain("eigenvalue counts are stated for periodic waves");
    }
    let m = domain_multiple(w);
    if m != 1 && m != 2 {
        return domain(format!(
            "counts are stated on one or two periods, grid covers {m}"
        ));
    }
    let op = assemble(kind, w)?;
    let rep = eig_sym_rel(&op, zero_tol_rel, true)?;
    let mut checks = Vec::new();
    let mut check = |claim: &str, passed: bool, detail: String| {
        checks.push(Check {
            claim: claim.to_string(),
            passed,
            detail,
        })
    };
    let phi = w.phi.values().to_vec();
    let dphi = w.phi_prime().into_values();
    let v = |i: usize| rep.vector(i).expect("vectors requested");

    match kind {
        L1cn | L1dn => {
            if m == 1 {
                check(
                    "one simple negative eigenvalue and a one-dimensional kernel",
                    rep.n_negative == 1 && rep.kernel_dim == 1 && rep.is_simple(0),
                    format!(
                        "n_negative = {}, kernel_dim = {}",
                        rep.n_negative, rep.kernel_dim
                    ),
                );
            } else {
                check(
                    "first four eigenvalues simple",
                    (0..4).all(|i| rep.is_simple(i)),
                    format!("lowest = {:?}", &rep.eigenvalues[..5]),
                );
                check(
                    "exactly three negative eigenvalues",
                    rep.n_negative == 3,
                    format!("n_negative = {}", rep.n_negative),
                );
                check(
                    "fourth eigenvalue is zero",
                    rep.eigenvalues[3].abs() <= rep.zero_tol && rep.kernel_dim == 1,
                    format!(
                        "lambda_3 = {:e}, zero_tol = {:e}",
                        rep.eigenvalues[3], rep.zero_tol
                    ),
                );
            }
            let idx = if m == 1 { 1 } else { 3 };
            let cos = cosine(&v(idx), &dphi);
            check(
                "kernel spanned by phi'",
                cos > 1.0 - 1e-8,
                format!("cosine = {cos}"),
            );
        }
        L2cn | L2dn | LIcn | LIdn => {
            check(
                "lowest eigenvalue zero and simple",
                rep.eigenvalues[0].abs() <= rep.zero_tol && rep.kernel_dim == 1 && rep.is_simple(0),
                format!(
                    "lambda_0 = {:e}, kernel_dim = {}",
                    rep.eigenvalues[0], rep.kernel_dim
                ),
            );
            check(
                "no negative eigenvalues",
                rep.n_negative == 0,
                format!("n_negative = {}", rep.n_negative),
            );
            let mut target = phi.clone();
            if kind.is_block() {
                target.extend(std::iter::repeat_n(0.0, phi.len()));
            }
            let cos = cosine(&v(0), &target);
            check(
                "kernel spanned by phi",
                cos > 1.0 - 1e-8,
                format!("cosine = {cos}"),
            );
        }
        L3cn | L3dn => {
            let tol = 1e-8 * rep.norm;
            check(
                "spectrum bounded below by 2c",
                rep.eigenvalues[0] >= 2.0 * w.c() - tol,
                format!("lambda_0 = {}, 2c = {}", rep.eigenvalues[0], 2.0 * w.c()),
            );
        }
        LRcn | LRdn => {
            let want = if m == 1 { 1 } else { 3 };
            check(
                "negative count of L_R equals that of L_1",
                rep.n_negative == want,
                format!("n_negative = {}, expected {want}", rep.n_negative),
            );
            check(
                "one-dimensional kernel",
                rep.kernel_dim == 1,
                format!("kernel_dim = {}", rep.kernel_dim),
            );
            let (a, b) = match kind {
                LRcn => (2.0 / 3.0, std::f64::consts::SQRT_2 / 3.0),
                _ => (1.0, 1.0),
            };
            let mut target: Vec<f64> = dphi.iter().map(|d| a * d).collect();
            target.extend(dphi.iter().map(|d| b * d));
            let cos = cosine(&v(want), &target);
            check(
                "kernel spanned by the translation mode",
                cos > 1.0 - 1e-8,
                format!("cosine = {cos}"),
            );
        }
        Custom => return domain("custom operators carry no count claims"),
    }
    Ok(CountReport {
        kind,
        domain_multiple: m,
        n_negative: rep.n_negative,
        kernel_dim: rep.kernel_dim,
        lowest: rep.eigenvalues.iter().take(6).copied().collect(),
        checks,
    })
}

/// Largest normalized overlap `|<chi_i, phi>| / (||chi_i|| ||phi||)` over the
/// second and third eigenfunctions of a scalar report on the wave's grid.
pub fn orthogonality_check(report: &SpectrumReport, w: &WaveProfile) -> Result<f64> {
    let Some(vecs) = &report.eigenvectors else {
        return domain("orthogonality check needs eigenvectors");
    };
    if vecs.nrows() != w.grid().n() {
        return domain("orthogonality check expects a scalar operator on the wave grid");
    }
    let g = w.grid();
    let phi = w.phi.values();
    let nphi = inner(phi, phi, g).sqrt();
    let mut worst = 0.0f64;
    for i in 1..=2 {
        let chi: Vec<f64> = vecs.column(i).iter().copied().collect();
        let nchi = inner(&chi, &chi, g).sqrt();
        worst = worst.max(inner(&chi, phi, g).abs() / (nphi * nchi));
    }
    Ok(worst)
}

/// `<chi_0, phi>` with `chi_0` sign-fixed to be positive at its maximum
/// modulus, together with the minimum of the sign-fixed `chi_0`.
pub fn ground_state_overlap(report: &SpectrumReport, w: &WaveProfile) -> Result<(f64, f64)> {
    let Some(chi) = report.vector(0) else {
        return domain("ground state overlap needs eigenvectors");
    };
    if chi.len() != w.grid().n() {
        return domain("ground state overlap expects a scalar operator on the wave grid");
    }
    let peak = chi
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let s = peak.signum();
    let chi: Vec<f64> = chi.iter().map(|x| s * x).collect();
    let min = chi.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((inner(&chi, w.phi.values(), w.grid()), min))
}

/// Sup-norm residual of `-Psi'' + 12 k^2 sn^2 Psi - delta Psi` on `[0, periods * 2K]`.
pub fn lame_residual(data: &LameEigenData, i: usize, n: usize) -> Result<f64> {
    let kk = crate::elliptic::complete_k(data.modulus);
    let periods = match data.problem {
        LameProblem::Periodic => 1.0,
        LameProblem::Semiperiodic => 2.0,
    };
    let g = PeriodicGrid::new(2.0 * kk * periods, n)?;
    let psi = g
        .points()
        .into_iter()
        .map(|x| data.eigenfunction(i, x))
        .collect::<Result<Vec<_>>>()?;
    let psi = RealField::new(g, psi)?;
    let d2 = spectral_derivative(&psi, DerivativeOrder::Second);
    let k2 = data.modulus.k_sq();
    let delta = data.deltas()[i];
    let mut worst = 0.0f64;
    for (j, x) in g.points().into_iter().enumerate() {
        let sn = jacobi(x, data.modulus)?.sn;
        let p = psi.values()[j];
        worst = worst.max((-d2.values()[j] + 12.0 * k2 * sn * sn * p - delta * p).abs());
    }
    Ok(worst / psi.sup_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waves::{cnoidal_params, cnoidal_profile, solve_modulus_cnoidal, WaveParams};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const L: f64 = 2.0 * PI;

    fn km(k: f64) -> EllipticModulus {
        EllipticModulus::new(k).unwrap()
    }

    #[test]
    fn two_by_two() {
        let g = PeriodicGrid::new(1.0, 16).unwrap();
        let mut m = DMatrix::<f64>::zeros(16, 16);
        m[(0, 0)] = 2.0;
        m[(1, 1)] = 2.0;
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        let op = HillOperator::new(OperatorKind::Custom, g, 1, m).unwrap();
        let r = eig_sym(&op, Some(1e-12), true).unwrap();
        assert!((r.eigenvalues[14] - 1.0).abs() < 1e-14 && (r.eigenvalues[15] - 3.0).abs() < 1e-14);
        assert_eq!(r.kernel_dim, 14);
    }

    #[test]
    fn asymmetric_rejected() {
        let g = PeriodicGrid::new(1.0, 16).unwrap();
        let mut m = DMatrix::<f64>::identity(16, 16);
        m[(0, 1)] = 1e-3;
        assert!(HillOperator::new(OperatorKind::Custom, g, 1, m).is_err());
    }

    #[test]
    fn free_operator_matches_symbol() {
        let g = PeriodicGrid::new(L, 32).unwrap();
        let c = 0.7;
        let op = assemble_scalar(&RealField::from_fn(g, |_| 0.0), c).unwrap();
        let r = eig_sym(&op, None, false).unwrap();
        let mut want: Vec<f64> = (0..32).map(|j| 2.0 * c + g.wavenumber(j).powi(2)).collect();
        // the collocated Nyquist row carries the same symbol
        want.sort_by(f64::total_cmp);
        for (a, b) in r.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn lame_orderings_and_values() {
        let p = lame_analytic(km(0.5), LameProblem::Periodic);
        assert!((p.deltas[1] - 5.0).abs() < 1e-14);
        assert!((p.deltas[0] - 1.25).abs() < 1e-14);
        let s = lame_analytic(km(0.5), LameProblem::Semiperiodic);
        assert!(
            p.deltas[0] < s.deltas[0] && s.deltas[0] < s.deltas[1] && s.deltas[1] < p.deltas[1]
        );
    }

    proptest! {
        #[test]
        fn lame_ordering_random(k in 0.01f64..0.99) {
            let p = lame_analytic(km(k), LameProblem::Periodic);
            prop_assert!(p.deltas[0] < p.deltas[1] && p.deltas[1] < p.deltas[2]);
            let s = lame_analytic(km(k), LameProblem::Semiperiodic);
            prop_assert!(p.deltas[0] < s.deltas[0] && s.deltas[0] < s.deltas[1] && s.deltas[1] < p.deltas[1]);
        }
    }

    #[test]
    fn lame_plug_in_residuals() {
        for &k in &[0.2, 0.5, 0.8, 0.95] {
            for prob in [LameProblem::Periodic, LameProblem::Semiperiodic] {
                let d = lame_analytic(km(k), prob);
                for i in 0..d.count {
                    let r = lame_residual(&d, i, 256).unwrap();
                    assert!(r < 1e-8, "k={k} {prob:?} {i}: {r:e}");
                }
            }
        }
    }

    #[test]
    fn discrete_lame_matches_closed_forms() {
        let k = km(0.6);
        let single = eig_sym(&lame_operator(k, 1, 256).unwrap(), None, false).unwrap();
        let double = eig_sym(&lame_operator(k, 2, 256).unwrap(), None, false).unwrap();
        let p = lame_analytic(k, LameProblem::Periodic);
        for (i, &d) in p.deltas().iter().enumerate() {
            assert!((single.eigenvalues[i] - d).abs() < 1e-6, "{i}");
        }
        let semi = set_difference(&single.eigenvalues, &double.eigenvalues, 1e-7);
        let s = lame_analytic(k, LameProblem::Semiperiodic);
        assert!((semi[0] - s.deltas[0]).abs() < 1e-6 && (semi[1] - s.deltas[1]).abs() < 1e-6);
        // the 4k^2 radicand does not reproduce the discrete spectrum
        let alt = lame_periodic_alt(k);
        assert!((single.eigenvalues[0] - alt[0]).abs() > 1e-2);
    }

    #[test]
    fn dnoidal_l1_matches_order_two_lame() {
        let c = 0.3;
        let one = WaveProfile::periodic(Family::Dnoidal, c, L, 128, 1).unwrap();
        let two = WaveProfile::periodic(Family::Dnoidal, c, L, 128, 2).unwrap();
        let WaveParams::Dnoidal(p) = one.params else {
            unreachable!()
        };
        let e1 = eig_sym(&assemble(OperatorKind::L1dn, &one).unwrap(), None, false)
            .unwrap()
            .eigenvalues;
        let e2 = eig_sym(&assemble(OperatorKind::L1dn, &two).unwrap(), None, false)
            .unwrap()
            .eigenvalues;
        for (i, d) in lame2_analytic(p.modulus, LameProblem::Periodic)
            .into_iter()
            .enumerate()
        {
            let want = delta_to_lambda_dn(d, p.eta, p.modulus);
            assert!((e1[i] - want).abs() < 1e-8, "{i}: {} vs {want}", e1[i]);
        }
        let semi = set_difference(&e1, &e2, 1e-7);
        for (i, d) in lame2_analytic(p.modulus, LameProblem::Semiperiodic)
            .into_iter()
            .enumerate()
        {
            let want = delta_to_lambda_dn(d, p.eta, p.modulus);
            assert!((semi[i] - want).abs() < 1e-8, "{i}: {} vs {want}", semi[i]);
        }
    }

    #[test]
    fn count_tolerance_is_configurable() {
        let w = cn_wave(0.703, 1, 128);
        let a = verify_counts(OperatorKind::L1cn, &w).unwrap();
        let b = verify_counts_with(OperatorKind::L1cn, &w, 1e-10).unwrap();
        assert!(a.passed() && b.passed());
        assert!(verify_counts_with(OperatorKind::L1cn, &w, 0.0).is_err());
    }

    #[test]
    fn delta_one_is_the_kernel() {
        for &k in &[0.1, 0.5, 0.9, 0.999] {
            let p = cnoidal_params(km(k), L).unwrap();
            let l = lame_analytic(km(k), LameProblem::Periodic);
            let lam = delta_to_lambda(l.deltas[1], &p);
            assert!(lam.abs() < 1e-12 * p.omega, "{lam:e}");
            assert!(delta_to_lambda(l.deltas[0], &p) < 0.0);
            let zero = 12.0 * (p.beta3 - p.omega) / (p.beta3 - p.beta1);
            assert!((zero - l.deltas[1]).abs() < 1e-12);
        }
    }

    fn cn_wave(k: f64, mult: usize, n: usize) -> WaveProfile {
        let p = cnoidal_params(km(k), L).unwrap();
        cnoidal_profile(&p, &PeriodicGrid::new(L * mult as f64, n).unwrap()).unwrap()
    }

    #[test]
    fn operator_spectrum_matches_lame_map() {
        let w = cn_wave(0.7, 1, 128);
        let crate::waves::WaveParams::Cnoidal(p) = w.params else {
            unreachable!()
        };
        let r = eig_sym(
            &assemble_named_scalar(OperatorKind::L1cn, &w).unwrap(),
            None,
            false,
        )
        .unwrap();
        let l = lame_analytic(p.modulus, LameProblem::Periodic);
        for i in 0..3 {
            let want = delta_to_lambda(l.deltas[i], &p);
            assert!((r.eigenvalues[i] - want).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn kernel_elements() {
        let w = cn_wave(0.6, 1, 128);
        let n = 128;
        let li = assemble_block(OperatorKind::LIcn, &w).unwrap();
        let mut x = w.phi.values().to_vec();
        x.extend(vec![0.0; n]);
        let r = li.apply(&x);
        assert!(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-8);
        let lr = assemble_block(OperatorKind::LRcn, &w).unwrap();
        let d = w.phi_prime().into_values();
        let mut y: Vec<f64> = d.iter().map(|v| 2.0 * v / 3.0).collect();
        y.extend(d.iter().map(|v| std::f64::consts::SQRT_2 * v / 3.0));
        let r = lr.apply(&y);
        assert!(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-8);
    }

    #[test]
    fn family_mismatch() {
        let w = cn_wave(0.5, 1, 64);
        assert!(assemble_block(OperatorKind::LRdn, &w).is_err());
        assert!(assemble_named_scalar(OperatorKind::LRcn, &w).is_err());
    }

    #[test]
    fn similarity_both_families() {
        let w = cn_wave(0.6, 1, 64);
        assert!(similarity_defect(&w).unwrap() < 1e-10);
        let w = WaveProfile::periodic(Family::Dnoidal, 1.0, L, 64, 1).unwrap();
        assert!(similarity_defect(&w).unwrap() < 1e-10);
    }

    #[test]
    fn block_spectrum_is_union() {
        let w = cn_wave(0.6, 1, 64);
        let lr = eig_sym(
            &assemble_block(OperatorKind::LRcn, &w).unwrap(),
            None,
            false,
        )
        .unwrap();
        let mut u = eig_sym(
            &assemble_named_scalar(OperatorKind::L1cn, &w).unwrap(),
            None,
            false,
        )
        .unwrap()
        .eigenvalues;
        u.extend(
            eig_sym(
                &assemble_named_scalar(OperatorKind::L3cn, &w).unwrap(),
                None,
                false,
            )
            .unwrap()
            .eigenvalues,
        );
        u.sort_by(f64::total_cmp);
        for (a, b) in lr.eigenvalues.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8 * lr.norm);
        }
    }

    #[test]
    fn counts_both_domains() {
        let k = solve_modulus_cnoidal(0.6, L).unwrap().k();
        for mult in [1, 2] {
            let w = cn_wave(k, mult, 128 * mult);
            for kind in OperatorKind::all_for(System::Yukawa) {
                let r = verify_counts(kind, &w).unwrap();
                assert!(r.passed(), "{kind:?} x{mult}: {:?}", r.failures());
            }
            let w = WaveProfile::periodic(Family::Dnoidal, 0.3, L, 128, mult).unwrap();
            for kind in OperatorKind::all_for(System::Cubic) {
                let r = verify_counts(kind, &w).unwrap();
                assert!(r.passed(), "{kind:?} x{mult}: {:?}", r.failures());
            }
        }
    }

    #[test]
    fn doubled_domain_orthogonality_and_nesting() {
        let w1 = cn_wave(0.5, 1, 128);
        let w2 = cn_wave(0.5, 2, 256);
        let r1 = eig_sym(
            &assemble_named_scalar(OperatorKind::L1cn, &w1).unwrap(),
            None,
            false,
        )
        .unwrap();
        let r2 = eig_sym(
            &assemble_named_scalar(OperatorKind::L1cn, &w2).unwrap(),
            None,
            true,
        )
        .unwrap();
        assert!(orthogonality_check(&r2, &w2).unwrap() < 1e-8);
        let (ov, min) = ground_state_overlap(&r2, &w2).unwrap();
        assert!(ov > 0.0 && min > 0.0);
        // low part of the single-period spectrum reappears on the doubled domain
        for &l in r1.eigenvalues.iter().take(20) {
            assert!(r2.eigenvalues.iter().any(|&m| (m - l).abs() < 1e-8));
        }
        let no_vec = eig_sym(
            &assemble_named_scalar(OperatorKind::L1cn, &w2).unwrap(),
            None,
            false,
        )
        .unwrap();
        assert!(orthogonality_check(&no_vec, &w2).is_err());
    }

    #[test]
    fn spectral_convergence() {
        let errs: Vec<f64> = [16, 32, 48]
            .iter()
            .map(|&n| {
                let w = cn_wave(0.995, 1, n);
                let crate::waves::WaveParams::Cnoidal(p) = w.params else {
                    unreachable!()
                };
                let r = eig_sym(
                    &assemble_named_scalar(OperatorKind::L1cn, &w).unwrap(),
                    None,
                    false,
                )
                .unwrap();
                (r.eigenvalues[0]
                    - delta_to_lambda(
                        lame_analytic(p.modulus, LameProblem::Periodic).deltas[0],
                        &p,
                    ))
                .abs()
            })
            .collect();
        assert!(
            errs[1] < 0.1 * errs[0] && errs[2] < 0.1 * errs[1],
            "{errs:?}"
        );
    }
}

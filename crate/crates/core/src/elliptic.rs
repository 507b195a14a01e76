//! Complete elliptic integrals and Jacobi elliptic functions.
//!
//! Everything here is built on the arithmetic-geometric mean. The modulus
//! carries `k'^2 = 1 - k^2` explicitly so that moduli close to one keep
//! full relative precision in the complementary modulus.

use std::f64::consts::FRAC_PI_2;

use crate::error::{domain, Result};

/// Moduli closer than this to either endpoint use the asymptotic series.
const DEGENERATE: f64 = 1e-8;
// One ulp: |a - b| stagnates there once the means agree to working precision.
const AGM_TOL: f64 = f64::EPSILON;
const AGM_MAX_ITER: usize = 64;

/// Elliptic modulus `k` in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    k: f64,
    kprime_sq: f64,
    // low word of 1 - k^2, so that (kprime_sq, kprime_sq_lo) is exact
    kprime_sq_lo: f64,
}

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return domain(format!("elliptic modulus must lie in (0,1), got {k}"));
        }
        let kp2 = dd::one_minus_square(k);
        Ok(Self {
            k,
            kprime_sq: kp2.hi,
            kprime_sq_lo: kp2.lo,
        })
    }

    /// Builds the modulus from `k'^2 = 1 - k^2`, which is the accurate
    /// parametrisation when `k` is close to one.
    pub fn from_kprime_sq(kprime_sq: f64) -> Result<Self> {
        if !(kprime_sq > 0.0 && kprime_sq < 1.0) {
            return domain(format!("k'^2 must lie in (0,1), got {kprime_sq}"));
        }
        Ok(Self {
            k: (1.0 - kprime_sq).sqrt(),
            kprime_sq,
            kprime_sq_lo: 0.0,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn k_sq(&self) -> f64 {
        self.k * self.k
    }

    pub fn kprime_sq(&self) -> f64 {
        self.kprime_sq
    }

    pub fn kprime(&self) -> f64 {
        self.kprime_sq.sqrt()
    }

    /// The complementary modulus `k' = sqrt(1 - k^2)`.
    pub fn complementary(&self) -> Self {
        let k = self.kprime();
        let kp2 = dd::one_minus_square(k);
        Self {
            k,
            kprime_sq: kp2.hi,
            kprime_sq_lo: kp2.lo,
        }
    }
}

/// Values of `(sn, cn, dn)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiTriple {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// Complete elliptic integral of the first kind.
pub fn complete_k(m: EllipticModulus) -> f64 {
    let kp = m.kprime();
    if m.k < DEGENERATE {
        return FRAC_PI_2 * (1.0 + 0.25 * m.k_sq());
    }
    if kp < DEGENERATE {
        let l = (4.0 / kp).ln();
        return l + 0.25 * m.kprime_sq * (l - 1.0);
    }
    FRAC_PI_2 / agm(1.0, kp)
}

/// Complete elliptic integral of the second kind.
pub fn complete_e(m: EllipticModulus) -> f64 {
    let kp = m.kprime();
    if m.k < DEGENERATE {
        return FRAC_PI_2 * (1.0 - 0.25 * m.k_sq());
    }
    if kp < DEGENERATE {
        let l = (4.0 / kp).ln();
        return 1.0 + 0.5 * m.kprime_sq * (l - 0.5);
    }
    // E/K = (1 + k'^2)/2 - sum_{n>=1} 2^(n-1) c_n^2; the n = 0 term is folded
    // into the leading constant to avoid forming 1 - k^2/2.
    let (mut a, mut b) = (1.0_f64, kp);
    let mut weight = 1.0;
    let mut ratio = 0.5 * (1.0 + m.kprime_sq);
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        ratio -= weight * c * c;
        weight *= 2.0;
        if c.abs() <= AGM_TOL * a {
            break;
        }
    }
    ratio * FRAC_PI_2 / a
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

/// Derivative `dK/dk = (E - k'^2 K) / (k k'^2)`.
pub fn d_complete_k(m: EllipticModulus) -> f64 {
    (complete_e(m) - m.kprime_sq * complete_k(m)) / (m.k * m.kprime_sq)
}

/// Derivative `dE/dk = (E - K) / k`.
pub fn d_complete_e(m: EllipticModulus) -> f64 {
    (complete_e(m) - complete_k(m)) / m.k
}

/// Jacobi elliptic functions `sn, cn, dn` at real argument `x`.
///
/// The argument is first reduced modulo `4K` with `K` carried in
/// double-double precision, so the reduction error does not grow with `|x|`.
pub fn jacobi(x: f64, m: EllipticModulus) -> Result<JacobiTriple> {
    if !x.is_finite() {
        return domain(format!("Jacobi functions need a finite argument, got {x}"));
    }
    let quarter = dd::complete_k(dd::Dd {
        hi: m.kprime_sq,
        lo: m.kprime_sq_lo,
    });
    let r = dd::reduce(x, quarter.scale(4.0));
    // r in [-2K, 2K]
    if m.k < DEGENERATE {
        return Ok(trig_series(r, m.k_sq()));
    }
    if m.kprime() < DEGENERATE {
        // fold into [-K, K] with sn, cn -> -sn, -cn under u -> u -+ 2K
        let k = quarter.hi;
        let (u, flip) = if r > k {
            (dd::reduce_offset(r, quarter.scale(2.0)), -1.0)
        } else if r < -k {
            (dd::reduce_offset(r, quarter.scale(-2.0)), -1.0)
        } else {
            (r, 1.0)
        };
        let t = hyperbolic_series(u, m.kprime_sq);
        return Ok(JacobiTriple {
            sn: flip * t.sn,
            cn: flip * t.cn,
            dn: t.dn,
        });
    }
    Ok(landen(r, m))
}

/// Descending Gauss-Landen transformation for sn, cn, dn (Bulirsch's
/// scheme). Works from `k'^2` directly, so it stays accurate near `k = 1`.
fn landen(u: f64, m: EllipticModulus) -> JacobiTriple {
    // stopping on |a - b| <= CA * a leaves an error of order CA^2
    const CA: f64 = 1e-9;
    let mut em = [0.0_f64; AGM_MAX_ITER];
    let mut en = [0.0_f64; AGM_MAX_ITER];
    let mut emc = m.kprime_sq;
    let mut a = 1.0_f64;
    let mut dn = 1.0_f64;
    let mut c = 1.0_f64;
    let mut l = 0;
    for i in 0..AGM_MAX_ITER {
        l = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= CA * a {
            break;
        }
        emc *= a;
        a = c;
    }
    let v = c * u;
    let (mut sn, mut cn) = v.sin_cos();
    if sn != 0.0 {
        let mut a = cn / sn;
        c *= a;
        for ii in (0..=l).rev() {
            let b = em[ii];
            a *= c;
            c *= dn;
            dn = (en[ii] + a) / (b + a);
            a = c / b;
        }
        let s = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { s } else { -s };
        cn = c * sn;
    }
    JacobiTriple { sn, cn, dn }
}

fn trig_series(u: f64, k_sq: f64) -> JacobiTriple {
    let (s, c) = u.sin_cos();
    let w = 0.25 * k_sq * (u - s * c);
    JacobiTriple {
        sn: s - w * c,
        cn: c + w * s,
        dn: 1.0 - 0.5 * k_sq * s * s,
    }
}

fn hyperbolic_series(u: f64, kprime_sq: f64) -> JacobiTriple {
    let (sh, ch) = (u.sinh(), u.cosh());
    let th = u.tanh();
    let sech = 1.0 / ch;
    let q = 0.25 * kprime_sq;
    JacobiTriple {
        sn: th + q * (sh * ch - u) * sech * sech,
        cn: sech - q * (sh * ch - u) * th * sech,
        dn: sech + q * (sh * ch + u) * th * sech,
    }
}

/// Minimal double-double arithmetic, used only to carry the quarter period
/// through the argument reduction.
mod dd {
    use super::{AGM_MAX_ITER, DEGENERATE};

    #[derive(Debug, Clone, Copy)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    const PI_HALF: Dd = Dd {
        hi: std::f64::consts::FRAC_PI_2,
        lo: 6.123_233_995_736_766e-17,
    };

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: e }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    impl Dd {
        pub fn from(x: f64) -> Self {
            Dd { hi: x, lo: 0.0 }
        }

        pub fn add(self, o: Dd) -> Dd {
            let s = two_sum(self.hi, o.hi);
            let t = two_sum(self.lo, o.lo);
            let s = quick_two_sum(s.hi, s.lo + t.hi);
            quick_two_sum(s.hi, s.lo + t.lo)
        }

        pub fn sub(self, o: Dd) -> Dd {
            self.add(Dd {
                hi: -o.hi,
                lo: -o.lo,
            })
        }

        pub fn mul(self, o: Dd) -> Dd {
            let p = two_prod(self.hi, o.hi);
            quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
        }

        pub fn scale(self, s: f64) -> Dd {
            let p = two_prod(self.hi, s);
            quick_two_sum(p.hi, p.lo + self.lo * s)
        }

        pub fn div(self, o: Dd) -> Dd {
            let q1 = self.hi / o.hi;
            let r = self.sub(o.scale(q1));
            let q2 = r.hi / o.hi;
            let r = r.sub(o.scale(q2));
            let q3 = r.hi / o.hi;
            quick_two_sum(q1, q2).add(Dd::from(q3))
        }

        pub fn sqrt(self) -> Dd {
            let x = self.hi.sqrt();
            // one Newton step: x + (a - x^2) / (2x)
            let r = self.sub(two_prod(x, x));
            quick_two_sum(x, r.hi / (2.0 * x))
        }
    }

    /// `1 - k^2` without rounding.
    pub fn one_minus_square(k: f64) -> Dd {
        let p = two_prod(k, k);
        Dd::from(1.0).sub(p)
    }

    /// Quarter period `K` in double-double precision from `k'^2`.
    pub fn complete_k(kprime_sq: Dd) -> Dd {
        let kp = kprime_sq.sqrt();
        if kp.hi < DEGENERATE {
            let l = (4.0 / kp.hi).ln();
            return Dd::from(l + 0.25 * kprime_sq.hi * (l - 1.0));
        }
        let mut a = Dd::from(1.0);
        let mut b = kp;
        for _ in 0..AGM_MAX_ITER {
            let diff = a.sub(b);
            if diff.hi.abs() <= 1e-30 * a.hi {
                break;
            }
            let an = a.add(b).scale(0.5);
            b = a.mul(b).sqrt();
            a = an;
        }
        PI_HALF.div(a.add(b).scale(0.5))
    }

    /// `x - n * period` with `n` the nearest integer, evaluated so that the
    /// low word of the period is not lost.
    pub fn reduce(x: f64, period: Dd) -> f64 {
        let n = (x / period.hi).round();
        if n == 0.0 {
            return x;
        }
        let p = two_prod(n, period.hi);
        let r = Dd::from(x).sub(p).sub(Dd::from(n * period.lo));
        let half = 0.5 * period.hi;
        let v = r.hi + r.lo;
        // guard the rounding of n at the half-period boundary
        if v > half {
            v - period.hi
        } else if v < -half {
            v + period.hi
        } else {
            v
        }
    }

    /// `x - offset` in double-double.
    pub fn reduce_offset(x: f64, offset: Dd) -> f64 {
        let r = Dd::from(x).sub(offset);
        r.hi + r.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(k: f64) -> EllipticModulus {
        EllipticModulus::new(k).unwrap()
    }

    #[test]
    fn rejects_bad_modulus() {
        assert!(EllipticModulus::new(0.0).is_err());
        assert!(EllipticModulus::new(1.0).is_err());
        assert!(EllipticModulus::new(f64::NAN).is_err());
        assert!(EllipticModulus::new(-0.2).is_err());
    }

    #[test]
    fn endpoint_limits() {
        let small = m(1e-10);
        assert!((complete_k(small) - FRAC_PI_2).abs() < 1e-15);
        assert!((complete_e(small) - FRAC_PI_2).abs() < 1e-15);
        let near_one = EllipticModulus::from_kprime_sq(1e-20).unwrap();
        assert!((complete_e(near_one) - 1.0).abs() < 1e-15);
        assert!(complete_k(near_one) > 20.0);
    }

    #[test]
    fn reference_values_k_half() {
        // mpmath, 30 digits
        assert!((complete_k(m(0.5)) / 1.685_750_354_812_596 - 1.0).abs() < 1e-15);
        assert!((complete_e(m(0.5)) / 1.467_462_209_339_427_2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn series_branch_matches_agm() {
        let kp = 0.99e-8;
        let series = complete_k(EllipticModulus::from_kprime_sq(kp * kp).unwrap());
        assert!((series / (FRAC_PI_2 / agm(1.0, kp)) - 1.0).abs() < 1e-14);
        let k = 0.99e-8;
        let series = complete_k(EllipticModulus::new(k).unwrap());
        assert!((series / (FRAC_PI_2 / agm(1.0, (1.0 - k * k).sqrt())) - 1.0).abs() < 1e-15);
        // Jacobi functions across the k' switch
        let below = EllipticModulus::from_kprime_sq(0.999e-16).unwrap();
        let above = EllipticModulus::from_kprime_sq(1.001e-16).unwrap();
        for x in [0.3, 3.0, 12.0] {
            let a = jacobi(x, below).unwrap();
            let b = jacobi(x, above).unwrap();
            assert!((a.sn - b.sn).abs() < 1e-12 && (a.cn - b.cn).abs() < 1e-12);
            assert!((a.dn - b.dn).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_period_values() {
        for &k in &[0.1, 0.5, 0.9, 0.999] {
            let mm = m(k);
            let t = jacobi(complete_k(mm), mm).unwrap();
            assert!((t.sn - 1.0).abs() < 1e-14);
            assert!(t.cn.abs() < 1e-12);
            assert!((t.dn - mm.kprime()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_moduli() {
        let x = 0.7;
        let t = jacobi(x, m(1e-9)).unwrap();
        assert!((t.sn - x.sin()).abs() < 1e-15);
        assert!((t.cn - x.cos()).abs() < 1e-15);
        assert!((t.dn - 1.0).abs() < 1e-15);
        let t = jacobi(x, EllipticModulus::from_kprime_sq(1e-18).unwrap()).unwrap();
        assert!((t.sn - x.tanh()).abs() < 1e-15);
        assert!((t.cn - 1.0 / x.cosh()).abs() < 1e-15);
        assert!((t.dn - 1.0 / x.cosh()).abs() < 1e-15);
    }

    #[test]
    fn large_arguments_against_mpmath() {
        // sn, cn, dn at (x, k) computed with mpmath at 30 digits
        let cases = [
            (
                1e6,
                0.7,
                [
                    0.624_533_225_632_834_1,
                    -0.780_998_239_486_266_4,
                    0.899_377_308_219_146_3,
                ],
            ),
            (
                12345.678,
                0.99,
                [
                    -0.100_933_661_916_959_85,
                    -0.994_893_158_028_555_8,
                    0.994_995_039_793_556_7,
                ],
            ),
            (
                -987654.321,
                0.3,
                [
                    0.483_873_993_754_744_03,
                    -0.875_137_679_549_814_6,
                    0.989_407_871_524_734_3,
                ],
            ),
        ];
        for (x, k, want) in cases {
            let t = jacobi(x, m(k)).unwrap();
            assert!((t.sn - want[0]).abs() < 1e-12, "sn({x},{k}) = {}", t.sn);
            assert!((t.cn - want[1]).abs() < 1e-12, "cn({x},{k}) = {}", t.cn);
            assert!((t.dn - want[2]).abs() < 1e-12, "dn({x},{k}) = {}", t.dn);
        }
    }

    #[test]
    fn non_finite_argument() {
        assert!(jacobi(f64::INFINITY, m(0.5)).is_err());
        assert!(jacobi(f64::NAN, m(0.5)).is_err());
    }

    #[test]
    fn derivative_formulas_match_differences() {
        for &k in &[0.2, 0.5, 0.8, 0.95] {
            let h = 1e-6;
            let fd_k = (complete_k(m(k + h)) - complete_k(m(k - h))) / (2.0 * h);
            let fd_e = (complete_e(m(k + h)) - complete_e(m(k - h))) / (2.0 * h);
            assert!((d_complete_k(m(k)) - fd_k).abs() < 1e-6 * fd_k.abs().max(1.0));
            assert!((d_complete_e(m(k)) - fd_e).abs() < 1e-6 * fd_e.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn monotone_in_modulus(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(complete_k(m(hi)) > complete_k(m(lo)));
            prop_assert!(complete_e(m(hi)) < complete_e(m(lo)));
        }

        #[test]
        fn triple_invariants(x in -1e4f64..1e4, k in 0.0001f64..0.9999) {
            let mm = m(k);
            let t = jacobi(x, mm).unwrap();
            prop_assert!((t.sn * t.sn + t.cn * t.cn - 1.0).abs() < 1e-12);
            prop_assert!((t.dn * t.dn + mm.k_sq() * t.sn * t.sn - 1.0).abs() < 1e-12);
            prop_assert!(t.dn > 0.0);
            prop_assert!(t.sn.abs() <= 1.0 && t.cn.abs() <= 1.0);
        }
    }
}

//! Special functions and distribution tails used by the hypothesis tests.
//!
//! Everything here is written from scratch on `f64`. Upper tails are computed
//! directly (never as `1 - cdf`) so p-values far below machine epsilon, such
//! as `1e-116`, keep their relative precision.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(AuditError::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; NaN becomes 1.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Probability(1.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// `ln Γ(x)` for `x > 0`.
///
/// Stirling's series for `x >= 10`, upward recurrence below that.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(AuditError::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x >= 10.0 {
        return stirling(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < 10.0 {
        prod *= shifted;
        shifted += 1.0;
    }
    stirling(shifted) - prod.ln()
}

fn stirling(x: f64) -> f64 {
    // 0.5 * ln(2π)
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2
                        * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0 - inv2 * (691.0 / 360_360.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() || !(x >= 0.0) || x.is_nan() {
        return Err(AuditError::Domain(format!(
            "incomplete gamma requires a > 0 and x >= 0, got a={a}, x={x}"
        )));
    }
    Ok(())
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_incomplete_gamma_p(a: f64, x: f64) -> Result<Probability> {
    check_gamma_args(a, x)?;
    Ok(Probability::clamped(gamma_p(a, x)))
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn reg_incomplete_gamma_q(a: f64, x: f64) -> Result<Probability> {
    check_gamma_args(a, x)?;
    Ok(Probability::clamped(gamma_q(a, x)))
}

fn gamma_p(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

fn gamma_q(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_incomplete_beta(a: f64, b: f64, x: f64) -> Result<Probability> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(AuditError::Domain(format!(
            "incomplete beta requires a, b > 0 and x in [0, 1], got a={a}, b={b}, x={x}"
        )));
    }
    Ok(Probability::clamped(beta_reg(a, b, x)))
}

fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        1.0 + gamma_p(0.5, x * x)
    }
}

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> Probability {
    Probability::clamped(0.5 * erfc(-z / SQRT_2))
}

/// Standard normal upper tail `1 - Φ(z)`, accurate far into the tail.
pub fn normal_sf(z: f64) -> Probability {
    Probability::clamped(0.5 * erfc(z / SQRT_2))
}

/// Inverse standard normal CDF (Wichura's AS 241, ~1e-16 relative accuracy).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AuditError::Domain(format!(
            "normal quantile requires p in [0, 1], got {p}"
        )));
    }
    Ok(ppnd16(p))
}

#[allow(clippy::inconsistent_digit_grouping)]
pub(crate) fn ppnd16(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33_430.575_583_588_13) * r + 67265.770_927_008_7) * r
                + 45921.953_931_549_87)
                * r
                + 13_731.693_765_509_46)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_87)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chisq_sf(x: f64, df: u32) -> Result<Probability> {
    if df == 0 || !(x >= 0.0) {
        return Err(AuditError::Domain(format!(
            "chisq_sf requires x >= 0 and df >= 1, got x={x}, df={df}"
        )));
    }
    reg_incomplete_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// One-sided upper tail `P(T > t)` of Student's t.
pub fn student_t_sf(t: f64, df: f64) -> Result<Probability> {
    if !(df > 0.0) || t.is_nan() {
        return Err(AuditError::Domain(format!(
            "student_t_sf requires df > 0, got t={t}, df={df}"
        )));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { Probability::ZERO } else { Probability::ONE });
    }
    let x = df / (df + t * t);
    let half_tail = 0.5 * beta_reg(df / 2.0, 0.5, x);
    Ok(Probability::clamped(if t > 0.0 { half_tail } else { 1.0 - half_tail }))
}

/// Upper tail of Fisher's F with `(d1, d2)` degrees of freedom.
pub fn f_sf(x: f64, d1: u32, d2: u32) -> Result<Probability> {
    if d1 == 0 || d2 == 0 || !(x >= 0.0) {
        return Err(AuditError::Domain(format!(
            "f_sf requires x >= 0, d1 >= 1, d2 >= 1, got x={x}, d1={d1}, d2={d2}"
        )));
    }
    if x.is_infinite() {
        return Ok(Probability::ZERO);
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    Ok(Probability::clamped(beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))))
}

/// Kolmogorov limiting distribution tail `Q(x) = 2 Σ (-1)^{k-1} exp(-2k²x²)`.
///
/// Below `x = 1` the equivalent theta-function form is summed instead; the
/// alternating series converges too slowly there.
pub fn kolmogorov_sf(x: f64) -> Result<Probability> {
    if !(x > 0.0) {
        return Err(AuditError::Domain(format!("kolmogorov_sf requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(Probability::ZERO);
    }
    let q = if x < 1.0 {
        let w = PI * PI / (8.0 * x * x);
        let mut sum = 0.0;
        for k in 1..200 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * w).exp();
            sum += term;
            if term < 1e-16 * sum.max(TINY) {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / x * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..200 {
            let k = k as f64;
            let term = (-2.0 * k * k * x * x).exp();
            sum += sign * term;
            if term < 1e-16 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    Ok(Probability::clamped(q))
}

//! Shapiro-Wilk W test with Royston's (1995, AS R94) weights and p-value.

use std::f64::consts::PI;

use rand::seq::index;

use super::{check_finite, Method, TestResult};
use crate::error::{AuditError, Result};
use crate::numerics::{normal_sf, ppnd16, Probability};
use crate::rng::{child_rng, stream};

/// Largest sample the approximation is calibrated for.
pub const SHAPIRO_MAX_N: usize = 5000;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];
const SMALL: f64 = 1e-19;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Magnitudes of the upper-half coefficients `a_1..a_{n/2}` (`a_1` pairs the
/// extreme order statistics).
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let m: Vec<f64> = (1..=half).map(|i| -ppnd16((i as f64 - 0.375) / (an + 0.25))).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) + m[0] / ssumm2;

    let mut a = vec![0.0; half];
    let (first, fac) = if n > 5 {
        let a2 = m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for i in first..half {
        a[i] = m[i] / fac;
    }
    a
}

/// Shapiro-Wilk test for `3 <= n <= 5000`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<TestResult> {
    let n = sample.len();
    if n < 3 {
        return Err(AuditError::Invalid(format!(
            "Shapiro-Wilk needs at least 3 values, got {n}"
        )));
    }
    if n > SHAPIRO_MAX_N {
        return Err(AuditError::Invalid(format!(
            "Shapiro-Wilk is calibrated up to n = {SHAPIRO_MAX_N}, got {n}; subsample first"
        )));
    }
    check_finite(sample, "Shapiro-Wilk")?;

    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if !(range > 0.0) {
        return Err(AuditError::Degenerate("Shapiro-Wilk: all values are identical".into()));
    }
    let a = coefficients(n);
    let half = n / 2;

    // W as the squared correlation between the coefficient vector and the
    // sorted sample, keeping 1 - W accurate when W is close to 1.
    let mean = x.iter().sum::<f64>() / n as f64;
    let xs: Vec<f64> = x.iter().map(|v| (v - mean) / range).collect();
    let mut ssa = 0.0;
    let mut ssx = 0.0;
    let mut sax = 0.0;
    for (i, xi) in xs.iter().enumerate() {
        let ai = if i < half {
            -a[i]
        } else if i >= n - half {
            a[n - 1 - i]
        } else {
            0.0
        };
        ssa += ai * ai;
        ssx += xi * xi;
        sax += ai * xi;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = ((ssassx - sax) * (ssassx + sax) / (ssa * ssx)).max(0.0);
    let w = 1.0 - w1;

    let p = if n == 3 {
        // exact for n = 3
        let w = w.max(0.75);
        (6.0 / PI * (w.sqrt().asin() - PI / 3.0)).max(0.0)
    } else {
        let y = w1.ln();
        let an = n as f64;
        if n <= 11 {
            let gamma = poly(&G, an);
            if y >= gamma {
                SMALL
            } else {
                let y = -(gamma - y).ln();
                let m = poly(&C3, an);
                let s = poly(&C4, an).exp();
                normal_sf((y - m) / s).get()
            }
        } else {
            let ln_n = an.ln();
            let m = poly(&C5, ln_n);
            let s = poly(&C6, ln_n).exp();
            normal_sf((y - m) / s).get()
        }
    };

    Ok(TestResult {
        method: Method::ShapiroWilk,
        statistic: w,
        df: Vec::new(),
        p_value: Probability::clamped(p),
        n,
        subsampled: false,
    })
}

/// Shapiro-Wilk that first draws a seeded uniform subsample of
/// [`SHAPIRO_MAX_N`] values when the sample is larger than that.
pub fn shapiro_wilk_subsampled(sample: &[f64], seed: u64) -> Result<TestResult> {
    if sample.len() <= SHAPIRO_MAX_N {
        return shapiro_wilk(sample);
    }
    let mut rng = child_rng(seed, stream::SHAPIRO, sample.len() as u64);
    let mut idx = index::sample(&mut rng, sample.len(), SHAPIRO_MAX_N).into_vec();
    idx.sort_unstable();
    let sub: Vec<f64> = idx.into_iter().map(|i| sample[i]).collect();
    let mut res = shapiro_wilk(&sub)?;
    res.subsampled = true;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference values from scipy.stats.shapiro (same AS R94 algorithm).
    const N50: [f64; 50] = [
        1.0288568739519013,
        1.6419200406711503,
        1.1467195295966137,
        -0.9731795154745656,
        -1.3928000963768683,
        0.06719635507109722,
        0.8613509179404263,
        0.509186798845688,
        1.8102855742952833,
        0.7508434731539183,
        0.6397595539314624,
        -0.7313225212292476,
        -1.1077170351272676,
        1.4844055856837017,
        0.048912403069534136,
        0.8115201169815576,
        -1.3764228399745688,
        -0.43637073584081926,
        -1.2910916333479945,
        -0.7756786842437912,
        0.9030630777436289,
        -1.4805813250203528,
        -0.5340928297145819,
        0.16378857220098098,
        -0.6684703049155165,
        -0.25228975964635664,
        -0.22186154087661292,
        0.4181385697197018,
        -0.43125454836060817,
        0.27226068000682285,
        0.05681919548353432,
        0.42456925614196805,
        0.224943388070294,
        1.6576840551979304,
        -0.6636760694670103,
        1.1991871656162354,
        -0.4026124264424147,
        -0.9579261729918135,
        1.21119446936847,
        -0.43950590401335643,
        -0.3876358717280692,
        -1.3886836827516753,
        -2.0981967905109227,
        0.6343009414440183,
        -1.1652663772886236,
        0.7782729899588319,
        1.8481672953210666,
        -0.11479794585014706,
        -1.1266151030496365,
        0.3941991740101531,
    ];

    fn check(sample: &[f64], w: f64, p: f64) {
        let r = shapiro_wilk(sample).unwrap();
        assert!(
            (r.statistic - w).abs() <= 1e-4,
            "n={} W {} vs {w}",
            sample.len(),
            r.statistic
        );
        assert!(
            (r.p_value.get() - p).abs() <= 1e-3,
            "n={} p {} vs {p}",
            sample.len(),
            r.p_value.get()
        );
    }

    #[test]
    fn matches_reference_n50() {
        check(&N50, 0.9778314522015732, 0.4645754548442095);
    }

    #[test]
    fn matches_reference_small_n() {
        check(
            &[0.761728470454166, -0.26179037875573763, 0.01746449083513856],
            0.9356257553801033,
            0.5100733401563093,
        );
        check(
            &[
                1.335270728748762,
                1.2654519785916296,
                0.7099782281560677,
                -0.8664008771744728,
            ],
            0.8195221253010659,
            0.1420897131493598,
        );
        check(
            &[
                -0.053675571091266104,
                0.6029173174380699,
                -0.21186586854573583,
                -0.6100179289879054,
                -0.7653887202041866,
                -0.6320088192840502,
                -0.6716047883569987,
            ],
            0.8410778834089984,
            0.1016809954056257,
        );
        check(
            &[
                -0.4511113866062102,
                1.1456772338915662,
                -0.8006419813196771,
                0.886902071116937,
                0.4175846609939748,
                0.13974968489353012,
                -0.8274018550207518,
                -0.45669421292582424,
                1.9735553403293085,
                0.09906791154843822,
                0.5382077472406755,
            ],
            0.9486316029031279,
            0.6265179457707779,
        );
        check(
            &[
                0.6630316327280554,
                1.0556415438104036,
                -0.23751636353283292,
                -0.6101975720154739,
                -0.059613974391862584,
                -0.26081938409702304,
                0.7906767161489346,
                0.1896104030769387,
                0.2392704544306721,
                0.14500945046766703,
                1.2283676805724408,
                -0.5426271806747859,
            ],
            0.9492474527439714,
            0.6260096761345191,
        );
    }

    #[test]
    fn normal_quantiles_give_w_near_one() {
        let n = 100;
        let q: Vec<f64> = (1..=n).map(|i| ppnd16((i as f64 - 0.5) / n as f64)).collect();
        let r = shapiro_wilk(&q).unwrap();
        assert!(r.statistic > 0.99);
        assert!(r.p_value.get() > 0.9);
    }

    #[test]
    fn extreme_outlier_rejected() {
        let mut v: Vec<f64> = (0..99).map(|i| -0.01 + 0.02 * i as f64 / 98.0).collect();
        v.push(100.0);
        let r = shapiro_wilk(&v).unwrap();
        assert!(r.p_value.get() < 0.001);
        // scipy: W = 0.07549
        assert!((r.statistic - 0.07549477881077149).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(matches!(shapiro_wilk(&[3.0; 10]), Err(AuditError::Degenerate(_))));
        assert!(shapiro_wilk(&vec![0.0; 5001]).is_err());
    }

    #[test]
    fn subsamples_large_input() {
        let v: Vec<f64> = (0..12_000).map(|i| ((i * 7919) % 12_000) as f64).collect();
        let a = shapiro_wilk_subsampled(&v, 3).unwrap();
        let b = shapiro_wilk_subsampled(&v, 3).unwrap();
        assert!(a.subsampled);
        assert_eq!(a.n, SHAPIRO_MAX_N);
        assert_eq!(a, b);
        assert!(!shapiro_wilk_subsampled(&N50, 3).unwrap().subsampled);
    }

    proptest! {
        #[test]
        fn affine_invariant(scale in 0.01f64..100.0, shift in -1e3f64..1e3) {
            let base = shapiro_wilk(&N50).unwrap();
            let moved: Vec<f64> = N50.iter().map(|v| scale * v + shift).collect();
            let r = shapiro_wilk(&moved).unwrap();
            prop_assert!((r.statistic - base.statistic).abs() <= 1e-9);
            prop_assert!((r.p_value.get() - base.p_value.get()).abs() <= 1e-9);
        }
    }
}

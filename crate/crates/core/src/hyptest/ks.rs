use super::{check_finite, Method, TestResult};
use crate::error::{AuditError, Result};
use crate::numerics::{kolmogorov_sf, Probability};

/// Two-sample statistic `D = sup |F_a - F_b|`, exact via a merged scan of the
/// sorted samples. Only order comparisons are used, so any strictly increasing
/// transform of both samples leaves `D` bit-identical.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(AuditError::Invalid(
            "Kolmogorov-Smirnov needs two non-empty samples".into(),
        ));
    }
    check_finite(a, "Kolmogorov-Smirnov")?;
    check_finite(b, "Kolmogorov-Smirnov")?;
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let d = ks_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let p = if d > 0.0 {
        kolmogorov_sf((n * m / (n + m)).sqrt() * d)?
    } else {
        Probability::ONE
    };
    Ok(TestResult {
        method: Method::KolmogorovSmirnov,
        statistic: d,
        df: Vec::new(),
        p_value: p,
        n: a.len() + b.len(),
        subsampled: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let a = [3.0, 1.0, 2.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value.get(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(
            ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[1.5, 2.5, 3.5, 4.5]).unwrap(),
            0.25
        );
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn ties_across_samples() {
        // F_a jumps to 1 at 1; F_b is 1/2 there
        assert_eq!(ks_statistic(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn matches_reference() {
        // D from scipy.stats.ks_2samp; p from scipy.special.kolmogorov(sqrt(nm/(n+m)) * D)
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..55).map(|i| (i as f64 * 0.23).cos() * 0.8 + 0.2).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - KS_REF_D).abs() < 1e-12);
        assert!((r.p_value.get() - KS_REF_P).abs() < 1e-6);
    }

    const KS_REF_D: f64 = 0.25;
    const KS_REF_P: f64 = 0.1106084365718348;

    proptest! {
        #[test]
        fn monotone_transform_bit_identical(
            a in prop::collection::vec(-50f64..50.0, 1..40),
            b in prop::collection::vec(-50f64..50.0, 1..40),
        ) {
            let d = ks_statistic(&a, &b).unwrap();
            let f = |v: &f64| v.powi(3) + 2.0 * v;
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            prop_assert_eq!(ks_statistic(&ta, &tb).unwrap().to_bits(), d.to_bits());
        }

        #[test]
        fn statistic_matches_brute_force(
            a in prop::collection::vec(0i32..10, 1..20),
            b in prop::collection::vec(0i32..10, 1..20),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
            let brute = a.iter().chain(&b).map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs()).fold(0.0, f64::max);
            prop_assert!((ks_statistic(&a, &b).unwrap() - brute).abs() < 1e-15);
        }
    }
}

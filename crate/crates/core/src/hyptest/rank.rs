use crate::error::{AuditError, Result};

/// Ranks `1..=n`, ties receiving the mean of the ranks they span.
pub fn rank_midtie(values: &[f64]) -> Result<Vec<f64>> {
    Ok(rank_with_ties(values)?.0)
}

/// `Σ (t³ - t)` over tie groups of size `t`.
pub fn tie_correction_sum(values: &[f64]) -> Result<f64> {
    Ok(rank_with_ties(values)?.1)
}

pub(crate) fn rank_with_ties(values: &[f64]) -> Result<(Vec<f64>, f64)> {
    if values.is_empty() {
        return Err(AuditError::Invalid("cannot rank an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(AuditError::Invalid("cannot rank NaN".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut tie_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        // -0.0 and 0.0 compare equal here, unlike under total_cmp
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        let t = (end - start) as f64;
        tie_sum += t * t * t - t;
        start = end;
    }
    Ok((ranks, tie_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(rank_midtie(&[10.0, 20.0, 30.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank_midtie(&[1.0, 1.0]).unwrap(), vec![1.5, 1.5]);
        assert_eq!(rank_midtie(&[5.0, 1.0, 5.0]).unwrap(), vec![2.5, 1.0, 2.5]);
        assert_eq!(tie_correction_sum(&[5.0, 1.0, 5.0]).unwrap(), 6.0);
        assert!(rank_midtie(&[1.0, f64::NAN]).is_err());
        assert!(rank_midtie(&[]).is_err());
    }

    proptest! {
        #[test]
        fn rank_sum_is_triangular(v in prop::collection::vec(-5i32..5, 1..80)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let n = v.len() as f64;
            let r = rank_midtie(&v).unwrap();
            let sum: f64 = r.iter().sum();
            prop_assert!((sum - n * (n + 1.0) / 2.0).abs() < 1e-9);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] { prop_assert!(r[i] < r[j]); }
                    if v[i] == v[j] { prop_assert_eq!(r[i], r[j]); }
                }
            }
        }
    }
}

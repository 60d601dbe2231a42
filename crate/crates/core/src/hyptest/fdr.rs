use crate::error::{AuditError, Result};
use crate::numerics::Probability;

/// `H_m = Σ_{k=1..m} 1/k`.
pub fn harmonic_number(m: usize) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}

/// Benjamini-Yekutieli adjusted p-values, in input order.
///
/// With `p_(1) <= ... <= p_(m)` and `c(m) = H_m`:
/// `adj_(i) = min(1, min_{j >= i} p_(j) * m * c(m) / j)`.
pub fn benjamini_yekutieli<P: Copy + Into<f64>>(p_values: &[P]) -> Result<Vec<Probability>> {
    let m = p_values.len();
    if m == 0 {
        return Err(AuditError::Invalid(
            "Benjamini-Yekutieli needs at least one p-value".into(),
        ));
    }
    let p: Vec<f64> = p_values.iter().map(|&v| v.into()).collect();
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(AuditError::Domain(format!("p-value {bad} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));

    let factor = m as f64 * harmonic_number(m);
    let mut out = vec![Probability::ONE; m];
    let mut running = 1.0_f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        running = running.min(p[idx] * factor / (rank + 1) as f64);
        out[idx] = Probability::clamped(running);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_value_unchanged() {
        assert_eq!(benjamini_yekutieli(&[0.037]).unwrap()[0].get(), 0.037);
    }

    #[test]
    fn hand_computed_family() {
        // c(4) = 25/12 makes every p_(i) * 4 * c(4) / i equal to 1/12
        let adj = benjamini_yekutieli(&[0.01, 0.02, 0.03, 0.04]).unwrap();
        for a in adj {
            assert!((a.get() - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn order_preserved_and_capped() {
        let adj = benjamini_yekutieli(&[0.9, 0.001, 0.5]).unwrap();
        // c(3) = 11/6, m*c = 5.5
        assert!((adj[1].get() - 0.0055).abs() < 1e-15);
        assert_eq!(adj[0].get(), 1.0);
        assert_eq!(adj[2].get(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(benjamini_yekutieli::<f64>(&[]).is_err());
        assert!(benjamini_yekutieli(&[0.2, 1.5]).is_err());
        assert!(benjamini_yekutieli(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn dominates_input_and_monotone(p in prop::collection::vec(0f64..=1.0, 1..60)) {
            let adj = benjamini_yekutieli(&p).unwrap();
            for (a, raw) in adj.iter().zip(&p) {
                prop_assert!(a.get() >= *raw);
                prop_assert!(a.get() <= 1.0);
            }
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in idx.windows(2) {
                prop_assert!(adj[w[0]].get() <= adj[w[1]].get());
            }
        }
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{AuditError, Result};
use crate::hyptest::{benjamini_yekutieli, ks_two_sample, TestResult};
use crate::numerics::Probability;

/// Two sides of a comparison, as row indices into a score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub label: String,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Comparison {
    pub fn new(label: impl Into<String>, a: Vec<usize>, b: Vec<usize>) -> Self {
        Comparison {
            label: label.into(),
            a,
            b,
        }
    }
}

/// One (mode, comparison) cell of a shift table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    /// 1-based PCA mode.
    pub mode: usize,
    pub comparison: String,
    pub n_a: usize,
    pub n_b: usize,
    pub result: Option<TestResult>,
    pub adjusted_p: Option<Probability>,
    pub significant: bool,
    /// Why the test was not run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// KS tests of every comparison on every mode, BY-adjusted as one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTable {
    pub alpha: f64,
    pub modes: Vec<usize>,
    pub comparisons: Vec<String>,
    /// Number of tests actually run (the adjustment family).
    pub family_size: usize,
    /// Mode-major: all comparisons for the first mode, then the next mode.
    pub rows: Vec<ShiftRow>,
}

impl ShiftTable {
    pub fn cell(&self, mode: usize, comparison: &str) -> Option<&ShiftRow> {
        self.rows.iter().find(|r| r.mode == mode && r.comparison == comparison)
    }
}

/// Minimum observations per side for a comparison to be tested.
pub const MIN_SIDE: usize = 2;

/// Runs one two-sample KS test per (mode, comparison) on columns of
/// `scores` (column `m - 1` is mode `m`) and applies Benjamini-Yekutieli
/// across every test that ran. Comparisons with a side smaller than
/// [`MIN_SIDE`] are kept as skipped rows.
pub fn feature_shift_tests(
    scores: &FeatureMatrix,
    comparisons: &[Comparison],
    modes: &[usize],
    alpha: f64,
) -> Result<ShiftTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AuditError::Invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if let Some(&m) = modes.iter().find(|&&m| m == 0 || m > scores.cols()) {
        return Err(AuditError::Invalid(format!("mode {m} outside 1..={}", scores.cols())));
    }
    let cells: Vec<(usize, &Comparison)> = modes
        .iter()
        .flat_map(|&m| comparisons.iter().map(move |c| (m, c)))
        .collect();
    let mut rows: Vec<ShiftRow> = cells
        .par_iter()
        .map(|&(mode, c)| {
            let mut row = ShiftRow {
                mode,
                comparison: c.label.clone(),
                n_a: c.a.len(),
                n_b: c.b.len(),
                result: None,
                adjusted_p: None,
                significant: false,
                skipped: None,
            };
            if c.a.len() < MIN_SIDE || c.b.len() < MIN_SIDE {
                row.skipped = Some(format!(
                    "sides have {} and {} subjects, need at least {MIN_SIDE} each",
                    c.a.len(),
                    c.b.len()
                ));
                return Ok(row);
            }
            let col = mode - 1;
            let a: Vec<f64> = c.a.iter().map(|&r| scores.get(r, col)).collect();
            let b: Vec<f64> = c.b.iter().map(|&r| scores.get(r, col)).collect();
            row.result = Some(ks_two_sample(&a, &b)?);
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let tested: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].result.is_some()).collect();
    if !tested.is_empty() {
        let raw: Vec<Probability> = tested
            .iter()
            .map(|&i| rows[i].result.as_ref().unwrap().p_value)
            .collect();
        let adj = benjamini_yekutieli(&raw)?;
        for (&i, p) in tested.iter().zip(adj) {
            rows[i].adjusted_p = Some(p);
            rows[i].significant = p.get() < alpha;
        }
    }
    Ok(ShiftTable {
        alpha,
        modes: modes.to_vec(),
        comparisons: comparisons.iter().map(|c| c.label.clone()).collect(),
        family_size: tested.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn identical_sides_adjust_to_one() {
        let col: Vec<f64> = (0..20).map(|i| (i % 10) as f64).collect();
        let s = scores(vec![col.clone(), col]);
        let c = Comparison::new("A/B", (0..10).collect(), (10..20).collect());
        let t = feature_shift_tests(&s, &[c], &[1, 2], 0.05).unwrap();
        assert_eq!(t.rows.len(), 2);
        for r in &t.rows {
            assert_eq!(r.adjusted_p.unwrap().get(), 1.0);
            assert!(!r.significant);
        }
    }

    #[test]
    fn table_shape_and_skips() {
        let col: Vec<f64> = (0..40).map(|i| (i * 37 % 41) as f64).collect();
        let s = scores(vec![col.clone(), col.clone(), col.clone(), col]);
        let labels = [
            "Age 40-60/60-90",
            "Asian/White",
            "Black/Asian",
            "White/Black",
            "Female/Male",
        ];
        let mut comps: Vec<Comparison> = labels
            .iter()
            .map(|l| Comparison::new(*l, (0..20).collect(), (20..40).collect()))
            .collect();
        comps[2].b = vec![];
        let t = feature_shift_tests(&s, &comps, &[1, 2, 3, 4], 0.05).unwrap();
        assert_eq!(t.rows.len(), 20);
        assert_eq!(t.family_size, 16);
        assert_eq!(t.rows[5].mode, 2);
        assert_eq!(t.rows[5].comparison, "Age 40-60/60-90");
        let skipped = t.cell(3, "Black/Asian").unwrap();
        assert!(skipped.skipped.is_some() && skipped.result.is_none() && !skipped.significant);
        for r in t.rows.iter().filter(|r| r.result.is_some()) {
            assert!(r.adjusted_p.unwrap().get() >= r.result.as_ref().unwrap().p_value.get());
        }
    }

    #[test]
    fn shifted_mode_flagged() {
        let base: Vec<f64> = (0..200).map(|i| ((i * 7919) % 100) as f64 / 100.0).collect();
        let shifted: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, v)| if i < 100 { *v } else { v + 0.5 })
            .collect();
        let s = scores(vec![shifted, base]);
        let c = Comparison::new("A/B", (0..100).collect(), (100..200).collect());
        let t = feature_shift_tests(&s, &[c], &[1, 2], 0.05).unwrap();
        assert!(t.rows[0].significant);
        assert!(!t.rows[1].significant);
    }

    #[test]
    fn rejects_bad_modes() {
        let s = scores(vec![vec![0.0, 1.0, 2.0, 3.0]]);
        let c = Comparison::new("A/B", vec![0, 1], vec![2, 3]);
        assert!(feature_shift_tests(&s, std::slice::from_ref(&c), &[2], 0.05).is_err());
        assert!(feature_shift_tests(&s, &[c], &[1], 1.0).is_err());
    }
}

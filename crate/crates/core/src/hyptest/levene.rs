use serde::{Deserialize, Serialize};

use super::{check_finite, mean, median, Method, TestResult};
use crate::error::{AuditError, Result};
use crate::numerics::f_sf;

/// Group center the absolute deviations are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Classical Levene.
    #[default]
    Mean,
    /// Brown-Forsythe variant.
    Median,
}

/// Levene's test for equal variances across `groups`.
pub fn levene<G: AsRef<[f64]>>(groups: &[G], centering: Centering) -> Result<TestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(AuditError::Invalid(format!(
            "Levene's test needs at least 2 groups, got {k}"
        )));
    }
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(AuditError::Invalid(format!(
                "Levene's test: group {i} has {} values, need at least 2",
                g.len()
            )));
        }
        check_finite(g, "Levene's test")?;
        let center = match centering {
            Centering::Mean => mean(g),
            Centering::Median => median(g),
        };
        z.push(g.iter().map(|x| (x - center).abs()).collect());
    }
    let n_total: usize = z.iter().map(Vec::len).sum();
    let z_means: Vec<f64> = z.iter().map(|g| mean(g)).collect();
    let grand = z.iter().flatten().sum::<f64>() / n_total as f64;

    let between: f64 = z
        .iter()
        .zip(&z_means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let within: f64 = z
        .iter()
        .zip(&z_means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    if !(within > 0.0) {
        return Err(AuditError::Degenerate(
            "Levene's test: no within-group spread in absolute deviations".into(),
        ));
    }
    let d1 = (k - 1) as u32;
    let d2 = (n_total - k) as u32;
    let w = (d2 as f64 / d1 as f64) * between / within;
    Ok(TestResult {
        method: match centering {
            Centering::Mean => Method::LeveneMean,
            Centering::Median => Method::LeveneMedian,
        },
        statistic: w,
        df: vec![d1 as f64, d2 as f64],
        p_value: f_sf(w, d1, d2)?,
        n: n_total,
        subsampled: false,
    })
}

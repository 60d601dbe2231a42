//! Hypothesis tests used by the audit.
//!
//! All tests return a [`TestResult`] (or [`PairwiseResults`] for post-hoc
//! comparisons) tagged with the [`Method`] that produced it, so serialized
//! reports are self-describing.

mod fdr;
mod kruskal;
mod ks;
mod levene;
mod rank;
mod shapiro;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::numerics::Probability;

pub use fdr::{benjamini_yekutieli, harmonic_number};
pub use kruskal::{conover_iman, conover_iman_with_omnibus, kruskal_wallis, ConoverBasis};
pub use ks::{ks_statistic, ks_two_sample};
pub use levene::{levene, Centering};
pub use rank::{rank_midtie, tie_correction_sum};
pub use shapiro::{shapiro_wilk, shapiro_wilk_subsampled, SHAPIRO_MAX_N};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ShapiroWilk,
    LeveneMean,
    LeveneMedian,
    KruskalWallis,
    ConoverIman,
    KolmogorovSmirnov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    /// H for Kruskal-Wallis, W for Shapiro-Wilk and Levene, D for KS.
    pub statistic: f64,
    /// Degrees of freedom of the reference distribution, when it has any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub df: Vec<f64>,
    pub p_value: Probability,
    /// Number of observations the statistic was computed on.
    pub n: usize,
    /// Set when the input was subsampled before testing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub subsampled: bool,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value.get() < alpha
    }
}

/// One pairwise comparison from a [`PairwiseResults`] matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub p_value: Probability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_p: Option<Probability>,
}

/// Post-hoc pairwise comparison matrices.
///
/// `p_matrix` is symmetric with a unit diagonal; `t_matrix` is antisymmetric
/// (`t[i][j] = -t[j][i]`, zero diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResults {
    pub method: Method,
    pub basis: ConoverBasis,
    pub labels: Vec<String>,
    pub group_sizes: Vec<usize>,
    pub t_matrix: Vec<Vec<f64>>,
    pub p_matrix: Vec<Vec<Probability>>,
    /// Family-adjusted p-values, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_p_matrix: Option<Vec<Vec<Probability>>>,
    pub df: f64,
    /// Tie-corrected Kruskal-Wallis H the comparisons were scaled with.
    pub omnibus_h: f64,
    /// `N - 1 - H <= 0`: the t statistics are undefined and every
    /// off-diagonal p-value is reported as 0.
    pub degenerate: bool,
}

impl PairwiseResults {
    /// Upper-triangle entries in row-major order: (0,1), (0,2), ..., (1,2), ...
    pub fn pairs(&self) -> Vec<PairEntry> {
        let k = self.labels.len();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                out.push(PairEntry {
                    a: self.labels[i].clone(),
                    b: self.labels[j].clone(),
                    t: self.t_matrix[i][j],
                    p_value: self.p_matrix[i][j],
                    adjusted_p: self.adjusted_p_matrix.as_ref().map(|m| m[i][j]),
                });
            }
        }
        out
    }

    /// p-value for the pair labelled `(a, b)` in either order.
    pub fn p_value(&self, a: &str, b: &str) -> Option<Probability> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.p_matrix[i][j])
    }

    /// Adjusts the upper-triangle p-values as one Benjamini-Yekutieli family.
    pub fn adjust_family(&mut self) -> Result<()> {
        let k = self.labels.len();
        let raw: Vec<Probability> = self.pairs().iter().map(|e| e.p_value).collect();
        let adj = benjamini_yekutieli(&raw)?;
        let mut m = vec![vec![Probability::ONE; k]; k];
        let mut it = adj.into_iter();
        for i in 0..k {
            for j in i + 1..k {
                let v = it.next().expect("one adjusted value per pair");
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        self.adjusted_p_matrix = Some(m);
        Ok(())
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AuditError::Invalid(format!("{what}: non-finite value in sample")));
    }
    Ok(())
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median of an unsorted sample (copying).
pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

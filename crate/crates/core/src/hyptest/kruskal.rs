//! Kruskal-Wallis omnibus test and the Conover-Iman post-hoc comparisons.

use serde::{Deserialize, Serialize};

use super::rank::rank_with_ties;
use super::{check_finite, Method, PairwiseResults, TestResult};
use crate::error::{AuditError, Result};
use crate::numerics::{chisq_sf, student_t_sf, Probability};

/// Where the Conover-Iman scaling (`H`, `k`) comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConoverBasis {
    /// Ranks and H recomputed on exactly the compared groups.
    #[default]
    Groups,
    /// H and k taken from an omnibus test over a finer grouping (e.g. the six
    /// race × sex subgroups) of the same observations.
    Omnibus,
}

pub(crate) struct RankedGroups {
    pub n_total: usize,
    pub sizes: Vec<usize>,
    pub rank_sums: Vec<f64>,
    pub sum_sq_ranks: f64,
    pub h_corrected: f64,
}

fn rank_groups<G: AsRef<[f64]>>(groups: &[G]) -> Result<RankedGroups> {
    let k = groups.len();
    if k < 2 {
        return Err(AuditError::Invalid(format!(
            "Kruskal-Wallis needs at least 2 groups, got {k}"
        )));
    }
    let mut pooled = Vec::new();
    let mut sizes = Vec::with_capacity(k);
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.is_empty() {
            return Err(AuditError::Invalid(format!("Kruskal-Wallis: group {i} is empty")));
        }
        check_finite(g, "Kruskal-Wallis")?;
        pooled.extend_from_slice(g);
        sizes.push(g.len());
    }
    let n = pooled.len();
    if n < 3 {
        return Err(AuditError::Invalid(format!(
            "Kruskal-Wallis needs at least 3 observations, got {n}"
        )));
    }
    let (ranks, tie_sum) = rank_with_ties(&pooled)?;
    let nf = n as f64;
    let correction = 1.0 - tie_sum / (nf * nf * nf - nf);
    if !(correction > 0.0) {
        return Err(AuditError::Degenerate(
            "Kruskal-Wallis: all pooled values are tied".into(),
        ));
    }
    let mut rank_sums = Vec::with_capacity(k);
    let mut offset = 0;
    for &len in &sizes {
        rank_sums.push(ranks[offset..offset + len].iter().sum::<f64>());
        offset += len;
    }
    let mut h = 12.0 / (nf * (nf + 1.0))
        * rank_sums
            .iter()
            .zip(&sizes)
            .map(|(r, &len)| r * r / len as f64)
            .sum::<f64>()
        - 3.0 * (nf + 1.0);
    h = (h / correction).max(0.0);
    Ok(RankedGroups {
        n_total: n,
        sizes,
        rank_sums,
        sum_sq_ranks: ranks.iter().map(|r| r * r).sum(),
        h_corrected: h,
    })
}

/// Kruskal-Wallis H test, tie-corrected, with a chi-square p-value.
pub fn kruskal_wallis<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult> {
    let rg = rank_groups(groups)?;
    let df = (groups.len() - 1) as u32;
    Ok(TestResult {
        method: Method::KruskalWallis,
        statistic: rg.h_corrected,
        df: vec![df as f64],
        p_value: chisq_sf(rg.h_corrected, df)?,
        n: rg.n_total,
        subsampled: false,
    })
}

/// Conover-Iman pairwise comparisons on the pooled ranks of `groups`.
///
/// p-values are two-sided and unadjusted.
pub fn conover_iman<G: AsRef<[f64]>>(groups: &[G], labels: &[String]) -> Result<PairwiseResults> {
    let rg = rank_groups(groups)?;
    let k = groups.len();
    conover_from_ranks(&rg, labels, rg.h_corrected, k, ConoverBasis::Groups)
}

/// Conover-Iman comparisons scaled by an omnibus `H` over `omnibus_k` finer
/// groups of the same observations. Pooled ranks are the same either way;
/// only the `(N - 1 - H) / (N - k)` factor and the t degrees of freedom change.
pub fn conover_iman_with_omnibus<G: AsRef<[f64]>>(
    groups: &[G],
    labels: &[String],
    omnibus_h: f64,
    omnibus_k: usize,
) -> Result<PairwiseResults> {
    let rg = rank_groups(groups)?;
    if omnibus_k < 2 || omnibus_k >= rg.n_total || !(omnibus_h >= 0.0) {
        return Err(AuditError::Invalid(format!(
            "invalid omnibus scaling H={omnibus_h}, k={omnibus_k}"
        )));
    }
    conover_from_ranks(&rg, labels, omnibus_h, omnibus_k, ConoverBasis::Omnibus)
}

fn conover_from_ranks(
    rg: &RankedGroups,
    labels: &[String],
    h: f64,
    k: usize,
    basis: ConoverBasis,
) -> Result<PairwiseResults> {
    let g = rg.sizes.len();
    if labels.len() != g {
        return Err(AuditError::Invalid(format!("{} labels for {g} groups", labels.len())));
    }
    let nf = rg.n_total as f64;
    let df = nf - k as f64;
    if !(df > 0.0) {
        return Err(AuditError::Invalid(
            "Conover-Iman needs more observations than groups".into(),
        ));
    }
    let s2 = (rg.sum_sq_ranks - nf * (nf + 1.0).powi(2) / 4.0) / (nf - 1.0);
    let scale = (nf - 1.0 - h) / df;
    let degenerate = !(scale > 0.0);

    let mean_ranks: Vec<f64> = rg.rank_sums.iter().zip(&rg.sizes).map(|(r, &n)| r / n as f64).collect();
    let mut t = vec![vec![0.0; g]; g];
    let mut p = vec![vec![Probability::ONE; g]; g];
    for i in 0..g {
        for j in i + 1..g {
            let diff = mean_ranks[i] - mean_ranks[j];
            let (tij, pij) = if degenerate {
                let tij = if diff == 0.0 { 0.0 } else { f64::INFINITY.copysign(diff) };
                (tij, Probability::ZERO)
            } else {
                let se = (s2 * scale * (1.0 / rg.sizes[i] as f64 + 1.0 / rg.sizes[j] as f64)).sqrt();
                let tij = diff / se;
                let pij = Probability::clamped(2.0 * student_t_sf(tij.abs(), df)?.get());
                (tij, pij)
            };
            t[i][j] = tij;
            t[j][i] = -tij;
            p[i][j] = pij;
            p[j][i] = pij;
        }
    }
    Ok(PairwiseResults {
        method: Method::ConoverIman,
        basis,
        labels: labels.to_vec(),
        group_sizes: rg.sizes.clone(),
        t_matrix: t,
        p_matrix: p,
        adjusted_p_matrix: None,
        df,
        omnibus_h: h,
        degenerate,
    })
}

//! Balanced subgroup sampling and repeated-sampling MAE summaries.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{SubgroupKey, SubgroupPartition};
use crate::error::{AuditError, Result};
use crate::rng::{child_rng, derive_seed, stream};

/// Ids drawn from one subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSample {
    pub key: SubgroupKey,
    pub ids: Vec<String>,
}

/// Equal-size draw without replacement from each of the six subgroups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedSample {
    pub sample_size: usize,
    pub seed: u64,
    /// One entry per subgroup in canonical order.
    pub groups: Vec<SubgroupSample>,
    #[serde(skip)]
    indices: [Vec<usize>; 6],
}

impl BalancedSample {
    /// Record indices (into the partition) drawn for `key`, ascending.
    pub fn members(&self, key: SubgroupKey) -> &[usize] {
        &self.indices[key.index()]
    }

    pub fn total(&self) -> usize {
        self.indices.iter().map(Vec::len).sum()
    }

    pub fn absolute_errors(&self, partition: &SubgroupPartition, key: SubgroupKey) -> Vec<f64> {
        self.members(key)
            .iter()
            .map(|&i| partition.record(i).absolute_error())
            .collect()
    }
}

/// Draws `n` subjects per subgroup, uniformly without replacement.
///
/// Subgroup `g` uses its own stream derived from `(seed, g)`, so the draw for
/// one subgroup does not depend on the sizes of the others.
pub fn balanced_sample(partition: &SubgroupPartition, n: usize, seed: u64) -> Result<BalancedSample> {
    if n == 0 {
        return Err(AuditError::Invalid("balanced sample size must be at least 1".into()));
    }
    if let Some((key, size)) = partition.sizes().into_iter().find(|&(_, size)| size < n) {
        return Err(AuditError::Invalid(format!(
            "subgroup {key} has {size} subjects, fewer than the sample size {n}"
        )));
    }
    let indices = draw_groups(SubgroupKey::ALL.map(|k| partition.members(k)), n, seed);
    let groups = SubgroupKey::ALL
        .into_iter()
        .map(|key| SubgroupSample {
            key,
            ids: indices[key.index()]
                .iter()
                .map(|&i| partition.record(i).id.clone())
                .collect(),
        })
        .collect();
    Ok(BalancedSample {
        sample_size: n,
        seed,
        groups,
        indices,
    })
}

/// Draws `n` entries from each of the six member lists (each must hold at
/// least `n`); results are sorted ascending.
pub(crate) fn draw_groups(members: [&[usize]; 6], n: usize, seed: u64) -> [Vec<usize>; 6] {
    let mut out: [Vec<usize>; 6] = Default::default();
    for (g, list) in members.iter().enumerate() {
        let mut rng = child_rng(seed, stream::BALANCED, g as u64);
        let mut picked: Vec<usize> = index::sample(&mut rng, list.len(), n)
            .into_iter()
            .map(|i| list[i])
            .collect();
        picked.sort_unstable();
        out[g] = picked;
    }
    out
}

/// Seed of balanced draw `repeat` under `seed`.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::REPEAT), repeat as u64)
}

/// Per-subgroup row of a [`RepeatedMaeSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupMae {
    pub key: SubgroupKey,
    /// Mean over repeats of the subgroup MAE.
    pub mean_mae: f64,
    /// Sample SD over repeats of the subgroup MAE.
    pub sd_mae: f64,
    /// `mean_mae - pooled_mae`, in years.
    pub relative_diff: f64,
    /// Sample SD over repeats of the per-repeat difference.
    pub relative_diff_sd: f64,
    /// `relative_diff` as a percentage of `pooled_mae`; absent when the
    /// pooled MAE is zero.
    pub relative_diff_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedMaeSummary {
    pub sample_size: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Canonical subgroup order.
    pub subgroups: Vec<SubgroupMae>,
    /// MAE over all `6 n` sampled subjects of a repeat, averaged over repeats.
    pub pooled_mae: f64,
    pub pooled_mae_sd: f64,
    /// `per_repeat[r][g]`: MAE of subgroup `g` in repeat `r`.
    pub per_repeat: Vec<[f64; 6]>,
}

impl RepeatedMaeSummary {
    pub fn get(&self, key: SubgroupKey) -> &SubgroupMae {
        &self.subgroups[key.index()]
    }
}

/// Mean and sample SD (divisor `n - 1`), summed in slice order.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Repeats [`balanced_sample`] `repeats` times and summarizes subgroup MAEs.
///
/// Repeat `r` draws with [`repeat_seed`]`(seed, r)`. Repeats run in parallel;
/// per-repeat results are collected in repeat order before aggregation.
pub fn repeated_subgroup_mae(
    partition: &SubgroupPartition,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<RepeatedMaeSummary> {
    if repeats < 2 {
        return Err(AuditError::Invalid(format!(
            "repeated sampling needs at least 2 repeats for an SD, got {repeats}"
        )));
    }
    let per_repeat: Vec<([f64; 6], f64)> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let sample = balanced_sample(partition, n, repeat_seed(seed, r))?;
            let mut maes = [0.0; 6];
            let mut pooled = 0.0;
            for key in SubgroupKey::ALL {
                let errs = sample.absolute_errors(partition, key);
                let sum: f64 = errs.iter().sum();
                maes[key.index()] = sum / n as f64;
                pooled += sum;
            }
            Ok((maes, pooled / (6 * n) as f64))
        })
        .collect::<Result<_>>()?;

    let pooled: Vec<f64> = per_repeat.iter().map(|(_, p)| *p).collect();
    let (pooled_mae, pooled_mae_sd) = mean_sd(&pooled);
    let subgroups = SubgroupKey::ALL
        .into_iter()
        .map(|key| {
            let g = key.index();
            let maes: Vec<f64> = per_repeat.iter().map(|(m, _)| m[g]).collect();
            let diffs: Vec<f64> = per_repeat.iter().map(|(m, p)| m[g] - p).collect();
            let (mean_mae, sd_mae) = mean_sd(&maes);
            let (_, relative_diff_sd) = mean_sd(&diffs);
            let relative_diff = mean_mae - pooled_mae;
            SubgroupMae {
                key,
                mean_mae,
                sd_mae,
                relative_diff,
                relative_diff_sd,
                relative_diff_percent: (pooled_mae > 0.0).then(|| 100.0 * relative_diff / pooled_mae),
            }
        })
        .collect();
    Ok(RepeatedMaeSummary {
        sample_size: n,
        repeats,
        seed,
        subgroups,
        pooled_mae,
        pooled_mae_sd,
        per_repeat: per_repeat.into_iter().map(|(m, _)| m).collect(),
    })
}

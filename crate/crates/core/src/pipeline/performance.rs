use serde::{Deserialize, Serialize};

use super::AuditConfig;
use crate::cohort::{Race, Sex, SubgroupKey, SubgroupPartition};
use crate::error::{AuditError, Result};
use crate::hyptest::{
    conover_iman, conover_iman_with_omnibus, kruskal_wallis, levene, shapiro_wilk_subsampled, ConoverBasis,
    PairwiseResults, TestResult,
};
use crate::numerics::Probability;
use crate::resample::{balanced_sample, mean_sd, repeat_seed, repeated_subgroup_mae, RepeatedMaeSummary};
use crate::rng::{derive_seed, stream};

/// Outcome of the ANOVA assumption checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    /// Normality and equal variances both hold; a parametric model would
    /// be admissible. The rank-based battery is still what is reported.
    ParametricAdmissible,
    NormalityRejected,
    HomogeneityRejected,
    BothRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTrace {
    pub decision: GateDecision,
    pub alpha: f64,
    /// Subgroups whose Shapiro-Wilk p-value fell below `alpha`.
    pub normality_rejected: Vec<SubgroupKey>,
    pub levene_p: Probability,
    pub explanation: String,
}

impl GateTrace {
    fn new(alpha: f64, shapiro: &[SubgroupTest], levene: &TestResult) -> Self {
        let normality_rejected: Vec<SubgroupKey> = shapiro
            .iter()
            .filter(|s| s.result.rejects(alpha))
            .map(|s| s.key)
            .collect();
        let homogeneity = levene.rejects(alpha);
        let decision = match (!normality_rejected.is_empty(), homogeneity) {
            (false, false) => GateDecision::ParametricAdmissible,
            (true, false) => GateDecision::NormalityRejected,
            (false, true) => GateDecision::HomogeneityRejected,
            (true, true) => GateDecision::BothRejected,
        };
        let normality = if normality_rejected.is_empty() {
            format!(
                "Shapiro-Wilk did not reject normality in any of the {} subgroups",
                shapiro.len()
            )
        } else {
            let names: Vec<String> = normality_rejected.iter().map(|k| k.to_string()).collect();
            format!(
                "Shapiro-Wilk rejected normality in {} of {} subgroups ({})",
                names.len(),
                shapiro.len(),
                names.join(", ")
            )
        };
        let variance = if homogeneity {
            format!(
                "Levene rejected equal variances (p = {})",
                super::fmt_p(levene.p_value.get())
            )
        } else {
            format!(
                "Levene did not reject equal variances (p = {})",
                super::fmt_p(levene.p_value.get())
            )
        };
        let outcome = match decision {
            GateDecision::ParametricAdmissible => {
                "a parametric analysis would be admissible; the Kruskal-Wallis battery is reported"
            }
            _ => "ANOVA assumptions fail, so Kruskal-Wallis with Conover-Iman post-hoc tests is used",
        };
        GateTrace {
            decision,
            alpha,
            normality_rejected,
            levene_p: levene.p_value,
            explanation: format!("{normality}; {variance}; {outcome}."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupTest {
    pub key: SubgroupKey,
    pub result: TestResult,
}

/// Size and absolute-error summary of one subgroup within a pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupErrors {
    pub key: SubgroupKey,
    pub n: usize,
    pub mae: f64,
    /// Sample SD of the absolute errors.
    pub sd: f64,
}

/// One run of the test battery on a set of per-subgroup absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformancePass {
    pub subgroups: Vec<SubgroupErrors>,
    pub shapiro: Vec<SubgroupTest>,
    pub levene: TestResult,
    pub kruskal: TestResult,
    /// Pooled into White, Black, Asian.
    pub posthoc_race: PairwiseResults,
    /// Pooled into Female, Male.
    pub posthoc_sex: PairwiseResults,
    pub gate: GateTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedPass {
    pub sample_size: usize,
    /// Seed of the draw the battery ran on (repeat 0 of the MAE repeats).
    pub sample_seed: u64,
    pub sampled_ids: Vec<Vec<String>>,
    pub battery: PerformancePass,
    pub repeated: RepeatedMaeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceArm {
    pub full: Option<PerformancePass>,
    pub balanced: Option<BalancedPass>,
}

/// Runs the battery on per-subgroup absolute errors in canonical order.
pub fn run_battery(errors: &[Vec<f64>; 6], config: &AuditConfig, seed: u64) -> Result<PerformancePass> {
    let subgroups = SubgroupKey::ALL
        .iter()
        .map(|&key| {
            let e = &errors[key.index()];
            if e.is_empty() {
                return Err(AuditError::Invalid(format!("subgroup {key} is empty")));
            }
            let (mae, sd) = mean_sd(e);
            Ok(SubgroupErrors {
                key,
                n: e.len(),
                mae,
                sd,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let shapiro = SubgroupKey::ALL
        .iter()
        .map(|&key| {
            let result = shapiro_wilk_subsampled(&errors[key.index()], derive_seed(seed, key.index() as u64))
                .map_err(|e| e.context(format!("Shapiro-Wilk on subgroup {key}")))?;
            Ok(SubgroupTest { key, result })
        })
        .collect::<Result<Vec<_>>>()?;
    let levene = levene(errors, config.levene_centering)?;
    let kruskal = kruskal_wallis(errors)?;

    let by_race: Vec<Vec<f64>> = Race::ALL
        .iter()
        .map(|&r| {
            Sex::ALL
                .iter()
                .flat_map(|&s| errors[SubgroupKey::new(r, s).index()].iter().copied())
                .collect()
        })
        .collect();
    let by_sex: Vec<Vec<f64>> = Sex::ALL
        .iter()
        .map(|&s| {
            Race::ALL
                .iter()
                .flat_map(|&r| errors[SubgroupKey::new(r, s).index()].iter().copied())
                .collect()
        })
        .collect();
    let race_labels: Vec<String> = Race::ALL.iter().map(|r| r.to_string()).collect();
    let sex_labels: Vec<String> = Sex::ALL.iter().map(|s| s.to_string()).collect();
    let factor = |groups: &[Vec<f64>], labels: &[String], name: &str| -> Result<PairwiseResults> {
        let mut res = match config.conover_basis {
            ConoverBasis::Groups => conover_iman(groups, labels),
            ConoverBasis::Omnibus => conover_iman_with_omnibus(groups, labels, kruskal.statistic, 6),
        }
        .map_err(|e| e.context(format!("Conover-Iman on the {name} factor")))?;
        if config.posthoc_adjust {
            res.adjust_family()?;
        }
        Ok(res)
    };
    let posthoc_race = factor(&by_race, &race_labels, "race")?;
    let posthoc_sex = factor(&by_sex, &sex_labels, "sex")?;
    let gate = GateTrace::new(config.alpha, &shapiro, &levene);
    Ok(PerformancePass {
        subgroups,
        shapiro,
        levene,
        kruskal,
        posthoc_race,
        posthoc_sex,
        gate,
    })
}

/// Balanced sample size for `partition` under `config`.
pub fn resolve_sample_size(partition: &SubgroupPartition, config: &AuditConfig) -> usize {
    config.sample_size.unwrap_or_else(|| partition.smallest().1)
}

/// Full-cohort pass and balanced pass (battery on one draw plus repeated
/// MAE summary), as enabled in `config`.
pub fn run_performance_audit(partition: &SubgroupPartition, config: &AuditConfig) -> Result<PerformanceArm> {
    config.validate()?;
    let full_seed = derive_seed(config.seed, stream::SHAPIRO);
    let full = || -> Result<Option<PerformancePass>> {
        if !config.run_full {
            return Ok(None);
        }
        let errors = SubgroupKey::ALL.map(|k| partition.absolute_errors(k));
        run_battery(&errors, config, full_seed)
            .map(Some)
            .map_err(|e| e.context("full-cohort pass"))
    };
    let balanced = || -> Result<Option<BalancedPass>> {
        if !config.run_balanced {
            return Ok(None);
        }
        let n = resolve_sample_size(partition, config);
        let sample_seed = repeat_seed(config.seed, 0);
        let sample = balanced_sample(partition, n, sample_seed)?;
        let errors = SubgroupKey::ALL.map(|k| sample.absolute_errors(partition, k));
        let battery = run_battery(&errors, config, derive_seed(sample_seed, stream::SHAPIRO))
            .map_err(|e| e.context("balanced pass"))?;
        let repeated = repeated_subgroup_mae(partition, n, config.repeats, config.seed)?;
        Ok(Some(BalancedPass {
            sample_size: n,
            sample_seed,
            sampled_ids: sample.groups.iter().map(|g| g.ids.clone()).collect(),
            battery,
            repeated,
        }))
    };
    let (full, balanced) = rayon::join(full, balanced);
    Ok(PerformanceArm {
        full: full?,
        balanced: balanced?,
    })
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{partition, SubgroupKey};
use crate::error::{AuditError, Result};
use crate::featspace::{feature_shift_tests, pca_fit, pca_project, Comparison};
use crate::hyptest::{kruskal_wallis, levene, Centering};
use crate::rng::{derive_seed, stream};
use crate::synth::{generate_cohort, CohortSpec, ErrorModel};

use super::features::age_comparison_label;

pub const MIN_TRIALS: usize = 100;

/// Null Monte Carlo settings: six equal subgroups drawn from one law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub trials: usize,
    pub group_size: usize,
    pub alpha: f64,
    pub seed: u64,
    pub levene_centering: Centering,
    pub modes: usize,
    pub feature_dim: usize,
    pub error_sd: f64,
    /// Two-sided coverage of the reported binomial intervals.
    pub confidence: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            trials: 1000,
            group_size: 126,
            alpha: 0.05,
            seed: 0,
            levene_centering: Centering::Median,
            modes: 4,
            feature_dim: 16,
            error_sd: 4.0,
            confidence: 0.99,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(AuditError::Invalid(format!(
                "calibration needs at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AuditError::Invalid(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(AuditError::Invalid(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.group_size < 3 {
            return Err(AuditError::Invalid("group_size must be at least 3".into()));
        }
        if self.modes == 0 || self.modes > self.feature_dim {
            return Err(AuditError::Invalid(format!(
                "modes must be in 1..={}, got {}",
                self.feature_dim, self.modes
            )));
        }
        if !(self.error_sd > 0.0) {
            return Err(AuditError::Invalid("error_sd must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub test: String,
    pub rejections: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `alpha` lies inside the interval.
    pub covers_alpha: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub config: CalibrationConfig,
    pub rates: Vec<RejectionRate>,
}

/// Wilson score interval for `k` successes in `n` trials at normal
/// quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Seed of null trial `t`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::TRIAL), t as u64)
}

/// Null cohort of trial `t`: equal groups, zero bias, no age loading and no
/// subgroup offsets in the features.
pub fn null_spec(config: &CalibrationConfig, t: usize) -> CohortSpec {
    let mut spec = CohortSpec::uniform(config.group_size, trial_seed(config.seed, t));
    for s in &mut spec.subgroups {
        s.error = ErrorModel {
            bias: 0.0,
            sd: config.error_sd,
        };
    }
    spec.features.dim = config.feature_dim;
    spec.features.loading = 0.0;
    spec
}

fn trial(config: &CalibrationConfig, t: usize) -> Result<(Vec<String>, Vec<bool>)> {
    let (records, features) = generate_cohort(&null_spec(config, t))?;
    let part = partition(records)?;
    let errors = SubgroupKey::ALL.map(|k| part.absolute_errors(k));
    let mut names = vec!["kruskal_wallis".to_string(), "levene".to_string()];
    let mut rejected = vec![
        kruskal_wallis(&errors)?.rejects(config.alpha),
        levene(&errors, config.levene_centering)?.rejects(config.alpha),
    ];

    // records and feature rows share indices in generated cohorts
    let model = pca_fit(&features, config.modes)?;
    let scores = pca_project(&model, &features)?;
    let audit = super::AuditConfig::default();
    let brackets = &audit.test_brackets;
    let (mut young, mut old) = (Vec::new(), Vec::new());
    for i in part.included() {
        match brackets.bracket_of(part.record(i).age) {
            Some(0) => young.push(i),
            Some(_) => old.push(i),
            None => {}
        }
    }
    let rows = |keys: &[usize]| -> Vec<usize> {
        keys.iter()
            .flat_map(|&g| part.members(SubgroupKey::ALL[g]).iter().copied())
            .collect()
    };
    let comps = vec![
        Comparison::new(age_comparison_label(brackets), young, old),
        Comparison::new("Asian/White", rows(&[4, 5]), rows(&[0, 1])),
        Comparison::new("Black/Asian", rows(&[2, 3]), rows(&[4, 5])),
        Comparison::new("White/Black", rows(&[0, 1]), rows(&[2, 3])),
        Comparison::new("Female/Male", rows(&[0, 2, 4]), rows(&[1, 3, 5])),
    ];
    let modes: Vec<usize> = (1..=config.modes).collect();
    let table = feature_shift_tests(&scores, &comps, &modes, config.alpha)?;
    for row in &table.rows {
        names.push(format!("ks mode {} {}", row.mode, row.comparison));
        rejected.push(row.result.as_ref().is_some_and(|r| r.rejects(config.alpha)));
    }
    Ok((names, rejected))
}

/// Rejection rates of every test over `trials` null cohorts, with Wilson
/// intervals at `confidence`. KS rates are per test, before adjustment.
pub fn calibrate(config: &CalibrationConfig) -> Result<CalibrationSummary> {
    config.validate()?;
    let outcomes: Vec<(Vec<String>, Vec<bool>)> = (0..config.trials)
        .into_par_iter()
        .map(|t| trial(config, t))
        .collect::<Result<_>>()?;
    let names = outcomes[0].0.clone();
    let z = crate::numerics::normal_quantile(0.5 + config.confidence / 2.0)?;
    let rates = names
        .into_iter()
        .enumerate()
        .map(|(j, test)| {
            let rejections = outcomes.iter().filter(|(_, r)| r[j]).count();
            let (ci_low, ci_high) = wilson_interval(rejections, config.trials, z);
            RejectionRate {
                test,
                rejections,
                trials: config.trials,
                rate: rejections as f64 / config.trials as f64,
                ci_low,
                ci_high,
                covers_alpha: ci_low <= config.alpha && config.alpha <= ci_high,
            }
        })
        .collect();
    Ok(CalibrationSummary {
        config: config.clone(),
        rates,
    })
}

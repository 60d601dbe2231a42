//! End-to-end audit: performance arm, feature arm, figure data and the
//! assembled report.

mod calibrate;
mod config;
mod features;
mod performance;
mod report;
mod summaries;

pub use calibrate::{
    calibrate, null_spec, trial_seed, wilson_interval, CalibrationConfig, CalibrationSummary, RejectionRate, MIN_TRIALS,
};
pub use config::AuditConfig;
pub use features::{
    age_comparison_label, run_feature_audit, Attribute, BalancedShift, FeatureArm, KdePanel, LabeledCurve, PcaSummary,
};
pub use performance::{
    resolve_sample_size, run_battery, run_performance_audit, BalancedPass, GateDecision, GateTrace, PerformanceArm,
    PerformancePass, SubgroupErrors, SubgroupTest,
};
pub use report::{
    assemble_report, fmt_p, Arm, AuditReport, Counts, ExclusionCount, GroupCount, InputDigest, Provenance, Seeds,
    REPORT_FORMAT,
};
pub use summaries::{
    age_distribution, bin_counts, figure_data, freedman_diaconis_edges, AgeDistribution, AgePanel, ErrorHistograms,
    ErrorPanel, FigureData, HistSeries,
};

use crate::cohort::SubgroupPartition;
use crate::error::{AuditError, Result};
use crate::featspace::FeatureMatrix;
use crate::resample::{balanced_sample, repeat_seed};

/// Which arms to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmSelection {
    pub performance: bool,
    pub features: bool,
}

impl ArmSelection {
    pub const ALL: ArmSelection = ArmSelection {
        performance: true,
        features: true,
    };
    pub const PERFORMANCE: ArmSelection = ArmSelection {
        performance: true,
        features: false,
    };
    pub const FEATURES: ArmSelection = ArmSelection {
        performance: false,
        features: true,
    };
}

/// Runs the selected arms concurrently and assembles the report.
pub fn run_audit(
    partition: &SubgroupPartition,
    features: Option<&FeatureMatrix>,
    config: &AuditConfig,
    selection: ArmSelection,
    inputs: Vec<InputDigest>,
    seed_generated: bool,
) -> Result<AuditReport> {
    config.validate()?;
    if !selection.performance && !selection.features {
        return Err(AuditError::Invalid("no audit arm selected".into()));
    }
    let features = match (selection.features, features) {
        (true, None) => return Err(AuditError::Invalid("the feature audit needs a feature matrix".into())),
        (true, Some(f)) => Some(f),
        (false, _) => None,
    };
    let (performance, feature_arm) = rayon::join(
        || {
            selection
                .performance
                .then(|| run_performance_audit(partition, config))
                .transpose()
        },
        || {
            features
                .map(|f| run_feature_audit(partition, f, config).map_err(|e| e.context("feature audit")))
                .transpose()
        },
    );
    let performance = performance?;
    let feature_arm = feature_arm?;

    let figures = match &performance {
        Some(arm) => {
            let sample = match &arm.balanced {
                Some(b) => Some(balanced_sample(partition, b.sample_size, repeat_seed(config.seed, 0))?),
                None => None,
            };
            let shapiro_p = arm.full.as_ref().map(|full| {
                let mut p = [crate::numerics::Probability::ONE; 6];
                for s in &full.shapiro {
                    p[s.key.index()] = s.result.p_value;
                }
                p
            });
            figure_data(partition, sample.as_ref(), shapiro_p, config)
        }
        None => FigureData {
            age_full: age_distribution(
                partition,
                crate::cohort::SubgroupKey::ALL.map(|k| partition.members(k)),
                config,
            ),
            ..FigureData::default()
        },
    };
    let provenance = Provenance::new(partition, config, inputs, seed_generated);
    assemble_report(performance, feature_arm, figures, provenance, "not requested")
}

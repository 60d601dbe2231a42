use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::featspace::{AgeBracketing, Bandwidth};
use crate::hyptest::{Centering, ConoverBasis};

/// Settings for both audit arms. Every field has a default, so a JSON config
/// only needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Significance level for every decision in the report.
    pub alpha: f64,
    /// Per-subgroup balanced sample size; `None` uses the smallest subgroup.
    pub sample_size: Option<usize>,
    /// Number of balanced draws behind the MAE error bars.
    pub repeats: usize,
    /// PCA modes analysed.
    pub modes: usize,
    pub seed: u64,
    pub levene_centering: Centering,
    /// Where Conover-Iman takes `H` and `k` from for the factor comparisons.
    pub conover_basis: ConoverBasis,
    /// Benjamini-Yekutieli across each post-hoc family.
    pub posthoc_adjust: bool,
    pub bandwidth: Bandwidth,
    pub kde_grid_points: usize,
    /// Number of equal-width age brackets for density plots.
    pub viz_brackets: usize,
    /// Explicit density-plot bracket edges, overriding `viz_brackets`.
    pub viz_edges: Option<AgeBracketing>,
    /// Two-bracket split used by the age shift test.
    pub test_brackets: AgeBracketing,
    /// Per-subgroup size of the equal-size feature sample; `None` uses the
    /// smallest subgroup among subjects with features.
    pub feature_sample_size: Option<usize>,
    pub run_full: bool,
    pub run_balanced: bool,
    /// Equal-size variant of the feature shift table.
    pub feature_balanced: bool,
    pub kde: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            alpha: 0.05,
            sample_size: None,
            repeats: 10,
            modes: 4,
            seed: 0,
            levene_centering: Centering::Median,
            conover_basis: ConoverBasis::Groups,
            posthoc_adjust: false,
            bandwidth: Bandwidth::Scott,
            kde_grid_points: 128,
            viz_brackets: 5,
            viz_edges: None,
            test_brackets: AgeBracketing::two_bracket(),
            feature_sample_size: None,
            run_full: true,
            run_balanced: true,
            feature_balanced: true,
            kde: true,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AuditError::Invalid(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if self.repeats < 2 {
            return bad(format!("repeats must be at least 2, got {}", self.repeats));
        }
        if self.modes == 0 {
            return bad("modes must be at least 1".into());
        }
        if self.sample_size == Some(0) || self.feature_sample_size == Some(0) {
            return bad("sample sizes must be at least 1".into());
        }
        if self.kde_grid_points < 2 {
            return bad(format!(
                "kde_grid_points must be at least 2, got {}",
                self.kde_grid_points
            ));
        }
        if self.viz_brackets == 0 {
            return bad("viz_brackets must be at least 1".into());
        }
        if self.test_brackets.len() != 2 {
            return bad(format!(
                "test_brackets must define exactly 2 brackets, got {}",
                self.test_brackets.len()
            ));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("fixed bandwidth must be positive, got {h}"));
            }
        }
        if !self.run_full && !self.run_balanced {
            return bad("at least one of run_full and run_balanced must be enabled".into());
        }
        Ok(())
    }
}

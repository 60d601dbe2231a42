use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AuditConfig;
use crate::cohort::{Race, Sex, SubgroupKey, SubgroupPartition};
use crate::error::{AuditError, Result};
use crate::featspace::{
    feature_shift_tests, kde, pca_fit_rows, pca_project_rows, AgeBracketing, Comparison, FeatureMatrix, KdeCurve,
    PcaModel, ShiftTable, MIN_SIDE,
};
use crate::resample::draw_groups;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Age,
    Race,
    Sex,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Age, Attribute::Race, Attribute::Sex];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Age => "Age",
            Attribute::Race => "Race",
            Attribute::Sex => "Sex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCurve {
    pub label: String,
    pub curve: KdeCurve,
}

/// Density curves of one mode's scores, split by one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdePanel {
    /// 1-based PCA mode.
    pub mode: usize,
    pub attribute: Attribute,
    pub curves: Vec<LabeledCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub n_samples: usize,
    pub dim: usize,
    pub modes: usize,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub total_variance: f64,
}

impl From<&PcaModel> for PcaSummary {
    fn from(m: &PcaModel) -> Self {
        PcaSummary {
            n_samples: m.n_samples,
            dim: m.dim(),
            modes: m.modes(),
            explained_variance: m.explained_variance.clone(),
            explained_variance_ratio: m.explained_variance_ratio(),
            total_variance: m.total_variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedShift {
    pub sample_size: usize,
    pub seed: u64,
    pub table: ShiftTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureArm {
    pub pca: PcaSummary,
    /// Included subjects with a feature row.
    pub subjects: usize,
    /// Included subjects without one; left out of this arm.
    pub missing_features: usize,
    /// Subjects outside the two test brackets, left out of the age comparison.
    pub age_out_of_range: usize,
    pub viz_brackets: Option<AgeBracketing>,
    pub kde: Vec<KdePanel>,
    /// Every subject with features.
    pub all_subjects: ShiftTable,
    /// Equal-size sample per subgroup.
    pub balanced: Option<BalancedShift>,
    /// Why the equal-size variant was not run, when it was enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balanced_skipped: Option<String>,
}

/// Score-row positions per subgroup plus the age of every score row.
struct Scored {
    groups: [Vec<usize>; 6],
    ages: Vec<f64>,
}

fn race_rows(groups: &[Vec<usize>; 6], race: Race) -> Vec<usize> {
    Sex::ALL
        .iter()
        .flat_map(|&s| groups[SubgroupKey::new(race, s).index()].iter().copied())
        .collect()
}

fn sex_rows(groups: &[Vec<usize>; 6], sex: Sex) -> Vec<usize> {
    Race::ALL
        .iter()
        .flat_map(|&r| groups[SubgroupKey::new(r, sex).index()].iter().copied())
        .collect()
}

/// Label of the age comparison for a two-bracket split, e.g. `Age 40-60/60-90`.
pub fn age_comparison_label(b: &AgeBracketing) -> String {
    let e = b.edges();
    format!("Age {}-{}/{}-{}", e[0], e[1], e[1], e[2])
}

/// The five comparisons in table order, over the given score rows.
fn comparisons(scored: &Scored, groups: &[Vec<usize>; 6], brackets: &AgeBracketing) -> (Vec<Comparison>, usize) {
    let mut young = Vec::new();
    let mut old = Vec::new();
    let mut out_of_range = 0;
    for &pos in groups.iter().flatten() {
        match brackets.bracket_of(scored.ages[pos]) {
            Some(0) => young.push(pos),
            Some(_) => old.push(pos),
            None => out_of_range += 1,
        }
    }
    young.sort_unstable();
    old.sort_unstable();
    let white = race_rows(groups, Race::White);
    let black = race_rows(groups, Race::Black);
    let asian = race_rows(groups, Race::Asian);
    let comps = vec![
        Comparison::new(age_comparison_label(brackets), young, old),
        Comparison::new("Asian/White", asian.clone(), white.clone()),
        Comparison::new("Black/Asian", black.clone(), asian),
        Comparison::new("White/Black", white, black),
        Comparison::new(
            "Female/Male",
            sex_rows(groups, Sex::Female),
            sex_rows(groups, Sex::Male),
        ),
    ];
    (comps, out_of_range)
}

/// Fits PCA on every included subject with features, then runs density
/// curves and the shift-test table (all subjects and equal-size sample).
pub fn run_feature_audit(
    partition: &SubgroupPartition,
    features: &FeatureMatrix,
    config: &AuditConfig,
) -> Result<FeatureArm> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut groups: [Vec<usize>; 6] = Default::default();
    let mut ages = Vec::new();
    for key in SubgroupKey::ALL {
        for r in partition.group(key) {
            if let Some(row) = r.feature_row.filter(|&row| row < features.rows()) {
                groups[key.index()].push(rows.len());
                rows.push(row);
                ages.push(r.age);
            }
        }
    }
    let missing = partition.included_count() - rows.len();
    if rows.len() < 2 {
        return Err(AuditError::Invalid(format!(
            "only {} included subjects have features; the feature audit needs at least 2",
            rows.len()
        )));
    }
    let model = pca_fit_rows(features, &rows, config.modes).map_err(|e| e.context("PCA"))?;
    let scores = pca_project_rows(&model, features, &rows)?;
    let scored = Scored { groups, ages };
    let modes: Vec<usize> = (1..=config.modes).collect();

    let (comps, age_out_of_range) = comparisons(&scored, &scored.groups, &config.test_brackets);
    let all_subjects = feature_shift_tests(&scores, &comps, &modes, config.alpha)?;

    let (balanced, balanced_skipped) = if config.feature_balanced {
        let (small_key, small) = SubgroupKey::ALL
            .iter()
            .map(|&k| (k, scored.groups[k.index()].len()))
            .min_by_key(|&(_, n)| n)
            .expect("six groups");
        let n = config.feature_sample_size.unwrap_or(small);
        if n < MIN_SIDE {
            (
                None,
                Some(format!("subgroup {small_key} has {small} subjects with features")),
            )
        } else if let Some(key) = SubgroupKey::ALL
            .into_iter()
            .find(|k| scored.groups[k.index()].len() < n)
        {
            return Err(AuditError::Invalid(format!(
                "subgroup {key} has {} subjects with features, fewer than the feature sample size {n}",
                scored.groups[key.index()].len()
            )));
        } else {
            let seed = derive_seed(config.seed, stream::FEATURES);
            let drawn = draw_groups(scored.groups.each_ref().map(Vec::as_slice), n, seed);
            let (comps, _) = comparisons(&scored, &drawn, &config.test_brackets);
            let table = feature_shift_tests(&scores, &comps, &modes, config.alpha)?;
            (
                Some(BalancedShift {
                    sample_size: n,
                    seed,
                    table,
                }),
                None,
            )
        }
    } else {
        (None, None)
    };

    let viz_brackets = match &config.viz_edges {
        Some(b) => Some(b.clone()),
        None => {
            let (lo, hi) = scored
                .ages
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            AgeBracketing::equal_width(lo, hi, config.viz_brackets).ok()
        }
    };
    let kde = if config.kde {
        kde_panels(&scores, &scored, viz_brackets.as_ref(), &modes, config)
    } else {
        Vec::new()
    };

    Ok(FeatureArm {
        pca: PcaSummary::from(&model),
        subjects: rows.len(),
        missing_features: missing,
        age_out_of_range,
        viz_brackets,
        kde,
        all_subjects,
        balanced,
        balanced_skipped,
    })
}

/// Curves for every (mode, attribute). Groups with fewer than 2 values or
/// no spread get no curve.
fn kde_panels(
    scores: &FeatureMatrix,
    scored: &Scored,
    brackets: Option<&AgeBracketing>,
    modes: &[usize],
    config: &AuditConfig,
) -> Vec<KdePanel> {
    let mut splits: Vec<(Attribute, Vec<(String, Vec<usize>)>)> = Vec::new();
    if let Some(b) = brackets {
        let mut by_bracket = vec![Vec::new(); b.len()];
        for &pos in scored.groups.iter().flatten() {
            if let Some(i) = b.bracket_of(scored.ages[pos]) {
                by_bracket[i].push(pos);
            }
        }
        splits.push((Attribute::Age, b.labels().into_iter().zip(by_bracket).collect()));
    }
    splits.push((
        Attribute::Race,
        Race::ALL
            .iter()
            .map(|&r| (r.to_string(), race_rows(&scored.groups, r)))
            .collect(),
    ));
    splits.push((
        Attribute::Sex,
        Sex::ALL
            .iter()
            .map(|&s| (s.to_string(), sex_rows(&scored.groups, s)))
            .collect(),
    ));
    let cells: Vec<(usize, usize)> = splits
        .iter()
        .enumerate()
        .flat_map(|(a, _)| modes.iter().map(move |&m| (a, m)))
        .collect();
    cells
        .par_iter()
        .map(|&(a, mode)| {
            let (attribute, groups) = &splits[a];
            let curves = groups
                .iter()
                .filter(|(_, pos)| pos.len() >= 2)
                .filter_map(|(label, pos)| {
                    let values: Vec<f64> = pos.iter().map(|&p| scores.get(p, mode - 1)).collect();
                    kde(&values, config.kde_grid_points, config.bandwidth)
                        .ok()
                        .map(|curve| LabeledCurve {
                            label: label.clone(),
                            curve,
                        })
                })
                .collect();
            KdePanel {
                mode,
                attribute: *attribute,
                curves,
            }
        })
        .collect()
}

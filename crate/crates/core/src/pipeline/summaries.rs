//! Binned data behind the figures. Renderers draw these as given.

use serde::{Deserialize, Serialize};

use super::AuditConfig;
use crate::cohort::{Race, SubgroupKey, SubgroupPartition};
use crate::featspace::{kde, quantile_sorted, Bandwidth, KdeCurve};
use crate::numerics::Probability;
use crate::resample::BalancedSample;

const MAX_BINS: usize = 200;

/// Shared bin edges from the Freedman-Diaconis rule on the pooled values.
///
/// Falls back to `ceil(sqrt(n))` bins when the IQR is zero, and to a single
/// unit-wide bin when every value is equal.
pub fn freedman_diaconis_edges(values: &[f64]) -> Vec<f64> {
    assert!(!values.is_empty(), "binning needs at least one value");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![lo - 0.5, lo + 0.5];
    }
    let n = sorted.len() as f64;
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let bins = if iqr > 0.0 {
        (range / (2.0 * iqr * n.powf(-1.0 / 3.0))).ceil() as usize
    } else {
        n.sqrt().ceil() as usize
    }
    .clamp(1, MAX_BINS);
    let width = range / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

/// Counts per bin; the last bin is closed on the right.
pub fn bin_counts(edges: &[f64], values: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        let i = edges[1..].partition_point(|&e| e <= v).min(bins - 1);
        if v >= edges[0] && v <= edges[bins] {
            counts[i] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistSeries {
    pub label: String,
    pub n: usize,
    pub counts: Vec<usize>,
    /// Density curve over the same values, when one could be estimated.
    pub density: Option<KdeCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgePanel {
    pub title: String,
    pub series: Vec<HistSeries>,
}

/// Age histograms: an all-subjects panel, then one panel per race present,
/// split by sex. All panels share `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeDistribution {
    pub edges: Vec<f64>,
    /// Edges of the test brackets, drawn as guides.
    pub bracket_edges: Vec<f64>,
    pub panels: Vec<AgePanel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPanel {
    pub key: SubgroupKey,
    pub n: usize,
    pub counts: Vec<usize>,
    pub shapiro_p: Option<Probability>,
}

/// Absolute-error histograms per subgroup on shared edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHistograms {
    pub edges: Vec<f64>,
    pub panels: Vec<ErrorPanel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FigureData {
    pub age_full: Option<AgeDistribution>,
    pub age_balanced: Option<AgeDistribution>,
    pub error_histograms: Option<ErrorHistograms>,
}

fn series(label: String, values: &[f64], edges: &[f64], config: &AuditConfig) -> HistSeries {
    let density = if values.len() >= 2 {
        let rule = match config.bandwidth {
            Bandwidth::Fixed(_) => Bandwidth::Scott,
            other => other,
        };
        kde(values, config.kde_grid_points, rule).ok()
    } else {
        None
    };
    HistSeries {
        label,
        n: values.len(),
        counts: bin_counts(edges, values),
        density,
    }
}

/// Age distribution over `members[g]` (record indices per subgroup).
pub fn age_distribution(
    partition: &SubgroupPartition,
    members: [&[usize]; 6],
    config: &AuditConfig,
) -> Option<AgeDistribution> {
    let ages_of =
        |key: SubgroupKey| -> Vec<f64> { members[key.index()].iter().map(|&i| partition.record(i).age).collect() };
    let all: Vec<f64> = SubgroupKey::ALL.iter().flat_map(|&k| ages_of(k)).collect();
    if all.is_empty() {
        return None;
    }
    let edges = freedman_diaconis_edges(&all);
    let mut panels = vec![AgePanel {
        title: "All subjects".into(),
        series: vec![series("All".into(), &all, &edges, config)],
    }];
    for race in Race::ALL {
        let keys: Vec<SubgroupKey> = SubgroupKey::ALL.into_iter().filter(|k| k.race == race).collect();
        if keys.iter().all(|&k| members[k.index()].is_empty()) {
            continue;
        }
        panels.push(AgePanel {
            title: race.to_string(),
            series: keys
                .iter()
                .map(|&k| series(k.label(), &ages_of(k), &edges, config))
                .collect(),
        });
    }
    Some(AgeDistribution {
        edges,
        bracket_edges: config.test_brackets.edges().to_vec(),
        panels,
    })
}

/// Figure data for a cohort, its balanced sample, and the full-pass
/// Shapiro-Wilk p-values (canonical order) when available.
pub fn figure_data(
    partition: &SubgroupPartition,
    sample: Option<&BalancedSample>,
    shapiro_p: Option<[Probability; 6]>,
    config: &AuditConfig,
) -> FigureData {
    let age_full = age_distribution(partition, SubgroupKey::ALL.map(|k| partition.members(k)), config);
    let age_balanced = sample.and_then(|s| age_distribution(partition, SubgroupKey::ALL.map(|k| s.members(k)), config));
    let pooled: Vec<f64> = partition
        .included()
        .map(|i| partition.record(i).absolute_error())
        .collect();
    let error_histograms = (!pooled.is_empty()).then(|| {
        let edges = freedman_diaconis_edges(&pooled);
        ErrorHistograms {
            panels: SubgroupKey::ALL
                .iter()
                .map(|&key| {
                    let e = partition.absolute_errors(key);
                    ErrorPanel {
                        key,
                        n: e.len(),
                        counts: bin_counts(&edges, &e),
                        shapiro_p: shapiro_p.map(|p| p[key.index()]),
                    }
                })
                .collect(),
            edges,
        }
    });
    FigureData {
        age_full,
        age_balanced,
        error_histograms,
    }
}

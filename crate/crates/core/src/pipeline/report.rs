use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AuditConfig, FeatureArm, FigureData, PerformanceArm, PerformancePass};
use crate::cohort::{ExclusionReason, SubgroupKey, SubgroupPartition};
use crate::error::{AuditError, Result};
use crate::featspace::ShiftTable;
use crate::hyptest::PairwiseResults;
use crate::resample::repeat_seed;
use crate::rng::{derive_seed, stream};

pub const REPORT_FORMAT: u32 = 1;

/// An audit arm that either ran or was deliberately not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Arm<T> {
    Present(T),
    Absent { reason: String },
}

impl<T> Arm<T> {
    pub fn from_option(value: Option<T>, absent_reason: &str) -> Self {
        match value {
            Some(v) => Arm::Present(v),
            None => Arm::Absent {
                reason: absent_reason.to_string(),
            },
        }
    }

    pub fn present(&self) -> Option<&T> {
        match self {
            Arm::Present(t) => Some(t),
            Arm::Absent { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl InputDigest {
    pub fn of_file(role: &str, path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = file.read(&mut buf).map_err(|e| AuditError::io(path, e))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(InputDigest {
            role: role.into(),
            path: path.display().to_string(),
            sha256,
            bytes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCount {
    pub key: SubgroupKey,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCount {
    pub reason: ExclusionReason,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub records: usize,
    pub included: usize,
    pub excluded: usize,
    pub subgroups: Vec<GroupCount>,
    pub exclusions: Vec<ExclusionCount>,
}

impl Counts {
    pub fn of(partition: &SubgroupPartition) -> Self {
        Counts {
            records: partition.records().len(),
            included: partition.included_count(),
            excluded: partition.excluded().len(),
            subgroups: partition
                .sizes()
                .iter()
                .map(|&(key, n)| GroupCount { key, n })
                .collect(),
            exclusions: partition
                .exclusion_counts()
                .into_iter()
                .map(|(reason, count)| ExclusionCount { reason, count })
                .collect(),
        }
    }
}

/// Every seed used, derived from the root seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    /// The root seed was generated because none was given.
    pub generated: bool,
    pub repeats: Vec<u64>,
    pub feature_sample: u64,
    pub shapiro_full: u64,
}

impl Seeds {
    pub fn of(config: &AuditConfig, generated: bool) -> Self {
        Seeds {
            root: config.seed,
            generated,
            repeats: (0..config.repeats).map(|r| repeat_seed(config.seed, r)).collect(),
            feature_sample: derive_seed(config.seed, stream::FEATURES),
            shapiro_full: derive_seed(config.seed, stream::SHAPIRO),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: AuditConfig,
    pub seeds: Seeds,
    pub inputs: Vec<InputDigest>,
    pub counts: Counts,
}

impl Provenance {
    pub fn new(
        partition: &SubgroupPartition,
        config: &AuditConfig,
        inputs: Vec<InputDigest>,
        seed_generated: bool,
    ) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            seeds: Seeds::of(config, seed_generated),
            inputs,
            counts: Counts::of(partition),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub format: u32,
    pub provenance: Provenance,
    pub performance: Arm<PerformanceArm>,
    pub features: Arm<FeatureArm>,
    pub figures: FigureData,
}

/// Combines the arms that ran into a report; a missing arm is recorded as
/// absent with `absent_reason`.
pub fn assemble_report(
    performance: Option<PerformanceArm>,
    features: Option<FeatureArm>,
    figures: FigureData,
    provenance: Provenance,
    absent_reason: &str,
) -> Result<AuditReport> {
    if performance.is_none() && features.is_none() {
        return Err(AuditError::Invalid("a report needs at least one audit arm".into()));
    }
    Ok(AuditReport {
        format: REPORT_FORMAT,
        provenance,
        performance: Arm::from_option(performance, absent_reason),
        features: Arm::from_option(features, absent_reason),
        figures,
    })
}

impl AuditReport {
    /// Pretty-printed JSON with object keys sorted at every level and floats
    /// in shortest round-trip form, ending in a newline.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AuditError::Data(format!("report JSON: {e}")))
    }

    /// Human-readable summary.
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let p = &self.provenance;
        let alpha = p.config.alpha;
        let _ = writeln!(md, "# Subgroup bias audit\n");
        let _ = writeln!(
            md,
            "{} {}, seed {}{}.\n",
            p.tool,
            p.version,
            p.seeds.root,
            if p.seeds.generated { " (generated)" } else { "" }
        );
        let _ = writeln!(
            md,
            "{} records: {} included, {} excluded.\n",
            p.counts.records, p.counts.included, p.counts.excluded
        );
        md.push_str("| Subgroup | n |\n|---|---:|\n");
        for g in &p.counts.subgroups {
            let _ = writeln!(md, "| {} | {} |", g.key, g.n);
        }
        if !p.counts.exclusions.is_empty() {
            md.push_str("\n| Exclusion reason | count |\n|---|---:|\n");
            for e in &p.counts.exclusions {
                let _ = writeln!(md, "| {} | {} |", e.reason, e.count);
            }
        }
        if !p.inputs.is_empty() {
            md.push('\n');
        }
        for input in &p.inputs {
            let _ = writeln!(md, "- {} `{}` sha256 `{}`", input.role, input.path, input.sha256);
        }

        md.push_str("\n## Performance\n\n");
        match &self.performance {
            Arm::Absent { reason } => {
                let _ = writeln!(md, "Not run: {reason}.");
            }
            Arm::Present(arm) => {
                if let Some(full) = &arm.full {
                    md.push_str("### All subjects\n\n");
                    pass_markdown(&mut md, full, alpha);
                }
                if let Some(b) = &arm.balanced {
                    let _ = writeln!(md, "### Balanced sample (n = {} per subgroup)\n", b.sample_size);
                    pass_markdown(&mut md, &b.battery, alpha);
                    let _ = writeln!(
                        md,
                        "MAE over {} balanced draws (pooled {:.3} ± {:.3} years):\n",
                        b.repeated.repeats, b.repeated.pooled_mae, b.repeated.pooled_mae_sd
                    );
                    md.push_str("| Subgroup | MAE | SD | Relative difference | SD |\n|---|---:|---:|---:|---:|\n");
                    for g in &b.repeated.subgroups {
                        let _ = writeln!(
                            md,
                            "| {} | {:.3} | {:.3} | {:+.3} | {:.3} |",
                            g.key, g.mean_mae, g.sd_mae, g.relative_diff, g.relative_diff_sd
                        );
                    }
                    md.push('\n');
                }
            }
        }

        md.push_str("## Features\n\n");
        match &self.features {
            Arm::Absent { reason } => {
                let _ = writeln!(md, "Not run: {reason}.");
            }
            Arm::Present(f) => {
                let _ = writeln!(
                    md,
                    "PCA on {} subjects × {} features ({} without features).\n",
                    f.subjects, f.pca.dim, f.missing_features
                );
                md.push_str("| Mode | Explained variance | Ratio |\n|---:|---:|---:|\n");
                for (i, (v, r)) in f
                    .pca
                    .explained_variance
                    .iter()
                    .zip(&f.pca.explained_variance_ratio)
                    .enumerate()
                {
                    let _ = writeln!(md, "| {} | {:.4} | {:.4} |", i + 1, v, r);
                }
                md.push_str("\n### KS tests, all subjects (BY-adjusted p)\n\n");
                shift_markdown(&mut md, &f.all_subjects);
                if let Some(b) = &f.balanced {
                    let _ = writeln!(
                        md,
                        "\n### KS tests, equal-size sample (n = {} per subgroup, BY-adjusted p)\n",
                        b.sample_size
                    );
                    shift_markdown(&mut md, &b.table);
                } else if let Some(why) = &f.balanced_skipped {
                    let _ = writeln!(md, "\nEqual-size variant skipped: {why}.");
                }
            }
        }
        md
    }
}

pub fn fmt_p(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn pass_markdown(md: &mut String, pass: &PerformancePass, alpha: f64) {
    md.push_str("| Test | Statistic | p |\n|---|---:|---:|\n");
    for s in &pass.shapiro {
        let _ = writeln!(
            md,
            "| Shapiro-Wilk {}{} | {:.4} | {} |",
            s.key,
            if s.result.subsampled { " (subsampled)" } else { "" },
            s.result.statistic,
            fmt_p(s.result.p_value.get())
        );
    }
    let _ = writeln!(
        md,
        "| Levene | {:.4} | {} |",
        pass.levene.statistic,
        fmt_p(pass.levene.p_value.get())
    );
    let _ = writeln!(
        md,
        "| Kruskal-Wallis | {:.4} | {} |",
        pass.kruskal.statistic,
        fmt_p(pass.kruskal.p_value.get())
    );
    let _ = writeln!(md, "\nGate ({alpha}): {}\n", pass.gate.explanation);
    md.push_str("| Conover-Iman pair | t | p | adjusted p |\n|---|---:|---:|---:|\n");
    for ph in [&pass.posthoc_race, &pass.posthoc_sex] {
        posthoc_rows(md, ph);
    }
    md.push('\n');
}

fn posthoc_rows(md: &mut String, ph: &PairwiseResults) {
    for e in ph.pairs() {
        let adj = e.adjusted_p.map_or("-".to_string(), |p| fmt_p(p.get()));
        let _ = writeln!(
            md,
            "| {} vs {} | {:.4} | {} | {} |",
            e.a,
            e.b,
            e.t,
            fmt_p(e.p_value.get()),
            adj
        );
    }
    if ph.degenerate {
        md.push_str("| (degenerate: N - 1 - H <= 0) | | | |\n");
    }
}

fn shift_markdown(md: &mut String, t: &ShiftTable) {
    let _ = write!(md, "| Mode |");
    for c in &t.comparisons {
        let _ = write!(md, " {c} |");
    }
    md.push_str("\n|---:|");
    md.push_str(&"---:|".repeat(t.comparisons.len()));
    md.push('\n');
    for &m in &t.modes {
        let _ = write!(md, "| {m} |");
        for c in &t.comparisons {
            let cell = t.cell(m, c).expect("every cell present");
            match cell.adjusted_p {
                Some(p) => {
                    let _ = write!(md, " {}{} |", fmt_p(p.get()), if cell.significant { " *" } else { "" });
                }
                None => md.push_str(" skipped |"),
            }
        }
        md.push('\n');
    }
    let _ = writeln!(md, "\n`*` adjusted p < {}.", t.alpha);
}

//! Synthetic cohorts with controllable subgroup sizes, prediction bias and
//! feature shifts.
//!
//! Every random draw is an inverse-CDF transform of a uniform taken from a
//! ChaCha8 stream, so a cohort depends only on the spec (seed included), not
//! on platform or thread count.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Race, Sex, SubgroupKey, SubjectRecord};
use crate::error::{AuditError, Result};
use crate::featspace::FeatureMatrix;
use crate::numerics::{normal_cdf, ppnd16};
use crate::rng::{child_rng, derive_seed, stream, AuditRng};

/// Truncated normal age law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeModel {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for AgeModel {
    fn default() -> Self {
        AgeModel {
            mean: 64.0,
            sd: 7.7,
            min: 44.0,
            max: 82.0,
        }
    }
}

/// `predicted_age = age + N(bias, sd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub bias: f64,
    pub sd: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel { bias: 0.0, sd: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    pub race: Race,
    pub sex: Sex,
    pub count: usize,
    #[serde(default)]
    pub age: AgeModel,
    #[serde(default)]
    pub error: ErrorModel,
    /// Added to every feature row of the subgroup; empty means zero.
    #[serde(default)]
    pub feature_offset: Vec<f64>,
}

impl SubgroupSpec {
    pub fn new(key: SubgroupKey, count: usize) -> Self {
        SubgroupSpec {
            race: key.race,
            sex: key.sex,
            count,
            age: AgeModel::default(),
            error: ErrorModel::default(),
            feature_offset: Vec::new(),
        }
    }

    pub fn key(&self) -> SubgroupKey {
        SubgroupKey::new(self.race, self.sex)
    }
}

/// Subjects with race "Other", generated so exclusion paths get exercised.
/// Sex alternates Female, Male, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtherSpec {
    pub count: usize,
    #[serde(default)]
    pub age: AgeModel,
    #[serde(default)]
    pub error: ErrorModel,
}

/// Feature rows: `loading · u · (age - age_mid) / age_halfspan + offset_g + N(0, noise_sd² I)`
/// with `u` a seeded unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub dim: usize,
    pub loading: f64,
    pub noise_sd: f64,
    pub age_mid: f64,
    pub age_halfspan: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            dim: 64,
            loading: 3.0,
            noise_sd: 1.0,
            age_mid: 63.0,
            age_halfspan: 19.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub seed: u64,
    pub subgroups: Vec<SubgroupSpec>,
    pub other: OtherSpec,
    pub features: FeatureSpec,
}

/// Default subgroup sizes, canonical order (WF, WM, BF, BM, AF, AM).
pub const DEFAULT_COUNTS: [usize; 6] = [19_560, 21_857, 126, 160, 272, 304];
pub const DEFAULT_OTHER: usize = 507;

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            seed: 0,
            subgroups: SubgroupKey::ALL
                .iter()
                .zip(DEFAULT_COUNTS)
                .map(|(&k, c)| SubgroupSpec::new(k, c))
                .collect(),
            other: OtherSpec {
                count: DEFAULT_OTHER,
                age: AgeModel::default(),
                error: ErrorModel::default(),
            },
            features: FeatureSpec::default(),
        }
    }
}

impl CohortSpec {
    /// Six subgroups of `count` subjects with identical default laws and no
    /// "Other" subjects.
    pub fn uniform(count: usize, seed: u64) -> Self {
        CohortSpec {
            seed,
            subgroups: SubgroupKey::ALL.iter().map(|&k| SubgroupSpec::new(k, count)).collect(),
            other: OtherSpec {
                count: 0,
                age: AgeModel::default(),
                error: ErrorModel::default(),
            },
            features: FeatureSpec::default(),
        }
    }

    pub fn subgroup_mut(&mut self, key: SubgroupKey) -> Option<&mut SubgroupSpec> {
        self.subgroups.iter_mut().find(|s| s.key() == key)
    }

    pub fn total(&self) -> usize {
        self.subgroups.iter().map(|s| s.count).sum::<usize>() + self.other.count
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for s in &self.subgroups {
            let key = s.key();
            if seen.contains(&key) {
                return Err(AuditError::Invalid(format!("subgroup {key} listed twice")));
            }
            seen.push(key);
            check_laws(&key.to_string(), &s.age, &s.error)?;
            if !s.feature_offset.is_empty() && s.feature_offset.len() != self.features.dim {
                return Err(AuditError::Invalid(format!(
                    "subgroup {key}: feature offset has {} entries, dimension is {}",
                    s.feature_offset.len(),
                    self.features.dim
                )));
            }
            if s.feature_offset.iter().any(|v| !v.is_finite()) {
                return Err(AuditError::Invalid(format!(
                    "subgroup {key}: non-finite feature offset"
                )));
            }
        }
        if self.other.count > 0 {
            check_laws("other", &self.other.age, &self.other.error)?;
        }
        let f = &self.features;
        if f.dim == 0 {
            return Err(AuditError::Invalid("feature dimension must be at least 1".into()));
        }
        if !(f.noise_sd > 0.0 && f.noise_sd.is_finite()) {
            return Err(AuditError::Invalid(format!(
                "feature noise SD must be positive, got {}",
                f.noise_sd
            )));
        }
        if !(f.loading >= 0.0 && f.loading.is_finite()) {
            return Err(AuditError::Invalid(format!(
                "age loading must be non-negative, got {}",
                f.loading
            )));
        }
        if !(f.age_halfspan > 0.0) || !f.age_mid.is_finite() {
            return Err(AuditError::Invalid(
                "age_halfspan must be positive and age_mid finite".into(),
            ));
        }
        if self.total() == 0 {
            return Err(AuditError::Invalid("cohort spec has no subjects".into()));
        }
        Ok(())
    }
}

fn check_laws(what: &str, age: &AgeModel, err: &ErrorModel) -> Result<()> {
    let finite = [age.mean, age.sd, age.min, age.max, err.bias, err.sd]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(AuditError::Invalid(format!("{what}: non-finite parameter")));
    }
    if !(age.sd > 0.0) || !(err.sd > 0.0) {
        return Err(AuditError::Invalid(format!(
            "{what}: standard deviations must be positive"
        )));
    }
    if !(age.min < age.max) {
        return Err(AuditError::Invalid(format!(
            "{what}: age range [{}, {}] is empty",
            age.min, age.max
        )));
    }
    if !(age.min > 0.0) {
        return Err(AuditError::Invalid(format!("{what}: minimum age must be positive")));
    }
    Ok(())
}

/// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
pub fn open_unit(rng: &mut AuditRng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn standard_normal(rng: &mut AuditRng) -> f64 {
    ppnd16(open_unit(rng))
}

/// Draw from `N(mean, sd²)` restricted to `[min, max]` by inverting the CDF
/// on the truncated interval.
pub fn truncated_normal(rng: &mut AuditRng, m: &AgeModel) -> f64 {
    let a = (m.min - m.mean) / m.sd;
    let b = (m.max - m.mean) / m.sd;
    let u = open_unit(rng);
    // work in the lower tail, where Φ keeps its relative precision
    let z = if a > 0.0 {
        let (lo, hi) = (normal_cdf(-b).get(), normal_cdf(-a).get());
        -ppnd16(hi - u * (hi - lo))
    } else {
        let (lo, hi) = (normal_cdf(a).get(), normal_cdf(b).get());
        ppnd16(lo + u * (hi - lo))
    };
    (m.mean + m.sd * z).clamp(m.min, m.max)
}

/// `E|X|` for `X ~ N(mu, sigma²)`.
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp()
        + mu * (1.0 - 2.0 * normal_cdf(-mu / sigma).get())
}

/// Subjects per feature-noise stream.
const FEATURE_BLOCK: usize = 1024;

struct Block {
    group: usize,
    start: usize,
    len: usize,
}

/// Generates the cohort and one feature row per subject (row `i` belongs to
/// record `i`, and `feature_row` is set accordingly).
///
/// Subgroups appear in spec order followed by the "Other" subjects. Ids are
/// `s000001`, `s000002`, ...
pub fn generate_cohort(spec: &CohortSpec) -> Result<(Vec<SubjectRecord>, FeatureMatrix)> {
    spec.validate()?;
    let mut groups: Vec<(Race, Option<Sex>, usize, AgeModel, ErrorModel, &[f64])> = spec
        .subgroups
        .iter()
        .map(|s| {
            (
                s.race,
                Some(s.sex),
                s.count,
                s.age,
                s.error,
                s.feature_offset.as_slice(),
            )
        })
        .collect();
    if spec.other.count > 0 {
        groups.push((
            Race::White,
            None,
            spec.other.count,
            spec.other.age,
            spec.other.error,
            &[],
        ));
    }
    let other_index = spec.subgroups.len();

    let mut records = Vec::with_capacity(spec.total());
    for (g, &(race, sex, count, age_model, err, _)) in groups.iter().enumerate() {
        let mut rng = child_rng(spec.seed, stream::SUBGROUP, g as u64);
        for i in 0..count {
            let age = truncated_normal(&mut rng, &age_model);
            let predicted = age + err.bias + err.sd * standard_normal(&mut rng);
            let (sex, race_raw) = if g == other_index {
                (if i % 2 == 0 { Sex::Female } else { Sex::Male }, "Other")
            } else {
                (sex.expect("audited subgroup"), race.as_str())
            };
            let n = records.len();
            let mut rec = SubjectRecord::new(format!("s{:06}", n + 1), age, predicted, Some(sex), race_raw);
            rec.feature_row = Some(n);
            records.push(rec);
        }
    }

    let f = &spec.features;
    let d = f.dim;
    let mut loading_rng = child_rng(spec.seed, stream::LOADING, 0);
    let mut u: Vec<f64> = (0..d).map(|_| standard_normal(&mut loading_rng)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v *= f.loading / norm);

    let mut blocks = Vec::new();
    let mut offset = 0;
    for (g, group) in groups.iter().enumerate() {
        let count = group.2;
        for start in (0..count).step_by(FEATURE_BLOCK) {
            blocks.push((
                offset + start,
                Block {
                    group: g,
                    start,
                    len: FEATURE_BLOCK.min(count - start),
                },
            ));
        }
        offset += count;
    }
    let feature_seed = derive_seed(spec.seed, stream::FEATURES);
    let data: Vec<f64> = blocks
        .par_iter()
        .flat_map_iter(|(first, b)| {
            let mut rng = child_rng(feature_seed, b.group as u64, (b.start / FEATURE_BLOCK) as u64);
            let shift = groups[b.group].5;
            let u = &u;
            let records = &records;
            (0..b.len).flat_map(move |i| {
                let t = (records[first + i].age - f.age_mid) / f.age_halfspan;
                (0..d)
                    .map(|j| {
                        let off = shift.get(j).copied().unwrap_or(0.0);
                        u[j] * t + off + f.noise_sd * standard_normal(&mut rng)
                    })
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    let ids = records.iter().map(|r| r.id.clone()).collect();
    let features = FeatureMatrix::new(ids, d, data)?;
    Ok((records, features))
}

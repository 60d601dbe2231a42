//! Cohort data model: subjects, demographic harmonization, subgroup partition.

mod io;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

pub use io::{
    attach_features, parse_cohort_csv, read_cohort_csv, read_feature_bin, read_feature_csv, read_features,
    write_cohort_csv, write_feature_bin, write_feature_csv, FEATURE_MAGIC,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Female, Sex::Male];

    /// Accepts `F`/`M`/`Female`/`Male` in any case; `None` for anything else.
    pub fn parse(raw: &str) -> Option<Sex> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Some(Sex::Female),
            "m" | "male" => Some(Sex::Male),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "Female",
            Sex::Male => "Male",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Race {
    White,
    Black,
    Asian,
}

impl Race {
    pub const ALL: [Race; 3] = [Race::White, Race::Black, Race::Asian];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "White",
            Race::Black => "Black",
            Race::Asian => "Asian",
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the six race × sex strata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubgroupKey {
    pub race: Race,
    pub sex: Sex,
}

impl SubgroupKey {
    /// Canonical order: race-major, then sex.
    pub const ALL: [SubgroupKey; 6] = [
        SubgroupKey::new(Race::White, Sex::Female),
        SubgroupKey::new(Race::White, Sex::Male),
        SubgroupKey::new(Race::Black, Sex::Female),
        SubgroupKey::new(Race::Black, Sex::Male),
        SubgroupKey::new(Race::Asian, Sex::Female),
        SubgroupKey::new(Race::Asian, Sex::Male),
    ];

    pub const fn new(race: Race, sex: Sex) -> Self {
        SubgroupKey { race, sex }
    }

    pub fn index(self) -> usize {
        let r = match self.race {
            Race::White => 0,
            Race::Black => 1,
            Race::Asian => 2,
        };
        let s = match self.sex {
            Sex::Female => 0,
            Sex::Male => 1,
        };
        r * 2 + s
    }

    pub fn label(self) -> String {
        format!("{} {}", self.race, self.sex)
    }
}

impl fmt::Display for SubgroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.race, self.sex)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub age: f64,
    pub predicted_age: f64,
    pub sex: Option<Sex>,
    pub race_raw: String,
    /// Row of this subject in the attached feature matrix, if any.
    pub feature_row: Option<usize>,
}

impl SubjectRecord {
    pub fn new(
        id: impl Into<String>,
        age: f64,
        predicted_age: f64,
        sex: Option<Sex>,
        race_raw: impl Into<String>,
    ) -> Self {
        SubjectRecord {
            id: id.into(),
            age,
            predicted_age,
            sex,
            race_raw: race_raw.into(),
            feature_row: None,
        }
    }

    pub fn absolute_error(&self) -> f64 {
        absolute_error(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Race recorded as "Other" or "Mixed".
    RaceOther,
    /// Race label outside the accepted vocabulary.
    Unrecognized,
    /// Sex or race field empty.
    MissingAttribute,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::RaceOther => "race_other",
            ExclusionReason::Unrecognized => "unrecognized",
            ExclusionReason::MissingAttribute => "missing_attribute",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: ExclusionReason,
}

/// Maps a raw race label onto an audited level, or says why it is excluded.
pub fn classify_race(race_raw: &str) -> std::result::Result<Race, ExclusionReason> {
    let label = race_raw.trim().to_ascii_lowercase();
    match label.as_str() {
        "" | "na" | "n/a" => Err(ExclusionReason::MissingAttribute),
        "white" => Ok(Race::White),
        "black" => Ok(Race::Black),
        // Chinese subjects are pooled with Asian to reach a usable group size.
        "asian" | "chinese" => Ok(Race::Asian),
        "other" | "mixed" => Err(ExclusionReason::RaceOther),
        _ => Err(ExclusionReason::Unrecognized),
    }
}

pub fn harmonize_race(race_raw: &str) -> Option<Race> {
    classify_race(race_raw).ok()
}

pub fn absolute_error(record: &SubjectRecord) -> f64 {
    (record.age - record.predicted_age).abs()
}

pub fn mae(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(AuditError::Invalid("mean absolute error of an empty list".into()));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Subjects split into the six audited subgroups plus an exclusion list.
///
/// Owns the records; group membership lists hold indices into
/// [`SubgroupPartition::records`].
#[derive(Debug, Clone)]
pub struct SubgroupPartition {
    records: Vec<SubjectRecord>,
    groups: [Vec<usize>; 6],
    excluded: Vec<Exclusion>,
}

pub fn partition(records: Vec<SubjectRecord>) -> Result<SubgroupPartition> {
    SubgroupPartition::new(records)
}

impl SubgroupPartition {
    pub fn new(records: Vec<SubjectRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(AuditError::Invalid("cohort has no subjects".into()));
        }
        let mut seen = HashSet::with_capacity(records.len());
        let mut groups: [Vec<usize>; 6] = Default::default();
        let mut excluded = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(AuditError::Data(format!("duplicate subject id {:?}", r.id)));
            }
            if !r.age.is_finite() || !r.predicted_age.is_finite() {
                return Err(AuditError::Data(format!(
                    "subject {:?} has a non-finite age or prediction",
                    r.id
                )));
            }
            let race = classify_race(&r.race_raw);
            match (race, r.sex) {
                (Ok(race), Some(sex)) => groups[SubgroupKey::new(race, sex).index()].push(i),
                (Err(reason), _) => excluded.push(Exclusion {
                    id: r.id.clone(),
                    reason,
                }),
                (Ok(_), None) => excluded.push(Exclusion {
                    id: r.id.clone(),
                    reason: ExclusionReason::MissingAttribute,
                }),
            }
        }
        if excluded.len() == records.len() {
            return Err(AuditError::Invalid(format!(
                "all {} subjects were excluded",
                records.len()
            )));
        }
        Ok(SubgroupPartition {
            records,
            groups,
            excluded,
        })
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn record(&self, index: usize) -> &SubjectRecord {
        &self.records[index]
    }

    /// Indices (into [`records`](Self::records)) of the members of `key`.
    pub fn members(&self, key: SubgroupKey) -> &[usize] {
        &self.groups[key.index()]
    }

    pub fn group(&self, key: SubgroupKey) -> impl Iterator<Item = &SubjectRecord> + '_ {
        self.members(key).iter().map(move |&i| &self.records[i])
    }

    pub fn excluded(&self) -> &[Exclusion] {
        &self.excluded
    }

    pub fn size(&self, key: SubgroupKey) -> usize {
        self.members(key).len()
    }

    pub fn sizes(&self) -> [(SubgroupKey, usize); 6] {
        SubgroupKey::ALL.map(|k| (k, self.size(k)))
    }

    pub fn included_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Smallest subgroup and its size (first in canonical order on ties).
    pub fn smallest(&self) -> (SubgroupKey, usize) {
        SubgroupKey::ALL
            .into_iter()
            .map(|k| (k, self.size(k)))
            .min_by_key(|&(_, n)| n)
            .expect("six keys")
    }

    /// Included record indices in canonical subgroup order.
    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().flatten().copied()
    }

    pub fn absolute_errors(&self, key: SubgroupKey) -> Vec<f64> {
        self.group(key).map(absolute_error).collect()
    }

    /// Exclusion counts per reason, in reason order.
    pub fn exclusion_counts(&self) -> Vec<(ExclusionReason, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for e in &self.excluded {
            *counts.entry(e.reason).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }
}

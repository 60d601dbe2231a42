use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Half-open age brackets `[e_i, e_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AgeBracketing {
    edges: Vec<f64>,
}

impl AgeBracketing {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(AuditError::Invalid(format!(
                "age bracketing needs at least 2 edges, got {}",
                edges.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AuditError::Invalid(format!(
                "age bracket edges must be finite and strictly ascending: {edges:?}"
            )));
        }
        Ok(AgeBracketing { edges })
    }

    /// The fixed two-bracket split `[40, 60)`, `[60, 90)`.
    pub fn two_bracket() -> Self {
        AgeBracketing {
            edges: vec![40.0, 60.0, 90.0],
        }
    }

    /// `count` equal-width brackets over `[min, max]`; the last edge is
    /// nudged just above `max` so the oldest subject is inside.
    pub fn equal_width(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 || !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(AuditError::Invalid(format!(
                "cannot split [{min}, {max}] into {count} brackets"
            )));
        }
        let width = (max - min) / count as f64;
        let mut edges: Vec<f64> = (0..count).map(|i| min + width * i as f64).collect();
        edges.push(max.next_up());
        AgeBracketing::new(edges)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, bracket: usize) -> String {
        format!(
            "[{},{})",
            fmt_edge(self.edges[bracket]),
            fmt_edge(self.edges[bracket + 1])
        )
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// Bracket index of `age`, or `None` outside `[first, last)`.
    pub fn bracket_of(&self, age: f64) -> Option<usize> {
        if !(age >= self.edges[0] && age < *self.edges.last().unwrap()) {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= age) - 1)
    }

    pub fn assign(&self, id: &str, age: f64) -> Result<usize> {
        self.bracket_of(age).ok_or_else(|| {
            AuditError::Data(format!(
                "subject {id:?} has age {age}, outside the bracket range [{}, {})",
                fmt_edge(self.edges[0]),
                fmt_edge(*self.edges.last().unwrap())
            ))
        })
    }
}

impl TryFrom<Vec<f64>> for AgeBracketing {
    type Error = AuditError;

    fn try_from(edges: Vec<f64>) -> Result<Self> {
        AgeBracketing::new(edges)
    }
}

impl From<AgeBracketing> for Vec<f64> {
    fn from(b: AgeBracketing) -> Self {
        b.edges
    }
}

/// Integers print bare; other edges with one decimal.
fn fmt_edge(e: f64) -> String {
    if (e - e.round()).abs() < 1e-9 {
        format!("{}", e.round())
    } else {
        format!("{e:.1}")
    }
}

/// Bracket label of every `(id, age)` pair.
pub fn bracket_ages<'a>(
    subjects: impl IntoIterator<Item = (&'a str, f64)>,
    bracketing: &AgeBracketing,
) -> Result<Vec<String>> {
    subjects
        .into_iter()
        .map(|(id, age)| bracketing.assign(id, age).map(|b| bracketing.label(b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bracket_boundaries() {
        let b = AgeBracketing::two_bracket();
        let got = bracket_ages([("a", 59.9), ("b", 60.0), ("c", 40.0)], &b).unwrap();
        assert_eq!(got, vec!["[40,60)", "[60,90)", "[40,60)"]);
        let err = bracket_ages([("s17", 90.0)], &b).unwrap_err().to_string();
        assert!(err.contains("s17"), "{err}");
        assert!(b.bracket_of(39.99).is_none());
    }

    #[test]
    fn lower_edge_inclusive() {
        let b = AgeBracketing::new(vec![44.0, 52.0, 60.0, 68.0, 76.0, 84.0]).unwrap();
        assert_eq!(b.bracket_of(44.0), Some(0));
        assert_eq!(b.bracket_of(83.999), Some(4));
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn equal_width_covers_range() {
        let b = AgeBracketing::equal_width(44.0, 82.0, 5).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b.bracket_of(82.0), Some(4));
        assert_eq!(b.bracket_of(44.0), Some(0));
        assert_eq!(b.labels()[0], "[44,51.6)");
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(AgeBracketing::new(vec![40.0]).is_err());
        assert!(AgeBracketing::new(vec![40.0, 40.0]).is_err());
        assert!(AgeBracketing::new(vec![60.0, 40.0]).is_err());
        assert!(serde_json::from_str::<AgeBracketing>("[1.0, 0.5]").is_err());
        let b: AgeBracketing = serde_json::from_str("[40, 60, 90]").unwrap();
        assert_eq!(b, AgeBracketing::two_bracket());
    }
}

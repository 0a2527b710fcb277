use std::fmt;

use serde::{Deserialize, Serialize};

/// One violated rule together with the ids of the offending elements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub elements: Vec<String>,
    pub message: String,
}

/// Outcome of a structural check. Empty means valid.
///
/// Violations are kept sorted by rule id, then by element ids, so that two
/// checks of the same input always produce identical reports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Informational findings; they never make a report invalid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub info: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push<I, S>(&mut self, rule: &str, elements: I, message: impl Into<String>)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.violations.push(Violation {
            rule: rule.to_string(),
            elements: elements.into_iter().map(Into::into).collect(),
            message: message.into(),
        });
    }

    pub fn note<I, S>(&mut self, rule: &str, elements: I, message: impl Into<String>)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.info.push(Violation {
            rule: rule.to_string(),
            elements: elements.into_iter().map(Into::into).collect(),
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
        self.info.extend(other.info);
    }

    /// Sorts and deduplicates; called by every producer before returning.
    pub fn finish(mut self) -> Self {
        self.violations.sort();
        self.violations.dedup();
        self.info.sort();
        self.info.dedup();
        self
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn count_rule(&self, rule: &str) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    pub fn rules(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.rule.as_str()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} [{}]: {}", v.rule, v.elements.join(", "), v.message)?;
        }
        Ok(())
    }
}

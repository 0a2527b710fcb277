use serde_json::Value;
use socproto_core::library::{validate_document, ArtifactKind};
use socproto_core::{EditTransaction, ValidationReport};

use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Abstract,
    Implemented,
    Process,
    Environment,
    Transaction,
    Scenario,
}

impl DocumentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentKind::Abstract => "abstract protocol",
            DocumentKind::Implemented => "implemented protocol",
            DocumentKind::Process => "process",
            DocumentKind::Environment => "environment",
            DocumentKind::Transaction => "edit transaction",
            DocumentKind::Scenario => "scenario",
        }
    }

    pub fn artifact(self) -> Option<ArtifactKind> {
        match self {
            DocumentKind::Abstract => Some(ArtifactKind::Abstract),
            DocumentKind::Implemented => Some(ArtifactKind::Implemented),
            DocumentKind::Process => Some(ArtifactKind::Process),
            DocumentKind::Environment => Some(ArtifactKind::Environment),
            DocumentKind::Transaction | DocumentKind::Scenario => None,
        }
    }
}

/// Guesses a document's kind from its top-level keys.
pub fn detect_kind(value: &Value) -> Option<DocumentKind> {
    let object = value.as_object()?;
    let has = |key: &str| object.contains_key(key);
    if has("trace") && has("marking") {
        Some(DocumentKind::Process)
    } else if has("abstract_protocol") && has("activity_map") {
        Some(DocumentKind::Implemented)
    } else if has("network") && has("interaction") {
        Some(DocumentKind::Abstract)
    } else if has("steps") && has("protocol") {
        Some(DocumentKind::Scenario)
    } else if has("edits") && has("target") {
        Some(DocumentKind::Transaction)
    } else if has("resources") && has("relations") {
        Some(DocumentKind::Environment)
    } else {
        None
    }
}

/// Validates artifacts in full. Transactions and scenarios are only checked
/// for shape here, since their meaning depends on other documents.
pub fn validate_value(kind: DocumentKind, value: &Value) -> ValidationReport {
    match kind.artifact() {
        Some(artifact) => validate_document(artifact, value),
        None => {
            let mut report = ValidationReport::new();
            let problem = match kind {
                DocumentKind::Transaction => serde_json::from_value::<EditTransaction>(value.clone()).err().map(|e| e.to_string()),
                _ => match serde_json::from_value::<Scenario>(value.clone()) {
                    Err(e) => Some(e.to_string()),
                    Ok(s) if s.steps.is_empty() => Some("a scenario needs at least one step".to_string()),
                    Ok(_) => None,
                },
            };
            if let Some(message) = problem {
                report.push("malformed", Vec::<String>::new(), message);
            }
            report.finish()
        }
    }
}

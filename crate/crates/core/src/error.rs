use thiserror::Error;

use crate::report::ValidationReport;

/// Every failure the engine can report.
///
/// Each variant maps to exactly one stable machine code (see [`Error::code`]),
/// which the HTTP facade and scenario files use verbatim.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid identifier {0:?}: expected [a-z0-9_-]+")]
    InvalidId(String),
    #[error("validation failed: {0}")]
    ValidationFailed(ValidationReport),
    #[error("cross reference error: {0}")]
    CrossReference(ValidationReport),
    #[error("incomplete mapping for {0:?}")]
    IncompleteMapping(Vec<String>, ValidationReport),
    #[error("unknown resource {0:?}")]
    UnknownResource(Vec<String>),
    #[error("resource {0} already registered with different content")]
    ResourceConflict(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("resource {0} is referenced by live process {1}")]
    ResourceInUse(String, String),
    #[error("unassigned roles {0:?}")]
    UnassignedRole(Vec<String>),
    #[error("unknown collaborator {0:?}")]
    UnknownCollaborator(Vec<String>),
    #[error("unknown role {0}")]
    UnknownRole(String),
    #[error("activity {activity} is not enabled for {collaborator}")]
    NotEnabled { activity: String, collaborator: String },
    #[error("firing {activity} would mark already active states {states:?}")]
    ContactViolation { activity: String, states: Vec<String> },
    #[error("process {0} is not running")]
    ProcessNotRunning(String),
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: String, to: String },
    #[error("trace diverges at sequence number {seq}: {reason}")]
    ReplayDivergence { seq: u64, reason: String },
    #[error("process {0} already has a pending adaptation")]
    AdaptationInProgress(String),
    #[error("meta-process {0} has not reached a decision")]
    MetaNotDecided(String),
    #[error("invalid proposal: {0}")]
    InvalidProposal(String),
    #[error("transaction invalid: {0}")]
    TransactionInvalid(ValidationReport),
    #[error("marked states removed without migration: {0:?}")]
    MigrationMissing(Vec<String>),
    #[error("{kind} {id} not found")]
    NotFound { kind: String, id: String },
    #[error("document {0} failed its hash check")]
    CorruptDocument(String),
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("malformed document: {0}")]
    Malformed(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidId(_) => "INVALID_ID",
            Error::ValidationFailed(_) => "VALIDATION_FAILED",
            Error::CrossReference(_) => "CROSS_REFERENCE",
            Error::IncompleteMapping(..) => "INCOMPLETE_MAPPING",
            Error::UnknownResource(_) => "UNKNOWN_RESOURCE",
            Error::ResourceConflict(_) => "RESOURCE_CONFLICT",
            Error::DuplicateId(_) => "DUPLICATE_ID",
            Error::ResourceInUse(..) => "RESOURCE_IN_USE",
            Error::UnassignedRole(_) => "UNASSIGNED_ROLE",
            Error::UnknownCollaborator(_) => "UNKNOWN_COLLABORATOR",
            Error::UnknownRole(_) => "UNKNOWN_ROLE",
            Error::NotEnabled { .. } => "NOT_ENABLED",
            Error::ContactViolation { .. } => "CONTACT_VIOLATION",
            Error::ProcessNotRunning(_) => "PROCESS_NOT_RUNNING",
            Error::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
            Error::ReplayDivergence { .. } => "REPLAY_DIVERGENCE",
            Error::AdaptationInProgress(_) => "ADAPTATION_IN_PROGRESS",
            Error::MetaNotDecided(_) => "META_NOT_DECIDED",
            Error::InvalidProposal(_) => "INVALID_PROPOSAL",
            Error::TransactionInvalid(_) => "TRANSACTION_INVALID",
            Error::MigrationMissing(_) => "MIGRATION_MISSING",
            Error::NotFound { .. } => "NOT_FOUND",
            Error::CorruptDocument(_) => "CORRUPT_DOCUMENT",
            Error::StorageFailure(_) => "STORAGE_FAILURE",
            Error::Malformed(_) => "MALFORMED",
        }
    }

    /// Ids of the elements the error is about, for API payloads.
    pub fn offending_ids(&self) -> Vec<String> {
        match self {
            Error::InvalidId(s)
            | Error::ResourceConflict(s)
            | Error::DuplicateId(s)
            | Error::UnknownRole(s)
            | Error::ProcessNotRunning(s)
            | Error::AdaptationInProgress(s)
            | Error::MetaNotDecided(s)
            | Error::CorruptDocument(s) => vec![s.clone()],
            Error::ResourceInUse(a, b) => vec![a.clone(), b.clone()],
            Error::IncompleteMapping(ids, _)
            | Error::UnknownResource(ids)
            | Error::UnassignedRole(ids)
            | Error::UnknownCollaborator(ids)
            | Error::MigrationMissing(ids) => ids.clone(),
            Error::NotEnabled { activity, collaborator } => {
                vec![activity.clone(), collaborator.clone()]
            }
            Error::ContactViolation { activity, states } => {
                let mut ids = vec![activity.clone()];
                ids.extend(states.iter().cloned());
                ids
            }
            Error::NotFound { id, .. } => vec![id.clone()],
            Error::ReplayDivergence { seq, .. } => vec![seq.to_string()],
            Error::ValidationFailed(r) | Error::CrossReference(r) | Error::TransactionInvalid(r) => {
                let mut ids: Vec<String> =
                    r.violations.iter().flat_map(|v| v.elements.iter().cloned()).collect();
                ids.sort();
                ids.dedup();
                ids
            }
            Error::IllegalTransition { .. }
            | Error::InvalidProposal(_)
            | Error::StorageFailure(_)
            | Error::Malformed(_) => Vec::new(),
        }
    }

    /// Embedded validation report, if the error carries one.
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            Error::ValidationFailed(r)
            | Error::CrossReference(r)
            | Error::IncompleteMapping(_, r)
            | Error::TransactionInvalid(r) => Some(r),
            _ => None,
        }
    }

    pub(crate) fn not_found(kind: &str, id: impl Into<String>) -> Self {
        Error::NotFound { kind: kind.to_string(), id: id.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

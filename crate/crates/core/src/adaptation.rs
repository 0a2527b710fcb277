//! Run-time adaptation of live processes.
//!
//! A meta-process is an ordinary [`SocialProcess`] running a small
//! propose/accept/reject protocol. While it deliberates, its target process
//! is paused. Concluding it with an accepted proposal applies the proposed
//! [`EditTransaction`] to the target, all or nothing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::environment::SocialEnvironment;
use crate::id::{id, Id};
use crate::implementation::{ActionDescriptor, ImplementedSocialProtocol};
use crate::process::{self, ExecCtx, Event, Marking, Payload, ProcessStatus, RoleAssignment, SocialProcess, TraceEntry};
use crate::protocol::{
    AbstractActivity, AbstractInteractionProtocol, AbstractResource, AbstractResourceKind, AbstractSocialNetwork,
    AbstractSocialProtocol, Edge, StateNode,
};
use crate::report::ValidationReport;
use crate::{Error, Result};

/// One structural or assignment change. Serialized as a tagged union on `op`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    AddState { state: StateNode },
    /// Also drops every edge touching the state.
    RemoveState { id: Id },
    AddActivity { activity: AbstractActivity, action: ActionDescriptor },
    /// Also drops every edge touching the activity and its action mapping.
    RemoveActivity { id: Id },
    AddEdge { from: Id, to: Id },
    RemoveEdge { from: Id, to: Id },
    ReassignRole { role: Id, collaborators: BTreeSet<Id> },
    RemapActivity { activity: Id, action: ActionDescriptor },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTransaction {
    pub target: Id,
    pub edits: Vec<Edit>,
    /// Removed state to replacement state; `null` drops the state from the marking.
    #[serde(default)]
    pub marking_migration: BTreeMap<Id, Option<Id>>,
}

impl EditTransaction {
    pub fn new(target: Id, edits: Vec<Edit>) -> Self {
        Self { target, edits, marking_migration: BTreeMap::new() }
    }

    pub fn migrate(mut self, removed: Id, replacement: Option<Id>) -> Self {
        self.marking_migration.insert(removed, replacement);
        self
    }
}

/// Appended to a trace when a transaction commits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptationRecord {
    pub seq: u64,
    pub timestamp: u64,
    pub transaction: EditTransaction,
    pub prior_version: String,
    pub new_version: String,
    pub marking_before: Marking,
    pub marking_after: Marking,
}

/// Outcome of applying a transaction's edits to copies of process state.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub protocol: ImplementedSocialProtocol,
    pub assignment: RoleAssignment,
    pub marking: Marking,
}

fn invalid(rule: &str, elements: Vec<String>, message: impl Into<String>) -> Error {
    let mut report = ValidationReport::new();
    report.push(rule, elements, message);
    Error::TransactionInvalid(report.finish())
}

fn unresolvable(index: usize, subject: &Id, message: &str) -> Error {
    invalid("edit-unresolvable", vec![format!("edit-{index}"), subject.to_string()], message)
}

fn node_exists(interaction: &AbstractInteractionProtocol, node: &str) -> bool {
    interaction.node_kind(node).is_some()
}

/// Applies the edits of `txn` in order to working copies and validates the result.
///
/// Environment membership of reassigned collaborators is not checked here so
/// that replay can run without an environment.
pub fn apply_structural(
    protocol: &ImplementedSocialProtocol,
    assignment: &RoleAssignment,
    marking: &Marking,
    txn: &EditTransaction,
) -> Result<Applied> {
    if txn.edits.is_empty() {
        return Err(invalid("empty-transaction", vec![txn.target.to_string()], "a transaction needs at least one edit"));
    }

    let removed_states: BTreeSet<&Id> = txn
        .edits
        .iter()
        .filter_map(|e| match e {
            Edit::RemoveState { id } => Some(id),
            _ => None,
        })
        .collect();
    let missing: Vec<String> = removed_states
        .iter()
        .filter(|s| marking.contains(**s) && !txn.marking_migration.contains_key(**s))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MigrationMissing(missing));
    }

    let mut working = protocol.clone();
    let mut assignment = assignment.clone();
    for (index, edit) in txn.edits.iter().enumerate() {
        let interaction = &mut working.abstract_protocol.interaction;
        match edit {
            Edit::AddState { state } => {
                if node_exists(interaction, state.id.as_str()) {
                    return Err(unresolvable(index, &state.id, "node id already in use"));
                }
                interaction.states.push(state.clone());
            }
            Edit::RemoveState { id } => {
                if interaction.state(id.as_str()).is_none() {
                    return Err(unresolvable(index, id, "no such state"));
                }
                interaction.states.retain(|s| s.id != *id);
                interaction.edges.retain(|e| e.from != *id && e.to != *id);
            }
            Edit::AddActivity { activity, action } => {
                if node_exists(interaction, activity.id.as_str()) {
                    return Err(unresolvable(index, &activity.id, "node id already in use"));
                }
                interaction.activities.push(activity.clone());
                working.activity_map.insert(activity.id.clone(), action.clone());
            }
            Edit::RemoveActivity { id } => {
                if interaction.activity(id.as_str()).is_none() {
                    return Err(unresolvable(index, id, "no such activity"));
                }
                interaction.activities.retain(|a| a.id != *id);
                interaction.edges.retain(|e| e.from != *id && e.to != *id);
                working.activity_map.remove(id);
            }
            Edit::AddEdge { from, to } => {
                for end in [from, to] {
                    if !node_exists(interaction, end.as_str()) {
                        return Err(unresolvable(index, end, "edge endpoint does not exist"));
                    }
                }
                if interaction.has_edge(from.as_str(), to.as_str()) {
                    return Err(unresolvable(index, from, "edge already present"));
                }
                interaction.edges.push(Edge::new(from.clone(), to.clone()));
            }
            Edit::RemoveEdge { from, to } => {
                if !interaction.has_edge(from.as_str(), to.as_str()) {
                    return Err(unresolvable(index, from, "no such edge"));
                }
                interaction.edges.retain(|e| !(e.from == *from && e.to == *to));
            }
            Edit::ReassignRole { role, collaborators } => {
                let is_role = working
                    .abstract_protocol
                    .network
                    .resource(role.as_str())
                    .is_some_and(|r| r.kind == AbstractResourceKind::Role);
                if !is_role {
                    return Err(unresolvable(index, role, "no such role"));
                }
                if collaborators.is_empty() {
                    return Err(unresolvable(index, role, "a role needs at least one collaborator"));
                }
                assignment.insert(role.clone(), collaborators.clone());
            }
            Edit::RemapActivity { activity, action } => {
                if interaction.activity(activity.as_str()).is_none() {
                    return Err(unresolvable(index, activity, "no such activity"));
                }
                working.activity_map.insert(activity.clone(), action.clone());
            }
        }
    }

    let interaction = &working.abstract_protocol.interaction;
    let mut report = ValidationReport::new();
    let mut next = marking.clone();
    for (removed, replacement) in &txn.marking_migration {
        if !removed_states.contains(removed) {
            report.push("migration-unknown", [removed.to_string()], "migration names a state that is not removed");
            continue;
        }
        if let Some(replacement) = replacement {
            if interaction.state(replacement.as_str()).is_none() {
                report.push(
                    "migration-target",
                    [removed.to_string(), replacement.to_string()],
                    "replacement state does not exist after the edits",
                );
            }
        }
    }
    for removed in &removed_states {
        if next.remove(*removed) {
            if let Some(Some(replacement)) = txn.marking_migration.get(*removed) {
                next.insert(replacement.clone());
            }
        }
    }
    let strays: Vec<String> =
        next.iter().filter(|s| interaction.state(s.as_str()).is_none()).map(|s| s.to_string()).collect();
    if !strays.is_empty() {
        report.push("marking-unknown-state", strays, "marked states missing after the edits");
    }

    report.extend(working.validate());
    let unassigned = process::unassigned_roles(&working, &assignment);
    if !unassigned.is_empty() {
        report.push("unassigned-role", unassigned, "roles without collaborators after the edits");
    }
    let report = report.finish();
    if !report.is_valid() {
        return Err(Error::TransactionInvalid(report));
    }
    Ok(Applied { protocol: working, assignment, marking: next })
}

/// Applies `txn` to a paused process. On any failure the process is untouched.
pub fn apply_transaction(
    process: &mut SocialProcess,
    txn: &EditTransaction,
    environment: &mut SocialEnvironment,
    ctx: ExecCtx<'_>,
) -> Result<AdaptationRecord> {
    if process.status != ProcessStatus::Paused {
        return Err(Error::IllegalTransition { from: process.status.as_str().into(), to: "adapting".into() });
    }
    if txn.target != process.id {
        return Err(invalid(
            "target-mismatch",
            vec![txn.target.to_string(), process.id.to_string()],
            "transaction targets a different process",
        ));
    }
    let applied = apply_structural(&process.protocol, &process.assignment, &process.marking, txn)?;

    let unknown: Vec<String> = applied
        .assignment
        .collaborators()
        .into_iter()
        .filter(|c| !environment.is_person(c.as_str()))
        .map(|c| c.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(invalid("unknown-collaborator", unknown, "collaborators must be persons in the environment"));
    }

    let record = AdaptationRecord {
        seq: process.next_seq(),
        timestamp: ctx.clock.now_ms(),
        transaction: txn.clone(),
        prior_version: process.protocol.version()?,
        new_version: applied.protocol.version()?,
        marking_before: process.marking.clone(),
        marking_after: applied.marking.clone(),
    };
    process.protocol = applied.protocol;
    process.assignment = applied.assignment;
    process.marking = applied.marking;
    process.trace.push(TraceEntry::Adaptation(record.clone()));
    environment.enrich_from_process(process);
    Ok(record)
}

pub const META_TAG: &str = "meta";
pub const PROPOSE: &str = "propose-change";
pub const ACCEPT: &str = "accept";
pub const REJECT: &str = "reject";
/// Payload key carrying the serialized [`EditTransaction`] of a proposal.
pub const TRANSACTION_KEY: &str = "transaction";

/// The built-in deliberation protocol: initiators propose (repeatably, the
/// latest proposal wins), one decision by a decider closes it.
pub fn meta_protocol() -> ImplementedSocialProtocol {
    let network = AbstractSocialNetwork {
        resources: vec![
            AbstractResource::role(id("initiator"), "Initiator"),
            AbstractResource::role(id("decider"), "Decider"),
        ],
        relations: Vec::new(),
    };
    let interaction = AbstractInteractionProtocol {
        states: vec![
            StateNode::new(id("deliberating"), "Deliberating").initial(),
            StateNode::new(id("decided"), "Decided").terminal(),
        ],
        activities: vec![
            AbstractActivity::new(id(PROPOSE), "Propose a change", id("initiator")),
            AbstractActivity::new(id(ACCEPT), "Accept the proposal", id("decider")),
            AbstractActivity::new(id(REJECT), "Reject the proposal", id("decider")),
        ],
        edges: vec![
            Edge::new(id("deliberating"), id(PROPOSE)),
            Edge::new(id(PROPOSE), id("deliberating")),
            Edge::new(id("deliberating"), id(ACCEPT)),
            Edge::new(id(ACCEPT), id("decided")),
            Edge::new(id("deliberating"), id(REJECT)),
            Edge::new(id(REJECT), id("decided")),
        ],
    };
    let abstract_protocol = AbstractSocialProtocol {
        id: id("meta-adaptation"),
        network,
        interaction,
        tags: BTreeSet::from([META_TAG.to_string()]),
    };
    let activity_map = crate::implementation::manual_activity_map(&abstract_protocol);
    ImplementedSocialProtocol {
        id: id("meta-adaptation-manual"),
        abstract_protocol,
        resource_map: BTreeMap::new(),
        activity_map,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaOutcome {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaProcess {
    pub meta: SocialProcess,
    pub target: Id,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed: Option<EditTransaction>,
    pub outcome: MetaOutcome,
}

pub fn start_meta_process(
    id: Id,
    target: &mut SocialProcess,
    participants: RoleAssignment,
    environment: &mut SocialEnvironment,
) -> Result<MetaProcess> {
    start_meta_process_with(id, &meta_protocol(), target, participants, environment)
}

/// Starts a meta-process on a user-supplied protocol tagged `meta`, which
/// must provide `propose-change`, `accept` and `reject` activities.
pub fn start_meta_process_with(
    id: Id,
    protocol: &ImplementedSocialProtocol,
    target: &mut SocialProcess,
    participants: RoleAssignment,
    environment: &mut SocialEnvironment,
) -> Result<MetaProcess> {
    if target.pending_adaptation.is_some() {
        return Err(Error::AdaptationInProgress(target.id.to_string()));
    }
    if target.status != ProcessStatus::Running {
        return Err(Error::ProcessNotRunning(target.id.to_string()));
    }
    let abstract_protocol = &protocol.abstract_protocol;
    let mut report = ValidationReport::new();
    if !abstract_protocol.tags.contains(META_TAG) {
        report.push("meta-tag", [protocol.id.to_string()], "meta protocols are tagged `meta`");
    }
    for required in [PROPOSE, ACCEPT, REJECT] {
        if abstract_protocol.interaction.activity(required).is_none() {
            report.push("meta-activity", [required], "meta protocols need this activity");
        }
    }
    let report = report.finish();
    if !report.is_valid() {
        return Err(Error::ValidationFailed(report));
    }
    let meta = process::instantiate(id.clone(), protocol, participants, environment)?;
    target.status = ProcessStatus::Paused;
    target.pending_adaptation = Some(id);
    Ok(MetaProcess { meta, target: target.id.clone(), proposed: None, outcome: MetaOutcome::Pending })
}

impl MetaProcess {
    pub fn id(&self) -> &Id {
        &self.meta.id
    }

    /// Fires an activity of the meta-process. `propose-change` must carry a
    /// transaction for this meta-process's target under the `transaction` key.
    pub fn fire(&mut self, ctx: ExecCtx<'_>, collaborator: &str, activity: &str, payload: Option<Payload>) -> Result<Event> {
        let proposal = if activity == PROPOSE {
            let raw = payload
                .as_ref()
                .and_then(|p| p.get(TRANSACTION_KEY))
                .ok_or_else(|| Error::InvalidProposal(format!("payload needs a `{TRANSACTION_KEY}` entry")))?;
            let txn: EditTransaction =
                serde_json::from_str(raw).map_err(|e| Error::InvalidProposal(e.to_string()))?;
            if txn.target != self.target {
                return Err(Error::InvalidProposal(format!("proposal targets {} instead of {}", txn.target, self.target)));
            }
            Some(txn)
        } else {
            None
        };
        let event = self.meta.fire(ctx, collaborator, activity, payload)?;
        if proposal.is_some() {
            self.proposed = proposal;
        }
        Ok(event)
    }

    /// Activity id of the last `accept`/`reject` firing, if any.
    pub fn decision(&self) -> Option<&Id> {
        self.meta
            .trace
            .iter()
            .rev()
            .filter_map(TraceEntry::as_event)
            .map(|e| &e.activity)
            .find(|a| *a == ACCEPT || *a == REJECT)
    }
}

/// Closes a decided meta-process and resumes its target.
///
/// An accepted proposal is applied first; if it fails validation the target
/// resumes unchanged, the outcome is recorded as rejected and the error is
/// returned.
pub fn conclude_meta_process(
    meta: &mut MetaProcess,
    target: &mut SocialProcess,
    environment: &mut SocialEnvironment,
    ctx: ExecCtx<'_>,
) -> Result<MetaOutcome> {
    if target.id != meta.target {
        return Err(Error::Malformed(format!("meta-process {} targets {}, not {}", meta.id(), meta.target, target.id)));
    }
    if meta.outcome != MetaOutcome::Pending {
        return Err(Error::IllegalTransition { from: "concluded".into(), to: "concluded".into() });
    }
    if meta.meta.status != ProcessStatus::Completed {
        return Err(Error::MetaNotDecided(meta.id().to_string()));
    }
    let accepted = meta.decision().is_some_and(|d| d == ACCEPT);
    let result = match (&meta.proposed, accepted) {
        (Some(txn), true) => apply_transaction(target, txn, environment, ctx).map(|_| MetaOutcome::Accepted),
        (None, true) => {
            tracing::warn!(meta = %meta.id(), target = %target.id, "accepted without a proposal; treating as rejected");
            Ok(MetaOutcome::Rejected)
        }
        (_, false) => Ok(MetaOutcome::Rejected),
    };
    target.pending_adaptation = None;
    target.resume();
    meta.outcome = match &result {
        Ok(outcome) => *outcome,
        Err(_) => MetaOutcome::Rejected,
    };
    result
}

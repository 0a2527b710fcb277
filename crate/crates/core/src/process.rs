//! Social processes: an implemented protocol instantiated with collaborators,
//! executed as an elementary net over a boolean marking.
//!
//! Firing an activity removes its input states from the marking and adds its
//! output states. A state that is both input and output (a self-loop) stays
//! active. An activity may not fire while one of its non-loop output states
//! is already active (the contact condition), which keeps the marking a set.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::adaptation::{self, AdaptationRecord};
use crate::environment::SocialEnvironment;
use crate::id::Id;
use crate::implementation::{ActionDescriptor, ImplementedSocialProtocol};
use crate::protocol::AbstractInteractionProtocol;
use crate::report::ValidationReport;
use crate::{Error, Result};

/// Set of active states.
pub type Marking = BTreeSet<Id>;

pub type Payload = BTreeMap<String, String>;

/// Role id to the collaborators playing it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleAssignment(BTreeMap<Id, BTreeSet<Id>>);

impl RoleAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, role: Id, collaborators: impl IntoIterator<Item = Id>) -> Self {
        self.insert(role, collaborators.into_iter().collect());
        self
    }

    pub fn insert(&mut self, role: Id, collaborators: BTreeSet<Id>) -> Option<BTreeSet<Id>> {
        self.0.insert(role, collaborators)
    }

    pub fn get(&self, role: &str) -> Option<&BTreeSet<Id>> {
        self.0.get(role)
    }

    pub fn holds(&self, collaborator: &str, role: &str) -> bool {
        self.get(role).is_some_and(|c| c.contains(collaborator))
    }

    pub fn roles(&self) -> impl Iterator<Item = &Id> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Id, &BTreeSet<Id>)> {
        self.0.iter()
    }

    /// Everyone assigned to any role.
    pub fn collaborators(&self) -> BTreeSet<Id> {
        self.0.values().flatten().cloned().collect()
    }

    pub fn roles_of(&self, collaborator: &str) -> Vec<&Id> {
        self.0.iter().filter(|(_, c)| c.contains(collaborator)).map(|(r, _)| r).collect()
    }
}

impl FromIterator<(Id, BTreeSet<Id>)> for RoleAssignment {
    fn from_iter<T: IntoIterator<Item = (Id, BTreeSet<Id>)>>(iter: T) -> Self {
        RoleAssignment(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessStatus {
    Running,
    Paused,
    Completed,
}

impl ProcessStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProcessStatus::Running => "running",
            ProcessStatus::Paused => "paused",
            ProcessStatus::Completed => "completed",
        }
    }
}

/// Audit record of one firing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub timestamp: u64,
    pub collaborator: Id,
    pub activity: Id,
    pub consumed: BTreeSet<Id>,
    pub produced: BTreeSet<Id>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    pub action: ActionDescriptor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEntry {
    Firing(Event),
    Adaptation(AdaptationRecord),
}

impl TraceEntry {
    pub fn seq(&self) -> u64 {
        match self {
            TraceEntry::Firing(e) => e.seq,
            TraceEntry::Adaptation(a) => a.seq,
        }
    }

    pub fn timestamp(&self) -> u64 {
        match self {
            TraceEntry::Firing(e) => e.timestamp,
            TraceEntry::Adaptation(a) => a.timestamp,
        }
    }

    pub fn as_event(&self) -> Option<&Event> {
        match self {
            TraceEntry::Firing(e) => Some(e),
            TraceEntry::Adaptation(_) => None,
        }
    }
}

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Deterministic clock: `start`, `start + step`, `start + 2 * step`, ...
#[derive(Debug)]
pub struct StepClock {
    next: AtomicU64,
    step: u64,
}

impl StepClock {
    pub fn new(start: u64, step: u64) -> Self {
        Self { next: AtomicU64::new(start), step }
    }
}

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step, Ordering::SeqCst)
    }
}

/// Receives the action of every committed firing.
pub trait EffectSink: Send + Sync {
    fn dispatch(&self, process: &Id, event: &Event);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoEffects;

impl EffectSink for NoEffects {
    fn dispatch(&self, _process: &Id, _event: &Event) {}
}

/// Keeps every dispatched effect; used by tests and the CLI.
#[derive(Debug, Default)]
pub struct RecordingEffects {
    dispatched: Mutex<Vec<(Id, Event)>>,
}

impl RecordingEffects {
    pub fn take(&self) -> Vec<(Id, Event)> {
        std::mem::take(&mut *self.dispatched.lock().expect("effects lock"))
    }
}

impl EffectSink for RecordingEffects {
    fn dispatch(&self, process: &Id, event: &Event) {
        self.dispatched.lock().expect("effects lock").push((process.clone(), event.clone()));
    }
}

/// Clock and effect adapter used while mutating a process.
#[derive(Clone, Copy)]
pub struct ExecCtx<'a> {
    pub clock: &'a dyn Clock,
    pub effects: &'a dyn EffectSink,
}

impl<'a> ExecCtx<'a> {
    pub fn new(clock: &'a dyn Clock) -> Self {
        Self { clock, effects: &NoEffects }
    }

    pub fn with_effects(mut self, effects: &'a dyn EffectSink) -> Self {
        self.effects = effects;
        self
    }
}

/// Result of applying the firing rule to a marking, ignoring roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Firing {
    Fired(Marking),
    NotEnabled,
    Contact(Vec<Id>),
}

pub fn try_fire(interaction: &AbstractInteractionProtocol, marking: &Marking, activity: &str) -> Firing {
    if interaction.activity(activity).is_none() {
        return Firing::NotEnabled;
    }
    let inputs = interaction.inputs(activity);
    if !inputs.is_subset(marking) {
        return Firing::NotEnabled;
    }
    let outputs = interaction.outputs(activity);
    let blocked: Vec<Id> = outputs.difference(&inputs).filter(|s| marking.contains(*s)).cloned().collect();
    if !blocked.is_empty() {
        return Firing::Contact(blocked);
    }
    let mut next: Marking = marking.difference(&inputs).cloned().collect();
    next.extend(outputs);
    Firing::Fired(next)
}

/// Nonempty and contained in the final states.
pub fn is_completed(interaction: &AbstractInteractionProtocol, marking: &Marking) -> bool {
    !marking.is_empty() && marking.is_subset(&interaction.final_states())
}

/// Initial protocol and assignment, kept so the trace can be replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub protocol: ImplementedSocialProtocol,
    pub assignment: RoleAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialProcess {
    pub id: Id,
    pub implemented_protocol_id: Id,
    /// Current (possibly adapted) protocol.
    pub protocol: ImplementedSocialProtocol,
    pub assignment: RoleAssignment,
    pub marking: Marking,
    pub status: ProcessStatus,
    pub trace: Vec<TraceEntry>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_adaptation: Option<Id>,
}

/// Point-in-time view of a process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessSnapshot {
    pub id: Id,
    pub marking: Marking,
    pub status: ProcessStatus,
    pub assignment: RoleAssignment,
    pub trace_len: usize,
}

/// Roles referenced by activities that are missing or empty in `assignment`.
pub(crate) fn unassigned_roles(protocol: &ImplementedSocialProtocol, assignment: &RoleAssignment) -> Vec<String> {
    protocol
        .abstract_protocol
        .roles()
        .into_iter()
        .filter(|role| assignment.get(role.as_str()).is_none_or(BTreeSet::is_empty))
        .map(|r| r.to_string())
        .collect()
}

/// Informational findings about an assignment; never blocks instantiation.
pub fn assignment_report(assignment: &RoleAssignment) -> ValidationReport {
    let mut report = ValidationReport::new();
    for collaborator in assignment.collaborators() {
        let roles = assignment.roles_of(collaborator.as_str());
        if roles.len() > 1 {
            let mut elements = vec![collaborator.to_string()];
            elements.extend(roles.iter().map(|r| r.to_string()));
            report.note("multiple-roles", elements, "collaborator holds several roles");
        }
    }
    report.finish()
}

pub fn instantiate(
    id: Id,
    protocol: &ImplementedSocialProtocol,
    assignment: RoleAssignment,
    environment: &mut SocialEnvironment,
) -> Result<SocialProcess> {
    let report = protocol.validate();
    if !report.is_valid() {
        return Err(Error::ValidationFailed(report));
    }
    for role in assignment.roles() {
        let is_role = protocol
            .abstract_protocol
            .network
            .resource(role.as_str())
            .is_some_and(|r| r.kind == crate::protocol::AbstractResourceKind::Role);
        if !is_role {
            return Err(Error::UnknownRole(role.to_string()));
        }
    }
    let unassigned = unassigned_roles(protocol, &assignment);
    if !unassigned.is_empty() {
        return Err(Error::UnassignedRole(unassigned));
    }
    let unknown: Vec<String> = assignment
        .collaborators()
        .into_iter()
        .filter(|c| !environment.is_person(c.as_str()))
        .map(|c| c.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownCollaborator(unknown));
    }

    let interaction = &protocol.abstract_protocol.interaction;
    let marking = interaction.initial_states();
    let status = if is_completed(interaction, &marking) { ProcessStatus::Completed } else { ProcessStatus::Running };
    let note = assignment_report(&assignment);
    if !note.info.is_empty() {
        tracing::info!(process = %id, "{} collaborator(s) hold several roles", note.info.len());
    }
    let process = SocialProcess {
        id,
        implemented_protocol_id: protocol.id.clone(),
        protocol: protocol.clone(),
        assignment: assignment.clone(),
        marking,
        status,
        trace: Vec::new(),
        origin: Origin { protocol: protocol.clone(), assignment },
        pending_adaptation: None,
    };
    environment.enrich_from_process(&process);
    Ok(process)
}

impl SocialProcess {
    pub fn interaction(&self) -> &AbstractInteractionProtocol {
        &self.protocol.abstract_protocol.interaction
    }

    pub fn next_seq(&self) -> u64 {
        self.trace.len() as u64 + 1
    }

    pub fn is_completed(&self) -> bool {
        self.status == ProcessStatus::Completed
    }

    /// Activities `collaborator` may fire right now, sorted by id.
    pub fn enabled_activities(&self, collaborator: &str) -> Result<Vec<Id>> {
        if self.status != ProcessStatus::Running {
            return Ok(Vec::new());
        }
        if !self.assignment.collaborators().contains(collaborator) {
            return Err(Error::UnknownCollaborator(vec![collaborator.to_string()]));
        }
        let interaction = self.interaction();
        let mut enabled: Vec<Id> = interaction
            .activities
            .iter()
            .filter(|a| self.assignment.holds(collaborator, a.role.as_str()))
            .filter(|a| interaction.inputs(a.id.as_str()).is_subset(&self.marking))
            .map(|a| a.id.clone())
            .collect();
        enabled.sort();
        Ok(enabled)
    }

    /// Enabled activities for every assigned collaborator.
    pub fn enabled_table(&self) -> BTreeMap<Id, Vec<Id>> {
        self.assignment
            .collaborators()
            .into_iter()
            .map(|c| {
                let enabled = self.enabled_activities(c.as_str()).unwrap_or_default();
                (c, enabled)
            })
            .collect()
    }

    pub fn fire(
        &mut self,
        ctx: ExecCtx<'_>,
        collaborator: &str,
        activity: &str,
        payload: Option<Payload>,
    ) -> Result<Event> {
        if self.status != ProcessStatus::Running || self.pending_adaptation.is_some() {
            return Err(Error::ProcessNotRunning(self.id.to_string()));
        }
        let not_enabled =
            || Error::NotEnabled { activity: activity.to_string(), collaborator: collaborator.to_string() };
        let interaction = self.interaction();
        let Some(definition) = interaction.activity(activity) else {
            return Err(not_enabled());
        };
        if !self.assignment.holds(collaborator, definition.role.as_str()) {
            return Err(not_enabled());
        }
        let next = match try_fire(interaction, &self.marking, activity) {
            Firing::Fired(next) => next,
            Firing::NotEnabled => return Err(not_enabled()),
            Firing::Contact(states) => {
                return Err(Error::ContactViolation {
                    activity: activity.to_string(),
                    states: states.iter().map(|s| s.to_string()).collect(),
                })
            }
        };
        let action = self.protocol.action(activity).cloned().unwrap_or_else(ActionDescriptor::manual);
        let event = Event {
            seq: self.next_seq(),
            timestamp: ctx.clock.now_ms(),
            collaborator: Id::new(collaborator)?,
            activity: definition.id.clone(),
            consumed: interaction.inputs(activity),
            produced: interaction.outputs(activity),
            payload,
            action,
        };
        if is_completed(interaction, &next) {
            self.status = ProcessStatus::Completed;
        }
        self.marking = next;
        self.trace.push(TraceEntry::Firing(event.clone()));
        ctx.effects.dispatch(&self.id, &event);
        Ok(event)
    }

    pub fn snapshot(&self) -> ProcessSnapshot {
        ProcessSnapshot {
            id: self.id.clone(),
            marking: self.marking.clone(),
            status: self.status,
            assignment: self.assignment.clone(),
            trace_len: self.trace.len(),
        }
    }

    /// running <-> paused only. Resuming a process whose marking is complete
    /// moves it to completed.
    pub fn set_status(&mut self, status: ProcessStatus) -> Result<()> {
        let illegal = || Error::IllegalTransition { from: self.status.as_str().into(), to: status.as_str().into() };
        match (self.status, status) {
            (ProcessStatus::Running, ProcessStatus::Paused) => {
                self.status = ProcessStatus::Paused;
                Ok(())
            }
            (ProcessStatus::Paused, ProcessStatus::Running) => {
                if let Some(meta) = &self.pending_adaptation {
                    return Err(Error::AdaptationInProgress(meta.to_string()));
                }
                self.resume();
                Ok(())
            }
            _ => Err(illegal()),
        }
    }

    pub(crate) fn resume(&mut self) {
        self.status = if is_completed(self.interaction(), &self.marking) {
            ProcessStatus::Completed
        } else {
            ProcessStatus::Running
        };
    }

    /// Whether the process assigns `resource` or maps a tool onto it. Only
    /// processes that have not completed count as referencing anything.
    pub fn references_resource(&self, resource: &str) -> bool {
        self.status != ProcessStatus::Completed
            && (self.assignment.collaborators().contains(resource)
                || self.protocol.resource_map.values().any(|r| r == resource))
    }

    /// Replays the process's own trace from its origin.
    pub fn replay(&self) -> Result<Marking> {
        replay_trace(&self.origin.protocol, &self.origin.assignment, &self.trace)
    }

    /// Structural and historical consistency of a (possibly deserialized) process.
    pub fn validate(&self) -> ValidationReport {
        let mut report = self.protocol.validate();
        let states = self.interaction().state_ids();
        let strays: Vec<String> = self.marking.difference(&states).map(|s| s.to_string()).collect();
        if !strays.is_empty() {
            report.push("marking-unknown-state", strays, "marked states are not in the protocol");
        }
        let unassigned = unassigned_roles(&self.protocol, &self.assignment);
        if !unassigned.is_empty() {
            report.push("unassigned-role", unassigned, "roles without collaborators");
        }
        let completed = is_completed(self.interaction(), &self.marking);
        let status_ok = match self.status {
            ProcessStatus::Completed => completed,
            ProcessStatus::Running => !completed,
            ProcessStatus::Paused => true,
        };
        if !status_ok {
            report.push("status-mismatch", [self.id.to_string()], "status disagrees with the completion rule");
        }
        if self.pending_adaptation.is_some() && self.status != ProcessStatus::Paused {
            report.push("pending-not-paused", [self.id.to_string()], "a pending adaptation requires a paused process");
        }
        match self.replay() {
            Ok(marking) if marking == self.marking => {}
            Ok(_) => report.push("replay-mismatch", [self.id.to_string()], "trace does not reproduce the marking"),
            Err(e) => report.push("replay-divergence", [self.id.to_string()], e.to_string()),
        }
        report.finish()
    }
}

/// Replays a trace from the initial marking of `protocol`, re-applying every
/// adaptation record at its position. Fails at the first entry that would not
/// have been legal.
pub fn replay_trace(
    protocol: &ImplementedSocialProtocol,
    assignment: &RoleAssignment,
    trace: &[TraceEntry],
) -> Result<Marking> {
    let mut protocol = protocol.clone();
    let mut assignment = assignment.clone();
    let mut marking = protocol.abstract_protocol.interaction.initial_states();
    let mut completed = is_completed(&protocol.abstract_protocol.interaction, &marking);

    for (index, entry) in trace.iter().enumerate() {
        let expected = index as u64 + 1;
        let diverge = |reason: String| Error::ReplayDivergence { seq: expected, reason };
        if entry.seq() != expected {
            return Err(diverge(format!("found sequence number {}", entry.seq())));
        }
        match entry {
            TraceEntry::Firing(event) => {
                if completed {
                    return Err(diverge("firing after completion".into()));
                }
                let interaction = &protocol.abstract_protocol.interaction;
                let role = interaction
                    .activity(event.activity.as_str())
                    .map(|a| a.role.clone())
                    .ok_or_else(|| diverge(format!("unknown activity {}", event.activity)))?;
                if !assignment.holds(event.collaborator.as_str(), role.as_str()) {
                    return Err(diverge(format!("{} does not hold role {role}", event.collaborator)));
                }
                let next = match try_fire(interaction, &marking, event.activity.as_str()) {
                    Firing::Fired(next) => next,
                    Firing::NotEnabled => return Err(diverge(format!("{} not enabled", event.activity))),
                    Firing::Contact(_) => return Err(diverge(format!("{} violates contact", event.activity))),
                };
                if event.consumed != interaction.inputs(event.activity.as_str())
                    || event.produced != interaction.outputs(event.activity.as_str())
                {
                    return Err(diverge("recorded consumed/produced states disagree".into()));
                }
                completed = is_completed(interaction, &next);
                marking = next;
            }
            TraceEntry::Adaptation(record) => {
                if record.prior_version != protocol.version()? {
                    return Err(diverge("prior protocol version mismatch".into()));
                }
                let applied = adaptation::apply_structural(&protocol, &assignment, &marking, &record.transaction)
                    .map_err(|e| diverge(format!("adaptation no longer applies: {e}")))?;
                if applied.protocol.version()? != record.new_version || applied.marking != record.marking_after {
                    return Err(diverge("adaptation result differs from the record".into()));
                }
                protocol = applied.protocol;
                assignment = applied.assignment;
                marking = applied.marking;
                completed = is_completed(&protocol.abstract_protocol.interaction, &marking);
            }
        }
    }
    Ok(marking)
}

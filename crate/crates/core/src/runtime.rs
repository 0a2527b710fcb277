//! Thread-safe engine holding protocols, processes, meta-processes and the
//! social environment.
//!
//! Every process (and meta-process, and the environment) has its own writer
//! lane: mutations on one entity are serialized by a mutex, and each commit
//! publishes an immutable snapshot that readers clone without waiting for
//! writers. Lock order is meta lane, then target process lane, then the
//! environment lane.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::adaptation::{self, EditTransaction, MetaOutcome, MetaProcess};
use crate::environment::{SocialEnvironment, Substitute};
use crate::id::Id;
use crate::implementation::{self, ImplementationRequest, ImplementedResource, ImplementedSocialProtocol};
use crate::library::{ArtifactKind, IndexRecord, Library};
use crate::process::{self, Clock, EffectSink, Event, ExecCtx, NoEffects, Payload, ProcessStatus, RoleAssignment, SocialProcess, SystemClock, TraceEntry};
use crate::protocol::{self, AbstractInteractionProtocol, AbstractSocialNetwork, AbstractSocialProtocol};
use crate::{Error, Result};

/// Claims an id while its artifact is being built and persisted, so that
/// no registry lock is held across I/O.
struct Reservation<'a> {
    set: &'a Mutex<BTreeSet<(ArtifactKind, Id)>>,
    key: (ArtifactKind, Id),
}

impl Drop for Reservation<'_> {
    fn drop(&mut self) {
        self.set.lock().expect("reservations").remove(&self.key);
    }
}

struct Lane<T> {
    writer: Mutex<T>,
    published: RwLock<Arc<T>>,
}

impl<T: Clone> Lane<T> {
    fn new(value: T) -> Self {
        let published = RwLock::new(Arc::new(value.clone()));
        Self { writer: Mutex::new(value), published }
    }

    fn read(&self) -> Arc<T> {
        self.published.read().expect("published snapshot").clone()
    }

    fn publish(&self, value: &T) {
        *self.published.write().expect("published snapshot") = Arc::new(value.clone());
    }
}

/// Called after every committed trace entry, inside the owning lane, so
/// entries of one process arrive in sequence order.
pub type CommitListener = Arc<dyn Fn(&Id, &TraceEntry) + Send + Sync>;

/// Protocol submission: `id` is optional (a content-derived id is used then).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDraft {
    #[serde(default)]
    pub id: Option<Id>,
    pub network: AbstractSocialNetwork,
    pub interaction: AbstractInteractionProtocol,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl From<AbstractSocialProtocol> for ProtocolDraft {
    fn from(p: AbstractSocialProtocol) -> Self {
        Self { id: Some(p.id), network: p.network, interaction: p.interaction, tags: p.tags }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantiateRequest {
    #[serde(default)]
    pub id: Option<Id>,
    pub implemented_protocol_id: Id,
    pub assignment: RoleAssignment,
}

pub struct EngineBuilder {
    clock: Arc<dyn Clock>,
    effects: Arc<dyn EffectSink>,
    library: Option<Library>,
    listeners: Vec<CommitListener>,
}

impl EngineBuilder {
    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn effects(mut self, effects: Arc<dyn EffectSink>) -> Self {
        self.effects = effects;
        self
    }

    pub fn library(mut self, library: Library) -> Self {
        self.library = Some(library);
        self
    }

    pub fn on_commit(mut self, listener: CommitListener) -> Self {
        self.listeners.push(listener);
        self
    }

    /// Builds the engine, restoring whatever the library already holds.
    pub fn build(self) -> Result<Engine> {
        let engine = Engine {
            clock: self.clock,
            effects: self.effects,
            library: self.library,
            listeners: self.listeners,
            environment: Lane::new(SocialEnvironment::new()),
            env_persist: Mutex::new(0),
            env_revision: AtomicU64::new(0),
            abstracts: RwLock::new(BTreeMap::new()),
            implemented: RwLock::new(BTreeMap::new()),
            processes: RwLock::new(BTreeMap::new()),
            metas: RwLock::new(BTreeMap::new()),
            next_process: AtomicU64::new(1),
            next_meta: AtomicU64::new(1),
            reserved: Mutex::new(BTreeSet::new()),
        };
        engine.restore()?;
        Ok(engine)
    }
}

pub struct Engine {
    clock: Arc<dyn Clock>,
    effects: Arc<dyn EffectSink>,
    library: Option<Library>,
    listeners: Vec<CommitListener>,
    environment: Lane<SocialEnvironment>,
    env_persist: Mutex<u64>,
    env_revision: AtomicU64,
    abstracts: RwLock<BTreeMap<Id, Arc<AbstractSocialProtocol>>>,
    implemented: RwLock<BTreeMap<Id, Arc<ImplementedSocialProtocol>>>,
    processes: RwLock<BTreeMap<Id, Arc<Lane<SocialProcess>>>>,
    metas: RwLock<BTreeMap<Id, Arc<Lane<MetaProcess>>>>,
    next_process: AtomicU64,
    next_meta: AtomicU64,
    reserved: Mutex<BTreeSet<(ArtifactKind, Id)>>,
}

const ENVIRONMENT_ENTRY: &str = "default";

impl Engine {
    pub fn builder() -> EngineBuilder {
        EngineBuilder { clock: Arc::new(SystemClock), effects: Arc::new(NoEffects), library: None, listeners: Vec::new() }
    }

    fn ctx(&self) -> ExecCtx<'_> {
        ExecCtx::new(self.clock.as_ref()).with_effects(self.effects.as_ref())
    }

    fn notify(&self, process: &Id, entries: &[TraceEntry]) {
        for entry in entries {
            for listener in &self.listeners {
                listener(process, entry);
            }
        }
    }

    fn restore(&self) -> Result<()> {
        let Some(library) = &self.library else { return Ok(()) };
        for record in library.search_library(None, &[])? {
            match record.kind {
                ArtifactKind::Abstract => {
                    let p: AbstractSocialProtocol = library.load(&record.id)?;
                    self.abstracts.write().expect("abstracts").insert(p.id.clone(), Arc::new(p));
                }
                ArtifactKind::Implemented => {
                    let p: ImplementedSocialProtocol = library.load(&record.id)?;
                    self.implemented.write().expect("implemented").insert(p.id.clone(), Arc::new(p));
                }
                ArtifactKind::Process => {
                    let mut p: SocialProcess = library.load(&record.id)?;
                    if let Some(meta) = p.pending_adaptation.take() {
                        tracing::warn!(process = %p.id, %meta, "meta-process lost on restart; resuming target");
                        p.resume();
                    }
                    bump_counter(&self.next_process, &p.id, 'p');
                    self.processes.write().expect("processes").insert(p.id.clone(), Arc::new(Lane::new(p)));
                }
                ArtifactKind::Environment if record.id == ENVIRONMENT_ENTRY => {
                    let env: SocialEnvironment = library.load(&record.id)?;
                    *self.environment.writer.lock().expect("environment") = env.clone();
                    self.environment.publish(&env);
                }
                ArtifactKind::Environment => {}
            }
        }
        Ok(())
    }

    fn reserve(&self, kind: ArtifactKind, id: &Id) -> Result<Reservation<'_>> {
        let key = (kind, id.clone());
        if !self.reserved.lock().expect("reservations").insert(key.clone()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        Ok(Reservation { set: &self.reserved, key })
    }

    fn persist<T: crate::library::Artifact>(&self, id: &Id, artifact: &T) -> Result<()> {
        match &self.library {
            Some(library) => library.save(id, artifact).map(|_| ()),
            None => Ok(()),
        }
    }

    /// Saves an environment snapshot outside the environment lane, skipping
    /// snapshots older than the last one written.
    fn persist_environment(&self, revision: u64, env: &SocialEnvironment) -> Result<()> {
        let Some(library) = &self.library else { return Ok(()) };
        let mut last = self.env_persist.lock().expect("environment persistence");
        if revision > *last {
            library.save(&Id::new(ENVIRONMENT_ENTRY)?, env)?;
            *last = revision;
        }
        Ok(())
    }

    /// Runs `f` in the environment lane and publishes the result.
    fn with_environment<R>(&self, f: impl FnOnce(&mut SocialEnvironment) -> Result<R>) -> Result<R> {
        let (result, revision, snapshot) = {
            let mut env = self.environment.writer.lock().expect("environment");
            let before = env.clone();
            let result = f(&mut env)?;
            let changed = *env != before;
            let revision = if changed { self.env_revision.fetch_add(1, Ordering::SeqCst) + 1 } else { 0 };
            if changed {
                self.environment.publish(&env);
            }
            (result, revision, changed.then(|| env.clone()))
        };
        if let Some(snapshot) = snapshot {
            self.persist_environment(revision, &snapshot)?;
        }
        Ok(result)
    }

    // ---- protocols ----

    pub fn register_protocol(&self, draft: ProtocolDraft) -> Result<Arc<AbstractSocialProtocol>> {
        let protocol = match draft.id {
            Some(id) => protocol::compose_with_id(id, draft.network, draft.interaction, draft.tags)?,
            None => protocol::compose_abstract_protocol(draft.network, draft.interaction, draft.tags)?,
        };
        let _claim = self.reserve(ArtifactKind::Abstract, &protocol.id)?;
        if let Some(existing) = self.abstracts.read().expect("abstracts").get(&protocol.id) {
            return if **existing == protocol { Ok(existing.clone()) } else { Err(Error::DuplicateId(protocol.id.to_string())) };
        }
        self.persist(&protocol.id, &protocol)?;
        let protocol = Arc::new(protocol);
        self.abstracts.write().expect("abstracts").insert(protocol.id.clone(), protocol.clone());
        Ok(protocol)
    }

    pub fn abstract_protocol(&self, id: &str) -> Result<Arc<AbstractSocialProtocol>> {
        self.abstracts.read().expect("abstracts").get(id).cloned().ok_or_else(|| Error::not_found("protocol", id))
    }

    pub fn implemented_protocol(&self, id: &str) -> Result<Arc<ImplementedSocialProtocol>> {
        self.implemented
            .read()
            .expect("implemented")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found("implemented protocol", id))
    }

    /// Library search over protocols; falls back to the in-memory registry.
    pub fn search_protocols(&self, kind: Option<ArtifactKind>, tags: &[String]) -> Result<Vec<IndexRecord>> {
        if let Some(library) = &self.library {
            return library.search_library(kind, tags);
        }
        let mut records = Vec::new();
        if kind.is_none_or(|k| k == ArtifactKind::Abstract) {
            for p in self.abstracts.read().expect("abstracts").values() {
                records.push(IndexRecord { kind: ArtifactKind::Abstract, id: p.id.clone(), version: crate::canonical::content_hash(&**p)?, tags: p.tags.clone() });
            }
        }
        if kind.is_none_or(|k| k == ArtifactKind::Implemented) {
            for p in self.implemented.read().expect("implemented").values() {
                records.push(IndexRecord { kind: ArtifactKind::Implemented, id: p.id.clone(), version: p.version()?, tags: p.abstract_protocol.tags.clone() });
            }
        }
        records.retain(|r| tags.iter().all(|t| r.tags.contains(t)));
        records.sort_by(|a, b| a.id.cmp(&b.id).then(a.kind.cmp(&b.kind)));
        Ok(records)
    }

    pub fn implement(&self, abstract_id: &str, request: ImplementationRequest) -> Result<Arc<ImplementedSocialProtocol>> {
        let abstract_protocol = self.abstract_protocol(abstract_id)?;
        let id = match request.id {
            Some(id) => id,
            None => Id::new(format!("{abstract_id}-impl-{}", self.implemented.read().expect("implemented").len() + 1))?,
        };
        let _claim = self.reserve(ArtifactKind::Implemented, &id)?;
        if self.implemented.read().expect("implemented").contains_key(&id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let implemented = self.with_environment(|env| {
            implementation::implement_protocol(
                id,
                &abstract_protocol,
                request.resource_map,
                request.activity_map,
                request.new_resources,
                env,
            )
        })?;
        self.persist(&implemented.id, &implemented)?;
        let implemented = Arc::new(implemented);
        self.implemented.write().expect("implemented").insert(implemented.id.clone(), implemented.clone());
        Ok(implemented)
    }

    /// Registers an already implemented protocol (e.g. loaded from a file).
    pub fn register_implemented(&self, protocol: ImplementedSocialProtocol) -> Result<Arc<ImplementedSocialProtocol>> {
        let report = protocol.validate();
        if !report.is_valid() {
            return Err(Error::ValidationFailed(report));
        }
        let _claim = self.reserve(ArtifactKind::Implemented, &protocol.id)?;
        if let Some(existing) = self.implemented.read().expect("implemented").get(&protocol.id) {
            return if **existing == protocol { Ok(existing.clone()) } else { Err(Error::DuplicateId(protocol.id.to_string())) };
        }
        self.persist(&protocol.id, &protocol)?;
        let protocol = Arc::new(protocol);
        self.implemented.write().expect("implemented").insert(protocol.id.clone(), protocol.clone());
        Ok(protocol)
    }

    // ---- processes ----

    fn lane(&self, id: &str) -> Result<Arc<Lane<SocialProcess>>> {
        self.processes.read().expect("processes").get(id).cloned().ok_or_else(|| Error::not_found("process", id))
    }

    fn meta_lane(&self, id: &str) -> Result<Arc<Lane<MetaProcess>>> {
        self.metas.read().expect("metas").get(id).cloned().ok_or_else(|| Error::not_found("meta-process", id))
    }

    /// Processes and meta-processes share one id namespace.
    fn claim_process_id(&self, id: &Id) -> Result<Reservation<'_>> {
        let claim = self.reserve(ArtifactKind::Process, id)?;
        let taken = self.processes.read().expect("processes").contains_key(id)
            || self.metas.read().expect("metas").contains_key(id);
        if taken {
            return Err(Error::DuplicateId(id.to_string()));
        }
        Ok(claim)
    }

    fn fresh_id(&self, counter: &AtomicU64, prefix: char) -> Result<Id> {
        loop {
            let candidate = Id::new(format!("{prefix}{}", counter.fetch_add(1, Ordering::SeqCst)))?;
            let taken = self.processes.read().expect("processes").contains_key(&candidate)
                || self.metas.read().expect("metas").contains_key(&candidate);
            if !taken {
                return Ok(candidate);
            }
        }
    }

    pub fn instantiate(&self, request: InstantiateRequest) -> Result<Arc<SocialProcess>> {
        let protocol = self.implemented_protocol(request.implemented_protocol_id.as_str())?;
        let id = match request.id {
            Some(id) => id,
            None => self.fresh_id(&self.next_process, 'p')?,
        };
        let _claim = self.claim_process_id(&id)?;
        let process = self.with_environment(|env| process::instantiate(id.clone(), &protocol, request.assignment, env))?;
        self.persist(&process.id, &process)?;
        let lane = Arc::new(Lane::new(process));
        let snapshot = lane.read();
        self.processes.write().expect("processes").insert(id, lane);
        Ok(snapshot)
    }

    pub fn process(&self, id: &str) -> Result<Arc<SocialProcess>> {
        Ok(self.lane(id)?.read())
    }

    pub fn process_ids(&self) -> Vec<Id> {
        self.processes.read().expect("processes").keys().cloned().collect()
    }

    pub fn enabled(&self, process: &str, collaborator: &str) -> Result<Vec<Id>> {
        self.process(process)?.enabled_activities(collaborator)
    }

    /// Runs a mutation in a process lane; commits, persists and notifies on success.
    fn mutate_process<R>(&self, id: &str, f: impl FnOnce(&mut SocialProcess) -> Result<R>) -> Result<R> {
        let lane = self.lane(id)?;
        let mut process = lane.writer.lock().expect("process lane");
        let before = process.trace.len();
        let result = f(&mut process)?;
        self.persist(&process.id, &*process)?;
        lane.publish(&process);
        self.notify(&process.id, &process.trace[before..]);
        Ok(result)
    }

    pub fn fire(&self, process: &str, collaborator: &str, activity: &str, payload: Option<Payload>) -> Result<Event> {
        self.mutate_process(process, |p| p.fire(self.ctx(), collaborator, activity, payload))
    }

    pub fn set_status(&self, process: &str, status: ProcessStatus) -> Result<Arc<SocialProcess>> {
        self.mutate_process(process, |p| p.set_status(status))?;
        self.process(process)
    }

    /// Applies a transaction directly to a paused process.
    pub fn apply_transaction(&self, process: &str, txn: &EditTransaction) -> Result<Arc<SocialProcess>> {
        self.mutate_process(process, |p| {
            self.with_environment(|env| adaptation::apply_transaction(p, txn, env, self.ctx()))
        })?;
        self.process(process)
    }

    pub fn trace_since(&self, process: &str, after_seq: u64) -> Result<Vec<TraceEntry>> {
        let snapshot = self.lane(process).map(|l| l.read()).or_else(|_| self.meta(process).map(|m| Arc::new(m.meta.clone())))?;
        Ok(snapshot.trace.iter().filter(|e| e.seq() > after_seq).cloned().collect())
    }

    // ---- meta-processes ----

    pub fn start_meta(&self, target: &str, participants: RoleAssignment, id: Option<Id>) -> Result<Arc<MetaProcess>> {
        let id = match id {
            Some(id) => id,
            None => self.fresh_id(&self.next_meta, 'm')?,
        };
        let _claim = self.claim_process_id(&id)?;
        let meta = self.mutate_process(target, |p| {
            self.with_environment(|env| adaptation::start_meta_process(id.clone(), p, participants, env))
        })?;
        let lane = Arc::new(Lane::new(meta));
        let snapshot = lane.read();
        self.metas.write().expect("metas").insert(id, lane);
        Ok(snapshot)
    }

    pub fn meta(&self, id: &str) -> Result<Arc<MetaProcess>> {
        Ok(self.meta_lane(id)?.read())
    }

    pub fn fire_meta(&self, meta: &str, collaborator: &str, activity: &str, payload: Option<Payload>) -> Result<Event> {
        let lane = self.meta_lane(meta)?;
        let mut guard = lane.writer.lock().expect("meta lane");
        let event = guard.fire(self.ctx(), collaborator, activity, payload)?;
        lane.publish(&guard);
        self.notify(&guard.meta.id, std::slice::from_ref(guard.meta.trace.last().expect("just fired")));
        Ok(event)
    }

    /// Concludes a decided meta-process. The resolved outcome is returned even
    /// when the accepted transaction fails; the error is surfaced separately.
    pub fn conclude_meta(&self, meta: &str) -> Result<(MetaOutcome, Arc<SocialProcess>)> {
        let lane = self.meta_lane(meta)?;
        let mut guard = lane.writer.lock().expect("meta lane");
        let target = guard.target.clone();
        let target_lane = self.lane(target.as_str())?;
        let mut process = target_lane.writer.lock().expect("process lane");
        let before = process.trace.len();
        let result = self.with_environment(|env| {
            Ok(adaptation::conclude_meta_process(&mut guard, &mut process, env, self.ctx()))
        })?;
        if guard.outcome != MetaOutcome::Pending {
            self.persist(&process.id, &*process)?;
            target_lane.publish(&process);
            lane.publish(&guard);
            self.notify(&process.id, &process.trace[before..]);
        }
        let outcome = result?;
        Ok((outcome, target_lane.read()))
    }

    // ---- environment ----

    pub fn environment(&self) -> Arc<SocialEnvironment> {
        self.environment.read()
    }

    pub fn add_resource(&self, resource: ImplementedResource) -> Result<()> {
        self.with_environment(|env| env.add_resource(resource))
    }

    pub fn add_relation(&self, source: &Id, target: &Id, label: &str) -> Result<bool> {
        self.with_environment(|env| env.add_relation(source, target, label))
    }

    pub fn remove_resource(&self, id: &str) -> Result<ImplementedResource> {
        let live: Vec<Arc<SocialProcess>> =
            self.processes.read().expect("processes").values().map(|l| l.read()).collect();
        let metas: Vec<Arc<MetaProcess>> = self.metas.read().expect("metas").values().map(|l| l.read()).collect();
        self.with_environment(|env| {
            env.remove_resource(id, live.iter().map(|p| &**p).chain(metas.iter().map(|m| &m.meta)))
        })
    }

    pub fn substitutes(&self, role: &str, unavailable: &str, process: &str, max_depth: usize) -> Result<Vec<Substitute>> {
        let process = self.process(process)?;
        self.environment().find_substitutes_verbose(role, unavailable, &process, max_depth)
    }

    /// Replaces the environment wholesale (imports).
    pub fn import_environment(&self, env: SocialEnvironment) -> Result<()> {
        self.with_environment(|current| {
            *current = env;
            Ok(())
        })
    }
}

fn bump_counter(counter: &AtomicU64, id: &Id, prefix: char) {
    if let Some(n) = id.as_str().strip_prefix(prefix).and_then(|rest| rest.parse::<u64>().ok()) {
        counter.fetch_max(n + 1, Ordering::SeqCst);
    }
}

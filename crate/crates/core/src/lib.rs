//! Social protocols: role-bound elementary-net interaction protocols, their
//! implementation onto concrete people and systems, running process
//! instances, and run-time adaptation through meta-processes.

pub mod adaptation;
pub mod canonical;
pub mod environment;
pub mod error;
pub mod fixtures;
pub mod id;
pub mod implementation;
pub mod library;
pub mod process;
pub mod protocol;
pub mod report;
pub mod runtime;

pub use adaptation::{
    apply_structural, apply_transaction, conclude_meta_process, meta_protocol, start_meta_process,
    start_meta_process_with, AdaptationRecord, Edit, EditTransaction, MetaOutcome, MetaProcess,
};
pub use environment::{SocialEnvironment, Substitute};
pub use error::{Error, Result};
pub use id::Id;
pub use implementation::{
    implement_protocol, ActionDescriptor, ActionKind, ImplementationRequest, ImplementedResource,
    ImplementedResourceKind, ImplementedSocialProtocol,
};
pub use library::{ArtifactKind, IndexRecord, Library};
pub use process::{
    instantiate, Clock, Event, ExecCtx, Marking, Payload, ProcessStatus, RoleAssignment, SocialProcess, StepClock,
    SystemClock, TraceEntry,
};
pub use protocol::{
    compose_abstract_protocol, AbstractActivity, AbstractInteractionProtocol, AbstractResource, AbstractSocialNetwork,
    AbstractSocialProtocol, Edge, Relation, StateNode,
};
pub use report::{ValidationReport, Violation};
pub use runtime::{Engine, EngineBuilder, InstantiateRequest, ProtocolDraft};

//! Scenario files: a protocol, an assignment and a list of steps to fire
//! against a fresh process, each with an expectation.
//!
//! ```json
//! {
//!   "protocol": "brainstorming-manual.json",
//!   "environment": "environment.json",
//!   "assignment": { "chairman": ["john"], "participant": ["ann", "bob", "cecil"] },
//!   "steps": [
//!     { "actor": "ann", "activity": "present-problem", "expect": "error:NOT_ENABLED" },
//!     { "actor": "john", "activity": "present-problem", "expect": "ok" },
//!     { "actor": "john", "activity": "summarize", "expect": "marking:closed" }
//!   ]
//! }
//! ```
//!
//! Paths are relative to the scenario file. `protocol` may hold an abstract
//! protocol (implemented with manual actions) or an implemented one. Without
//! `environment`, every assigned collaborator is registered as a person.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use socproto_core::id::id;
use socproto_core::implementation::manual_activity_map;
use socproto_core::{
    instantiate, AbstractSocialProtocol, ExecCtx, Id, ImplementedResource, ImplementedSocialProtocol, Marking, Payload,
    ProcessStatus, RoleAssignment, SocialEnvironment, SocialProcess, StepClock,
};

use crate::detect::{detect_kind, DocumentKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    Ok,
    Error(String),
    Marking(Marking),
}

impl FromStr for Expectation {
    type Err = String;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        if raw == "ok" {
            return Ok(Expectation::Ok);
        }
        if let Some(code) = raw.strip_prefix("error:") {
            let valid = !code.is_empty() && code.chars().all(|c| c.is_ascii_uppercase() || c == '_');
            return if valid { Ok(Expectation::Error(code.to_string())) } else { Err(format!("bad error code in {raw:?}")) };
        }
        if let Some(states) = raw.strip_prefix("marking:") {
            let mut marking = Marking::new();
            for state in states.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                marking.insert(Id::new(state).map_err(|e| e.to_string())?);
            }
            return Ok(Expectation::Marking(marking));
        }
        Err(format!("expectation {raw:?} is not ok, error:<CODE> or marking:<states>"))
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Ok => f.write_str("ok"),
            Expectation::Error(code) => write!(f, "error:{code}"),
            Expectation::Marking(m) => {
                let states: Vec<&str> = m.iter().map(Id::as_str).collect();
                write!(f, "marking:{}", states.join(","))
            }
        }
    }
}

impl Serialize for Expectation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expectation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub actor: String,
    pub activity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub protocol: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<PathBuf>,
    pub assignment: RoleAssignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_id: Option<Id>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub actor: String,
    pub activity: String,
    pub expect: Expectation,
    /// `ok` or `error:<CODE>`.
    pub outcome: String,
    pub marking: Marking,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub steps: Vec<StepReport>,
    pub passed: bool,
    /// Index of the first failing step; later steps are not run.
    pub failed_step: Option<usize>,
    pub process: SocialProcess,
}

/// Failures that prevent a scenario from running at all.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} is not valid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Content { path: PathBuf, message: String },
    #[error("{0}")]
    Engine(#[from] socproto_core::Error),
}

impl LoadError {
    /// Content errors are validation failures; everything else is I/O.
    pub fn is_validation(&self) -> bool {
        matches!(self, LoadError::Content { .. } | LoadError::Engine(_))
    }
}

pub fn read_json(path: &Path) -> Result<Value, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| LoadError::Json { path: path.to_path_buf(), source })
}

fn decode<T: serde::de::DeserializeOwned>(path: &Path, value: Value) -> Result<T, LoadError> {
    serde_json::from_value(value).map_err(|e| LoadError::Content { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let scenario: Scenario = decode(path, read_json(path)?)?;
    if scenario.steps.is_empty() {
        return Err(LoadError::Content { path: path.to_path_buf(), message: "a scenario needs at least one step".into() });
    }
    Ok(scenario)
}

/// Loads an implemented protocol, implementing an abstract one with manual actions.
pub fn load_protocol(path: &Path) -> Result<ImplementedSocialProtocol, LoadError> {
    let value = read_json(path)?;
    match detect_kind(&value) {
        Some(DocumentKind::Implemented) => decode(path, value),
        Some(DocumentKind::Abstract) => {
            let abstract_protocol: AbstractSocialProtocol = decode(path, value)?;
            let report = abstract_protocol.validate();
            if !report.is_valid() {
                return Err(socproto_core::Error::ValidationFailed(report).into());
            }
            let activity_map = manual_activity_map(&abstract_protocol);
            Ok(ImplementedSocialProtocol {
                id: Id::new(format!("{}-manual", abstract_protocol.id))?,
                abstract_protocol,
                resource_map: Default::default(),
                activity_map,
            })
        }
        _ => Err(LoadError::Content { path: path.to_path_buf(), message: "not a social protocol".into() }),
    }
}

fn resolve(base: &Path, relative: &Path) -> PathBuf {
    if relative.is_absolute() {
        relative.to_path_buf()
    } else {
        base.join(relative)
    }
}

/// Everything a scenario needs, loaded and ready to run.
pub struct Prepared {
    pub scenario: Scenario,
    pub protocol: ImplementedSocialProtocol,
    pub environment: SocialEnvironment,
}

pub fn prepare(path: &Path) -> Result<Prepared, LoadError> {
    let scenario = load_scenario(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let protocol = load_protocol(&resolve(base, &scenario.protocol))?;
    let environment = match &scenario.environment {
        Some(env) => {
            let env_path = resolve(base, env);
            decode(&env_path, read_json(&env_path)?)?
        }
        None => {
            let mut env = SocialEnvironment::new();
            for person in scenario.assignment.collaborators() {
                let label = person.to_string();
                env.add_resource(ImplementedResource::person(person, label))?;
            }
            env
        }
    };
    Ok(Prepared { scenario, protocol, environment })
}

/// Runs the steps against a fresh instance, stopping at the first mismatch.
/// Timestamps come from a clock starting at 0 and advancing 1 ms per event.
pub fn run_prepared(prepared: Prepared) -> Result<ScenarioReport, LoadError> {
    let Prepared { scenario, protocol, mut environment } = prepared;
    let process_id = scenario.process_id.clone().unwrap_or_else(|| id("p1"));
    let mut process = instantiate(process_id, &protocol, scenario.assignment.clone(), &mut environment)?;
    let clock = StepClock::new(0, 1);
    let mut steps = Vec::new();
    let mut failed_step = None;
    for (index, step) in scenario.steps.iter().enumerate() {
        let result = process.fire(ExecCtx::new(&clock), &step.actor, &step.activity, step.payload.clone());
        let outcome = match &result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error:{}", e.code()),
        };
        let passed = match &step.expect {
            Expectation::Ok => result.is_ok(),
            Expectation::Error(code) => result.as_ref().err().is_some_and(|e| e.code() == code),
            Expectation::Marking(m) => result.is_ok() && process.marking == *m,
        };
        tracing::debug!(index, actor = %step.actor, activity = %step.activity, %outcome, passed, "step");
        steps.push(StepReport {
            index,
            actor: step.actor.clone(),
            activity: step.activity.clone(),
            expect: step.expect.clone(),
            outcome,
            marking: process.marking.clone(),
            passed,
        });
        if !passed {
            failed_step = Some(index);
            break;
        }
    }
    Ok(ScenarioReport { steps, passed: failed_step.is_none(), failed_step, process })
}

pub fn run_scenario(path: &Path) -> Result<ScenarioReport, LoadError> {
    run_prepared(prepare(path)?)
}

impl ScenarioReport {
    pub fn status(&self) -> ProcessStatus {
        self.process.status
    }
}

//! Binding an abstract protocol to concrete systems and action descriptors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::environment::SocialEnvironment;
use crate::id::Id;
use crate::protocol::{AbstractResourceKind, AbstractSocialProtocol};
use crate::report::ValidationReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImplementedResourceKind {
    Person,
    System,
}

/// A concrete person or information system living in the social environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplementedResource {
    pub id: Id,
    pub kind: ImplementedResourceKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<String>,
}

impl ImplementedResource {
    pub fn person(id: Id, label: impl Into<String>) -> Self {
        Self { id, kind: ImplementedResourceKind::Person, label: label.into(), locator: None }
    }

    pub fn system(id: Id, label: impl Into<String>, locator: impl Into<String>) -> Self {
        Self {
            id,
            kind: ImplementedResourceKind::System,
            label: label.into(),
            locator: Some(locator.into()),
        }
    }

    pub fn is_person(&self) -> bool {
        self.kind == ImplementedResourceKind::Person
    }

    pub fn check(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        match (self.kind, &self.locator) {
            (ImplementedResourceKind::System, None) => {
                report.push("locator-missing", [self.id.to_string()], "systems need a locator")
            }
            (ImplementedResourceKind::System, Some(l)) if l.trim().is_empty() => {
                report.push("locator-missing", [self.id.to_string()], "systems need a nonempty locator")
            }
            (ImplementedResourceKind::Person, Some(_)) => {
                report.push("locator-forbidden", [self.id.to_string()], "persons carry no locator")
            }
            _ => {}
        }
        report.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    /// Performed by the human out of band; the engine only records it.
    Manual,
    HttpCall,
    MessagePost,
}

/// Declarative description of what performing an activity means.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub action_kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl ActionDescriptor {
    pub fn manual() -> Self {
        Self { action_kind: ActionKind::Manual, target: None, parameters: BTreeMap::new() }
    }

    pub fn http_call(target: impl Into<String>) -> Self {
        Self { action_kind: ActionKind::HttpCall, target: Some(target.into()), parameters: BTreeMap::new() }
    }

    pub fn message_post(target: impl Into<String>) -> Self {
        Self { action_kind: ActionKind::MessagePost, target: Some(target.into()), parameters: BTreeMap::new() }
    }

    pub fn with_parameter(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.parameters.insert(key.into(), value.into());
        self
    }

    pub fn is_well_formed(&self) -> bool {
        match self.action_kind {
            ActionKind::Manual => self.target.is_none(),
            _ => self.target.as_deref().is_some_and(|t| !t.trim().is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplementedSocialProtocol {
    pub id: Id,
    pub abstract_protocol: AbstractSocialProtocol,
    #[serde(default)]
    pub resource_map: BTreeMap<Id, Id>,
    pub activity_map: BTreeMap<Id, ActionDescriptor>,
}

impl ImplementedSocialProtocol {
    pub fn abstract_protocol_id(&self) -> &Id {
        &self.abstract_protocol.id
    }

    /// Content hash of the canonical serialization.
    pub fn version(&self) -> Result<String> {
        canonical::content_hash(self)
    }

    pub fn action(&self, activity: &str) -> Option<&ActionDescriptor> {
        self.activity_map.get(activity)
    }

    /// Structural validity of the abstract part plus mapping completeness.
    /// Environment membership of mapped resources is not checked here.
    pub fn validate(&self) -> ValidationReport {
        let mut report = self.abstract_protocol.validate();
        report.extend(completeness_report(&self.abstract_protocol, &self.resource_map, &self.activity_map));
        report.finish()
    }
}

/// Pure totality check of the two mappings against an abstract protocol.
pub fn completeness_report(
    abstract_protocol: &AbstractSocialProtocol,
    resource_map: &BTreeMap<Id, Id>,
    activity_map: &BTreeMap<Id, ActionDescriptor>,
) -> ValidationReport {
    let mut report = ValidationReport::new();
    let interaction = &abstract_protocol.interaction;

    for activity in &interaction.activities {
        match activity_map.get(&activity.id) {
            None => report.push("unmapped-activity", [activity.id.to_string()], "activity has no action descriptor"),
            Some(action) if !action.is_well_formed() => report.push(
                "invalid-action",
                [activity.id.to_string()],
                "manual actions take no target; other kinds need a nonempty target",
            ),
            Some(_) => {}
        }
    }
    for key in activity_map.keys() {
        if interaction.activity(key.as_str()).is_none() {
            report.push("unknown-activity", [key.to_string()], "mapped activity does not exist");
        }
    }
    for tool in abstract_protocol.tools() {
        if !resource_map.contains_key(&tool) {
            report.push("unmapped-tool", [tool.to_string()], "tool has no implemented resource");
        }
    }
    for key in resource_map.keys() {
        match abstract_protocol.network.resource(key.as_str()) {
            None => report.push("unknown-abstract-resource", [key.to_string()], "mapped resource is not in the network"),
            Some(r) if r.kind == AbstractResourceKind::Role => report.push(
                "role-mapped",
                [key.to_string()],
                "roles are bound to collaborators at instantiation, not here",
            ),
            Some(_) => {}
        }
    }
    report.finish()
}

/// Everything needed to implement an abstract protocol.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImplementationRequest {
    pub id: Option<Id>,
    #[serde(default)]
    pub resource_map: BTreeMap<Id, Id>,
    #[serde(default)]
    pub activity_map: BTreeMap<Id, ActionDescriptor>,
    /// Implemented resources to register in the environment if missing.
    #[serde(default)]
    pub new_resources: Vec<ImplementedResource>,
}

pub fn implement_protocol(
    id: Id,
    abstract_protocol: &AbstractSocialProtocol,
    resource_map: BTreeMap<Id, Id>,
    activity_map: BTreeMap<Id, ActionDescriptor>,
    new_resources: Vec<ImplementedResource>,
    environment: &mut SocialEnvironment,
) -> Result<ImplementedSocialProtocol> {
    let structural = abstract_protocol.validate();
    if !structural.is_valid() {
        return Err(Error::ValidationFailed(structural));
    }

    let completeness = completeness_report(abstract_protocol, &resource_map, &activity_map);
    let unmapped: Vec<String> = completeness
        .violations
        .iter()
        .filter(|v| v.rule == "unmapped-activity" || v.rule == "unmapped-tool")
        .flat_map(|v| v.elements.iter().cloned())
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::IncompleteMapping(unmapped, completeness));
    }
    if !completeness.is_valid() {
        return Err(Error::ValidationFailed(completeness));
    }

    let mut to_register = Vec::new();
    let mut supplied = BTreeMap::new();
    for resource in new_resources {
        let report = resource.check();
        if !report.is_valid() {
            return Err(Error::ValidationFailed(report));
        }
        match environment.resource(resource.id.as_str()) {
            Some(existing) if *existing == resource => {}
            Some(_) => return Err(Error::ResourceConflict(resource.id.to_string())),
            None => to_register.push(resource.clone()),
        }
        supplied.insert(resource.id.clone(), resource);
    }

    let mut missing = Vec::new();
    let mut wrong_kind = ValidationReport::new();
    for (abstract_id, target) in &resource_map {
        let resolved = environment.resource(target.as_str()).or_else(|| supplied.get(target));
        match resolved {
            None => missing.push(target.to_string()),
            Some(r) if r.kind != ImplementedResourceKind::System => wrong_kind.push(
                "target-kind",
                [abstract_id.to_string(), target.to_string()],
                "system classes map to systems only",
            ),
            Some(_) => {}
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnknownResource(missing));
    }
    let wrong_kind = wrong_kind.finish();
    if !wrong_kind.is_valid() {
        return Err(Error::ValidationFailed(wrong_kind));
    }

    for resource in to_register {
        environment.add_resource(resource)?;
    }

    Ok(ImplementedSocialProtocol {
        id,
        abstract_protocol: abstract_protocol.clone(),
        resource_map,
        activity_map,
    })
}

/// Maps every activity to a manual action; handy for protocols with no tools.
pub fn manual_activity_map(abstract_protocol: &AbstractSocialProtocol) -> BTreeMap<Id, ActionDescriptor> {
    abstract_protocol
        .interaction
        .activities
        .iter()
        .map(|a| (a.id.clone(), ActionDescriptor::manual()))
        .collect()
}

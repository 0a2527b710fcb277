//! Abstract social protocols: an abstract social network over roles and
//! information-system classes, paired with an abstract interaction protocol.
//!
//! The interaction protocol is a bipartite directed graph of states and
//! role-bound activities. Read as an elementary net, states are places and
//! each activity (with its role) is a transition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::id::Id;
use crate::report::ValidationReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbstractResourceKind {
    Role,
    SystemClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractResource {
    pub id: Id,
    pub kind: AbstractResourceKind,
    pub label: String,
}

impl AbstractResource {
    pub fn role(id: Id, label: impl Into<String>) -> Self {
        Self { id, kind: AbstractResourceKind::Role, label: label.into() }
    }

    pub fn system_class(id: Id, label: impl Into<String>) -> Self {
        Self { id, kind: AbstractResourceKind::SystemClass, label: label.into() }
    }
}

/// Directed, labeled relation between two resources. Labels are free-form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub source: Id,
    pub target: Id,
    pub label: String,
}

impl Relation {
    pub fn new(source: Id, target: Id, label: impl Into<String>) -> Self {
        Self { source, target, label: label.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractSocialNetwork {
    pub resources: Vec<AbstractResource>,
    pub relations: Vec<Relation>,
}

impl AbstractSocialNetwork {
    pub fn resource(&self, id: &str) -> Option<&AbstractResource> {
        self.resources.iter().find(|r| r.id == *id)
    }

    pub fn roles(&self) -> impl Iterator<Item = &AbstractResource> {
        self.resources.iter().filter(|r| r.kind == AbstractResourceKind::Role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateNode {
    pub id: Id,
    pub label: String,
    #[serde(default)]
    pub is_initial: bool,
    /// Only consulted for completion reporting; firing ignores it.
    #[serde(default)]
    pub is_final: bool,
}

impl StateNode {
    pub fn new(id: Id, label: impl Into<String>) -> Self {
        Self { id, label: label.into(), is_initial: false, is_final: false }
    }

    pub fn initial(mut self) -> Self {
        self.is_initial = true;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.is_final = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractActivity {
    pub id: Id,
    pub label: String,
    pub role: Id,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<Id>,
}

impl AbstractActivity {
    pub fn new(id: Id, label: impl Into<String>, role: Id) -> Self {
        Self { id, label: label.into(), role, tool: None }
    }

    pub fn with_tool(mut self, tool: Id) -> Self {
        self.tool = Some(tool);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: Id,
    pub to: Id,
}

impl Edge {
    pub fn new(from: Id, to: Id) -> Self {
        Self { from, to }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    State,
    Activity,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractInteractionProtocol {
    pub states: Vec<StateNode>,
    pub activities: Vec<AbstractActivity>,
    pub edges: Vec<Edge>,
}

impl AbstractInteractionProtocol {
    pub fn state(&self, id: &str) -> Option<&StateNode> {
        self.states.iter().find(|s| s.id == *id)
    }

    pub fn activity(&self, id: &str) -> Option<&AbstractActivity> {
        self.activities.iter().find(|a| a.id == *id)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.state(id).is_some() {
            Some(NodeKind::State)
        } else if self.activity(id).is_some() {
            Some(NodeKind::Activity)
        } else {
            None
        }
    }

    /// States with an edge into `activity`.
    pub fn inputs(&self, activity: &str) -> BTreeSet<Id> {
        self.edges
            .iter()
            .filter(|e| e.to == *activity && self.state(e.from.as_str()).is_some())
            .map(|e| e.from.clone())
            .collect()
    }

    /// States with an edge out of `activity`.
    pub fn outputs(&self, activity: &str) -> BTreeSet<Id> {
        self.edges
            .iter()
            .filter(|e| e.from == *activity && self.state(e.to.as_str()).is_some())
            .map(|e| e.to.clone())
            .collect()
    }

    pub fn initial_states(&self) -> BTreeSet<Id> {
        self.states.iter().filter(|s| s.is_initial).map(|s| s.id.clone()).collect()
    }

    pub fn final_states(&self) -> BTreeSet<Id> {
        self.states.iter().filter(|s| s.is_final).map(|s| s.id.clone()).collect()
    }

    pub fn state_ids(&self) -> BTreeSet<Id> {
        self.states.iter().map(|s| s.id.clone()).collect()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.iter().any(|e| e.from == *from && e.to == *to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractSocialProtocol {
    pub id: Id,
    pub network: AbstractSocialNetwork,
    pub interaction: AbstractInteractionProtocol,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

impl AbstractSocialProtocol {
    pub fn roles(&self) -> BTreeSet<Id> {
        self.interaction.activities.iter().map(|a| a.role.clone()).collect()
    }

    pub fn tools(&self) -> BTreeSet<Id> {
        self.interaction.activities.iter().filter_map(|a| a.tool.clone()).collect()
    }

    /// Every structural and cross-reference check in one report.
    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_social_network(&self.network);
        report.extend(validate_interaction_protocol(&self.interaction));
        report.extend(cross_reference_report(&self.network, &self.interaction));
        report.finish()
    }
}

pub fn validate_interaction_protocol(interaction: &AbstractInteractionProtocol) -> ValidationReport {
    let mut report = ValidationReport::new();

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for node in interaction
        .states
        .iter()
        .map(|s| s.id.as_str())
        .chain(interaction.activities.iter().map(|a| a.id.as_str()))
    {
        *seen.entry(node).or_default() += 1;
    }
    for (node, count) in &seen {
        if *count > 1 {
            report.push("duplicate-id", [*node], format!("node id used {count} times"));
        }
    }

    let mut edge_count: BTreeMap<&Edge, usize> = BTreeMap::new();
    for edge in &interaction.edges {
        *edge_count.entry(edge).or_default() += 1;
        let from = interaction.node_kind(edge.from.as_str());
        let to = interaction.node_kind(edge.to.as_str());
        let endpoints = [edge.from.to_string(), edge.to.to_string()];
        match (from, to) {
            (None, _) | (_, None) => {
                let missing = [(&edge.from, from), (&edge.to, to)]
                    .into_iter()
                    .filter(|(_, k)| k.is_none())
                    .map(|(id, _)| id.to_string());
                report.push("unknown-node", missing, format!("edge {} -> {} has an unknown endpoint", edge.from, edge.to));
            }
            (Some(NodeKind::State), Some(NodeKind::State)) => {
                report.push("bipartite", endpoints, "edge connects two states");
            }
            (Some(NodeKind::Activity), Some(NodeKind::Activity)) => {
                report.push("bipartite", endpoints, "edge connects two activities");
            }
            _ => {}
        }
    }
    for (edge, count) in edge_count {
        if count > 1 {
            report.push(
                "duplicate-edge",
                [edge.from.to_string(), edge.to.to_string()],
                format!("edge listed {count} times"),
            );
        }
    }

    if !interaction.states.iter().any(|s| s.is_initial) {
        report.push("no-initial-state", Vec::<String>::new(), "no state is marked initial");
    }

    for activity in &interaction.activities {
        let has_input = !interaction.inputs(activity.id.as_str()).is_empty();
        let has_output = !interaction.outputs(activity.id.as_str()).is_empty();
        let problem = match (has_input, has_output) {
            (true, true) => continue,
            (false, true) => "activity has no incoming edge from a state",
            (true, false) => "activity has no outgoing edge to a state",
            (false, false) => "activity has neither incoming nor outgoing edges",
        };
        report.push("activity-dangling", [activity.id.to_string()], problem);
    }

    let unreachable = disconnected_nodes(interaction);
    if !unreachable.is_empty() {
        report.push("disconnected", unreachable, "nodes not connected to the rest of the protocol");
    }

    report.finish()
}

/// Nodes outside the undirected component of the first node, sorted.
fn disconnected_nodes(interaction: &AbstractInteractionProtocol) -> Vec<String> {
    let nodes: BTreeSet<&str> = interaction
        .states
        .iter()
        .map(|s| s.id.as_str())
        .chain(interaction.activities.iter().map(|a| a.id.as_str()))
        .collect();
    let Some(start) = interaction
        .states
        .first()
        .map(|s| s.id.as_str())
        .or_else(|| interaction.activities.first().map(|a| a.id.as_str()))
    else {
        return Vec::new();
    };
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for edge in &interaction.edges {
        if nodes.contains(edge.from.as_str()) && nodes.contains(edge.to.as_str()) {
            adjacency.entry(edge.from.as_str()).or_default().push(edge.to.as_str());
            adjacency.entry(edge.to.as_str()).or_default().push(edge.from.as_str());
        }
    }
    let mut visited = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        for next in adjacency.get(node).into_iter().flatten() {
            if visited.insert(next) {
                queue.push_back(next);
            }
        }
    }
    nodes.difference(&visited).map(|n| n.to_string()).collect()
}

pub fn validate_social_network(network: &AbstractSocialNetwork) -> ValidationReport {
    let mut report = ValidationReport::new();

    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &network.resources {
        *ids.entry(r.id.as_str()).or_default() += 1;
    }
    for (id, count) in &ids {
        if *count > 1 {
            report.push("duplicate-id", [*id], format!("resource id used {count} times"));
        }
    }

    let mut triples: BTreeMap<&Relation, usize> = BTreeMap::new();
    for rel in &network.relations {
        *triples.entry(rel).or_default() += 1;
        let missing: Vec<String> = [&rel.source, &rel.target]
            .into_iter()
            .filter(|id| !ids.contains_key(id.as_str()))
            .map(|id| id.to_string())
            .collect();
        if !missing.is_empty() {
            report.push(
                "dangling-endpoint",
                missing,
                format!("relation {} -{}-> {} references an unknown resource", rel.source, rel.label, rel.target),
            );
        }
        if rel.label.trim().is_empty() {
            report.push("empty-label", [rel.source.to_string(), rel.target.to_string()], "relation label is empty");
        }
    }
    for (rel, count) in triples {
        if count > 1 {
            report.push(
                "duplicate-relation",
                [rel.source.to_string(), rel.target.to_string()],
                format!("relation labeled {:?} listed {count} times", rel.label),
            );
        }
    }

    report.finish()
}

/// Checks that every activity's role and tool resolve to resources of the right kind.
pub fn cross_reference_report(
    network: &AbstractSocialNetwork,
    interaction: &AbstractInteractionProtocol,
) -> ValidationReport {
    let mut report = ValidationReport::new();
    for activity in &interaction.activities {
        match network.resource(activity.role.as_str()) {
            None => report.push(
                "unknown-role",
                [activity.id.to_string(), activity.role.to_string()],
                format!("role {} is not in the social network", activity.role),
            ),
            Some(r) if r.kind != AbstractResourceKind::Role => report.push(
                "role-kind",
                [activity.id.to_string(), activity.role.to_string()],
                format!("{} is not a role", activity.role),
            ),
            Some(_) => {}
        }
        if let Some(tool) = &activity.tool {
            match network.resource(tool.as_str()) {
                None => report.push(
                    "unknown-tool",
                    [activity.id.to_string(), tool.to_string()],
                    format!("tool {tool} is not in the social network"),
                ),
                Some(r) if r.kind != AbstractResourceKind::SystemClass => report.push(
                    "tool-kind",
                    [activity.id.to_string(), tool.to_string()],
                    format!("{tool} is not a system class"),
                ),
                Some(_) => {}
            }
        }
    }
    report.finish()
}

/// Builds a protocol with a content-derived id (`asp-<12 hex>`).
pub fn compose_abstract_protocol(
    network: AbstractSocialNetwork,
    interaction: AbstractInteractionProtocol,
    tags: BTreeSet<String>,
) -> Result<AbstractSocialProtocol> {
    #[derive(Serialize)]
    struct Parts<'a> {
        network: &'a AbstractSocialNetwork,
        interaction: &'a AbstractInteractionProtocol,
        tags: &'a BTreeSet<String>,
    }
    let digest = canonical::content_hash(&Parts { network: &network, interaction: &interaction, tags: &tags })?;
    let id = Id::new(format!("asp-{}", &digest[..12]))?;
    compose_with_id(id, network, interaction, tags)
}

pub fn compose_with_id(
    id: Id,
    network: AbstractSocialNetwork,
    interaction: AbstractInteractionProtocol,
    tags: BTreeSet<String>,
) -> Result<AbstractSocialProtocol> {
    let mut structural = validate_social_network(&network);
    structural.extend(validate_interaction_protocol(&interaction));
    let structural = structural.finish();
    if !structural.is_valid() {
        return Err(Error::ValidationFailed(structural));
    }
    let xref = cross_reference_report(&network, &interaction);
    if !xref.is_valid() {
        return Err(Error::CrossReference(xref));
    }
    Ok(AbstractSocialProtocol { id, network, interaction, tags })
}

//! The social environment: a labeled directed graph of concrete people and
//! information systems, shared by every protocol and process in an engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::id::Id;
use crate::implementation::{ImplementedResource, ImplementedResourceKind};
use crate::process::SocialProcess;
use crate::protocol::Relation;
use crate::report::ValidationReport;
use crate::{Error, Result};

/// Relation label written between co-assigned collaborators of a process.
pub fn collaborates_in_label(process: &Id) -> String {
    format!("collaborates-in:{process}")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialEnvironment {
    resources: BTreeMap<Id, ImplementedResource>,
    relations: BTreeSet<Relation>,
}

/// A candidate replacement found by [`SocialEnvironment::find_substitutes`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitute {
    pub id: Id,
    pub distance: usize,
    /// Relations walked from the unavailable member, in traversal order.
    pub path: Vec<Relation>,
}

impl SocialEnvironment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn resource(&self, id: &str) -> Option<&ImplementedResource> {
        self.resources.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.resources.contains_key(id)
    }

    pub fn is_person(&self, id: &str) -> bool {
        self.resource(id).is_some_and(ImplementedResource::is_person)
    }

    pub fn resources(&self) -> impl Iterator<Item = &ImplementedResource> {
        self.resources.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn has_relation(&self, source: &str, target: &str, label: &str) -> bool {
        self.relations.iter().any(|r| r.source == *source && r.target == *target && r.label == label)
    }

    pub fn add_resource(&mut self, resource: ImplementedResource) -> Result<()> {
        if self.resources.contains_key(&resource.id) {
            return Err(Error::DuplicateId(resource.id.to_string()));
        }
        let report = resource.check();
        if !report.is_valid() {
            return Err(Error::ValidationFailed(report));
        }
        self.resources.insert(resource.id.clone(), resource);
        Ok(())
    }

    /// Adds a relation; returns whether it was new. Duplicates are ignored.
    pub fn add_relation(&mut self, source: &Id, target: &Id, label: &str) -> Result<bool> {
        let missing: Vec<String> = [source, target]
            .into_iter()
            .filter(|id| !self.resources.contains_key(*id))
            .map(|id| id.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::UnknownResource(missing));
        }
        if label.trim().is_empty() {
            let mut report = ValidationReport::new();
            report.push("empty-label", [source.to_string(), target.to_string()], "relation label is empty");
            return Err(Error::ValidationFailed(report));
        }
        Ok(self.relations.insert(Relation::new(source.clone(), target.clone(), label)))
    }

    /// Removes a resource and its incident relations, unless a live process
    /// still assigns it or maps a tool onto it.
    pub fn remove_resource<'a>(
        &mut self,
        id: &str,
        live: impl IntoIterator<Item = &'a SocialProcess>,
    ) -> Result<ImplementedResource> {
        if !self.resources.contains_key(id) {
            return Err(Error::not_found("resource", id));
        }
        for process in live {
            if process.references_resource(id) {
                return Err(Error::ResourceInUse(id.to_string(), process.id.to_string()));
            }
        }
        self.relations.retain(|r| r.source != *id && r.target != *id);
        Ok(self.resources.remove(id).expect("checked above"))
    }

    /// Shortest undirected distances from `from` to every resource of `kind`
    /// within `max_depth` hops, ignoring labels. Neighbors are visited in id
    /// order, which makes recorded paths deterministic.
    pub fn nearby(
        &self,
        from: &str,
        max_depth: usize,
        kind: ImplementedResourceKind,
        exclude: &BTreeSet<Id>,
    ) -> Result<Vec<Substitute>> {
        let Some(start) = self.resources.get(from) else {
            return Err(Error::UnknownResource(vec![from.to_string()]));
        };
        let mut adjacency: BTreeMap<&Id, BTreeSet<(&Id, &Relation)>> = BTreeMap::new();
        for rel in &self.relations {
            adjacency.entry(&rel.source).or_default().insert((&rel.target, rel));
            adjacency.entry(&rel.target).or_default().insert((&rel.source, rel));
        }

        let mut parent: BTreeMap<&Id, (&Id, &Relation)> = BTreeMap::new();
        let mut distance: BTreeMap<&Id, usize> = BTreeMap::from([(&start.id, 0)]);
        let mut queue = VecDeque::from([&start.id]);
        while let Some(node) = queue.pop_front() {
            let d = distance[node];
            if d == max_depth {
                continue;
            }
            for (next, rel) in adjacency.get(node).into_iter().flatten() {
                if !distance.contains_key(next) {
                    distance.insert(next, d + 1);
                    parent.insert(next, (node, rel));
                    queue.push_back(next);
                }
            }
        }

        let mut found: Vec<Substitute> = distance
            .iter()
            .filter(|(id, d)| **d > 0 && !exclude.contains(**id))
            .filter(|(id, _)| self.resources.get(**id).is_some_and(|r| r.kind == kind))
            .map(|(id, d)| {
                let mut path = Vec::new();
                let mut cursor = *id;
                while let Some((prev, rel)) = parent.get(cursor) {
                    path.push((*rel).clone());
                    cursor = prev;
                }
                path.reverse();
                Substitute { id: (*id).clone(), distance: *d, path }
            })
            .collect();
        found.sort_by(|a, b| a.distance.cmp(&b.distance).then_with(|| a.id.cmp(&b.id)));
        Ok(found)
    }

    /// Persons who could stand in for `unavailable` in `process`, closest first.
    ///
    /// The role is only checked for existence; no competence model applies.
    pub fn find_substitutes(
        &self,
        role: &str,
        unavailable: &str,
        process: &SocialProcess,
        max_depth: usize,
    ) -> Result<Vec<(Id, usize)>> {
        Ok(self
            .find_substitutes_verbose(role, unavailable, process, max_depth)?
            .into_iter()
            .map(|s| (s.id, s.distance))
            .collect())
    }

    pub fn find_substitutes_verbose(
        &self,
        role: &str,
        unavailable: &str,
        process: &SocialProcess,
        max_depth: usize,
    ) -> Result<Vec<Substitute>> {
        if !process.protocol.abstract_protocol.roles().contains(role) {
            return Err(Error::UnknownRole(role.to_string()));
        }
        if !self.contains(unavailable) {
            return Err(Error::UnknownResource(vec![unavailable.to_string()]));
        }
        let exclude = process.assignment.collaborators();
        let found = self.nearby(unavailable, max_depth, ImplementedResourceKind::Person, &exclude)?;
        tracing::debug!(role, unavailable, process = %process.id, candidates = found.len(), "substitute search");
        Ok(found)
    }

    /// Links every pair of distinct collaborators of `process` in both directions.
    pub fn enrich_from_process(&mut self, process: &SocialProcess) -> usize {
        let label = collaborates_in_label(&process.id);
        let people: Vec<Id> =
            process.assignment.collaborators().into_iter().filter(|p| self.contains(p.as_str())).collect();
        let mut added = 0;
        for a in &people {
            for b in &people {
                if a != b && self.relations.insert(Relation::new(a.clone(), b.clone(), label.clone())) {
                    added += 1;
                }
            }
        }
        added
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        for resource in self.resources.values() {
            report.extend(resource.check());
        }
        for rel in &self.relations {
            let missing: Vec<String> = [&rel.source, &rel.target]
                .into_iter()
                .filter(|id| !self.resources.contains_key(*id))
                .map(|id| id.to_string())
                .collect();
            if !missing.is_empty() {
                report.push("dangling-endpoint", missing, format!("relation labeled {:?}", rel.label));
            }
        }
        report.finish()
    }
}

#[derive(Serialize, Deserialize)]
struct EnvironmentDocument {
    resources: Vec<ImplementedResource>,
    relations: Vec<Relation>,
}

impl Serialize for SocialEnvironment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        EnvironmentDocument {
            resources: self.resources.values().cloned().collect(),
            relations: self.relations.iter().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SocialEnvironment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = EnvironmentDocument::deserialize(deserializer)?;
        let mut env = SocialEnvironment::new();
        for resource in doc.resources {
            if env.resources.insert(resource.id.clone(), resource.clone()).is_some() {
                return Err(D::Error::custom(format!("duplicate resource id {}", resource.id)));
            }
        }
        for rel in doc.relations {
            if !env.relations.insert(rel.clone()) {
                return Err(D::Error::custom(format!("duplicate relation {} -> {}", rel.source, rel.target)));
            }
        }
        let report = env.validate();
        if !report.is_valid() {
            return Err(D::Error::custom(report.to_string()));
        }
        Ok(env)
    }
}

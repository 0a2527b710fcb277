#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use socproto_core::id::id;
use socproto_core::implementation::manual_activity_map;
use socproto_core::{
    AbstractActivity, AbstractInteractionProtocol, AbstractResource, AbstractSocialNetwork, AbstractSocialProtocol,
    Edge, ImplementedResource, ImplementedSocialProtocol, Marking, RoleAssignment, SocialEnvironment, StateNode,
};

/// Raw material for a small random net: activity i reads the states in
/// `inputs[i]` (bitmask) and writes those in `outputs[i]`.
#[derive(Debug, Clone)]
pub struct NetSpec {
    pub states: usize,
    pub activities: Vec<(u8, u8, bool)>,
    pub initial: u8,
    pub finals: u8,
}

pub fn net_spec(max_states: usize, max_activities: usize) -> impl Strategy<Value = NetSpec> {
    (1..=max_states, 1..=max_activities).prop_flat_map(|(states, activities)| {
        let mask = 1u8..(1u8 << states).max(2);
        (
            Just(states),
            proptest::collection::vec((mask.clone(), mask.clone(), any::<bool>()), activities),
            mask.clone(),
            0u8..(1u8 << states),
        )
            .prop_map(|(states, activities, initial, finals)| NetSpec { states, activities, initial, finals })
    })
}

fn bits(mask: u8, n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |i| mask & (1 << i) != 0)
}

pub fn state(i: usize) -> String {
    format!("s{i}")
}

pub fn activity(i: usize) -> String {
    format!("a{i}")
}

/// Builds a valid interaction protocol, linking stray activities from `s0` and
/// stray states from `a0` until the net is connected.
pub fn build_interaction(spec: &NetSpec) -> AbstractInteractionProtocol {
    let n = spec.states;
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for (i, (ins, outs, _)) in spec.activities.iter().enumerate() {
        for s in bits(*ins, n) {
            edges.insert((state(s), activity(i)));
        }
        for s in bits(*outs, n) {
            edges.insert((activity(i), state(s)));
        }
    }
    loop {
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &edges {
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        let mut seen = BTreeSet::from(["s0"]);
        let mut queue = VecDeque::from(["s0"]);
        while let Some(node) = queue.pop_front() {
            for next in adjacency.get(node).into_iter().flatten() {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        let missing = (0..spec.activities.len())
            .map(activity)
            .chain((0..n).map(state))
            .find(|node| !seen.contains(node.as_str()));
        match missing {
            None => break,
            Some(node) if node.starts_with('s') => {
                edges.insert((activity(0), node));
            }
            Some(node) => {
                edges.insert(("s0".to_string(), node));
            }
        }
    }
    let initial = spec.initial | 1;
    AbstractInteractionProtocol {
        states: (0..n)
            .map(|i| {
                let mut s = StateNode::new(id(&state(i)), format!("state {i}"));
                s.is_initial = initial & (1 << i) != 0;
                s.is_final = spec.finals & (1 << i) != 0;
                s
            })
            .collect(),
        activities: spec
            .activities
            .iter()
            .enumerate()
            .map(|(i, (_, _, r))| AbstractActivity::new(id(&activity(i)), format!("activity {i}"), id(role(*r))))
            .collect(),
        edges: edges.into_iter().map(|(a, b)| Edge::new(id(&a), id(&b))).collect(),
    }
}

pub fn role(second: bool) -> &'static str {
    if second {
        "r1"
    } else {
        "r0"
    }
}

pub fn implemented(interaction: AbstractInteractionProtocol) -> ImplementedSocialProtocol {
    let network = AbstractSocialNetwork {
        resources: vec![AbstractResource::role(id("r0"), "first"), AbstractResource::role(id("r1"), "second")],
        relations: Vec::new(),
    };
    let abstract_protocol = AbstractSocialProtocol { id: id("random"), network, interaction, tags: BTreeSet::new() };
    let activity_map = manual_activity_map(&abstract_protocol);
    ImplementedSocialProtocol {
        id: id("random-manual"),
        abstract_protocol,
        resource_map: BTreeMap::new(),
        activity_map,
    }
}

/// c0 holds r0, c1 holds r1, c2 holds both.
pub fn crew() -> (RoleAssignment, SocialEnvironment) {
    let assignment = RoleAssignment::new().with(id("r0"), [id("c0"), id("c2")]).with(id("r1"), [id("c1"), id("c2")]);
    let mut env = SocialEnvironment::new();
    for c in ["c0", "c1", "c2"] {
        env.add_resource(ImplementedResource::person(id(c), c)).unwrap();
    }
    (assignment, env)
}

pub fn marking_of(mask: u8, n: usize) -> Marking {
    bits(mask, n).map(|i| id(&state(i))).collect()
}

/// Inputs and outputs of an activity, read straight off the edge list.
pub fn pre_post(interaction: &AbstractInteractionProtocol, activity: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let pre = interaction.edges.iter().filter(|e| e.to == activity).map(|e| e.from.to_string()).collect();
    let post = interaction.edges.iter().filter(|e| e.from == activity).map(|e| e.to.to_string()).collect();
    (pre, post)
}

//! The canonical brainstorming protocol and the example environments used
//! throughout the tests, the CLI examples and the shipped JSON assets.
//!
//! Five phases: the chairman presents the problem, every participant presents
//! ideas, the chairman classifies them, participants comment, the chairman
//! summarizes. Repeatable phases are self-loops.

use std::collections::BTreeSet;

use crate::environment::SocialEnvironment;
use crate::id::id;
use crate::implementation::{manual_activity_map, ImplementedResource, ImplementedSocialProtocol};
use crate::process::{instantiate, RoleAssignment, SocialProcess};
use crate::protocol::{
    AbstractActivity, AbstractInteractionProtocol, AbstractResource, AbstractSocialNetwork, AbstractSocialProtocol,
    Edge, Relation, StateNode,
};

pub fn brainstorming_abstract() -> AbstractSocialProtocol {
    let network = AbstractSocialNetwork {
        resources: vec![
            AbstractResource::role(id("chairman"), "Brainstorming chairman"),
            AbstractResource::role(id("participant"), "Participant"),
            AbstractResource::system_class(id("publication-system"), "Publication system"),
        ],
        relations: vec![
            Relation::new(id("participant"), id("publication-system"), "uses"),
            Relation::new(id("chairman"), id("publication-system"), "uses"),
        ],
    };
    let edge = |from: &str, to: &str| Edge::new(id(from), id(to));
    let interaction = AbstractInteractionProtocol {
        states: vec![
            StateNode::new(id("problem-pending"), "Problem not yet presented").initial(),
            StateNode::new(id("waiting-for-ideas"), "Waiting for ideas"),
            StateNode::new(id("commenting"), "Commenting ideas"),
            StateNode::new(id("closed"), "Session closed").terminal(),
        ],
        activities: vec![
            AbstractActivity::new(id("present-problem"), "Present the brainstorming problem", id("chairman")),
            AbstractActivity::new(id("present-idea"), "Present an idea", id("participant")),
            AbstractActivity::new(id("classify-ideas"), "Classify the ideas", id("chairman")),
            AbstractActivity::new(id("comment-idea"), "Comment an idea", id("participant")),
            AbstractActivity::new(id("summarize"), "Summarize the session", id("chairman")),
        ],
        edges: vec![
            edge("problem-pending", "present-problem"),
            edge("present-problem", "waiting-for-ideas"),
            edge("waiting-for-ideas", "present-idea"),
            edge("present-idea", "waiting-for-ideas"),
            edge("waiting-for-ideas", "classify-ideas"),
            edge("classify-ideas", "commenting"),
            edge("commenting", "comment-idea"),
            edge("comment-idea", "commenting"),
            edge("commenting", "summarize"),
            edge("summarize", "closed"),
        ],
    };
    AbstractSocialProtocol {
        id: id("brainstorming"),
        network,
        interaction,
        tags: BTreeSet::from(["brainstorming".to_string(), "collaboration-pattern".to_string()]),
    }
}

/// Brainstorming with every activity performed manually.
pub fn brainstorming_implemented() -> ImplementedSocialProtocol {
    let abstract_protocol = brainstorming_abstract();
    let activity_map = manual_activity_map(&abstract_protocol);
    ImplementedSocialProtocol {
        id: id("brainstorming-manual"),
        abstract_protocol,
        resource_map: Default::default(),
        activity_map,
    }
}

/// john, ann, bob, cecil and dan, with no relations.
pub fn brainstorming_environment() -> SocialEnvironment {
    let mut env = SocialEnvironment::new();
    for (pid, label) in [("john", "John"), ("ann", "Ann"), ("bob", "Bob"), ("cecil", "Cecil"), ("dan", "Dan")] {
        env.add_resource(ImplementedResource::person(id(pid), label)).expect("fresh ids");
    }
    env
}

/// chairman = {john}, participant = {ann, bob, cecil}.
pub fn brainstorming_assignment() -> RoleAssignment {
    RoleAssignment::new()
        .with(id("chairman"), [id("john")])
        .with(id("participant"), [id("ann"), id("bob"), id("cecil")])
}

/// Process `p1` on the manual brainstorming protocol, with its environment.
pub fn brainstorming_process() -> (SocialProcess, SocialEnvironment) {
    let mut env = brainstorming_environment();
    let process = instantiate(id("p1"), &brainstorming_implemented(), brainstorming_assignment(), &mut env)
        .expect("fixture instantiates");
    (process, env)
}

/// The six firings that take the fixture from its initial marking to `closed`.
pub fn golden_steps() -> Vec<(&'static str, &'static str)> {
    vec![
        ("john", "present-problem"),
        ("ann", "present-idea"),
        ("bob", "present-idea"),
        ("john", "classify-ideas"),
        ("bob", "comment-idea"),
        ("john", "summarize"),
    ]
}

/// Persons ann, bob, cecil, dan with ann-works_with->bob,
/// bob-works_with->cecil and ann-manages->dan.
pub fn substitute_environment() -> SocialEnvironment {
    let mut env = SocialEnvironment::new();
    for (pid, label) in [("ann", "Ann"), ("bob", "Bob"), ("cecil", "Cecil"), ("dan", "Dan")] {
        env.add_resource(ImplementedResource::person(id(pid), label)).expect("fresh ids");
    }
    for (s, t, l) in [("ann", "bob", "works_with"), ("bob", "cecil", "works_with"), ("ann", "dan", "manages")] {
        env.add_relation(&id(s), &id(t), l).expect("known endpoints");
    }
    env
}

/// Brainstorming process in which john holds every role.
pub fn john_only_process() -> SocialProcess {
    let mut env = SocialEnvironment::new();
    env.add_resource(ImplementedResource::person(id("john"), "John")).expect("fresh id");
    let assignment = RoleAssignment::new().with(id("chairman"), [id("john")]).with(id("participant"), [id("john")]);
    instantiate(id("p1"), &brainstorming_implemented(), assignment, &mut env).expect("fixture instantiates")
}

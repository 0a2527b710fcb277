use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use socproto_core::id::id;
use socproto_core::implementation::manual_activity_map;
use socproto_core::{
    AbstractActivity, AbstractInteractionProtocol, AbstractResource, AbstractSocialNetwork, AbstractSocialProtocol,
    ActionDescriptor, Edge, Edit, EditTransaction, Id, ImplementedResource, ImplementedSocialProtocol, RoleAssignment,
    SocialEnvironment, StateNode,
};

pub const MAX_STATES: usize = 8;
pub const MAX_ACTIVITIES: usize = 8;

fn mask(rng: &mut StdRng, n: usize) -> u16 {
    rng.gen_range(1..(1u16 << n))
}

fn bits(mask: u16, n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |i| mask & (1 << i) != 0)
}

/// A connected random net over states `q0..` and activities `t0..`, roles
/// `left` and `right`. Strays are attached to `q0` or from `t0` until the
/// graph is connected.
pub fn random_net(rng: &mut StdRng) -> AbstractInteractionProtocol {
    let n = rng.gen_range(1..=MAX_STATES);
    let m = rng.gen_range(1..=MAX_ACTIVITIES);
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for a in 0..m {
        for s in bits(mask(rng, n), n) {
            edges.insert((format!("q{s}"), format!("t{a}")));
        }
        for s in bits(mask(rng, n), n) {
            edges.insert((format!("t{a}"), format!("q{s}")));
        }
    }
    loop {
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &edges {
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        let mut seen = BTreeSet::from(["q0"]);
        let mut queue = VecDeque::from(["q0"]);
        while let Some(node) = queue.pop_front() {
            for next in adjacency.get(node).into_iter().flatten() {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        let stray = (0..m).map(|a| format!("t{a}")).chain((0..n).map(|s| format!("q{s}"))).find(|x| !seen.contains(x.as_str()));
        match stray {
            None => break,
            Some(s) if s.starts_with('q') => {
                edges.insert(("t0".into(), s));
            }
            Some(t) => {
                edges.insert(("q0".into(), t));
            }
        }
    }
    let initial = mask(rng, n) | 1;
    let finals = rng.gen_range(0..(1u16 << n));
    AbstractInteractionProtocol {
        states: (0..n)
            .map(|i| {
                let mut s = StateNode::new(id(&format!("q{i}")), format!("state {i}"));
                s.is_initial = initial & (1 << i) != 0;
                s.is_final = finals & (1 << i) != 0;
                s
            })
            .collect(),
        activities: (0..m)
            .map(|a| {
                let role = if rng.gen_bool(0.5) { "left" } else { "right" };
                AbstractActivity::new(id(&format!("t{a}")), format!("activity {a}"), id(role))
            })
            .collect(),
        edges: edges.into_iter().map(|(a, b)| Edge::new(id(&a), id(&b))).collect(),
    }
}

pub fn implement(interaction: AbstractInteractionProtocol) -> ImplementedSocialProtocol {
    let network = AbstractSocialNetwork {
        resources: vec![AbstractResource::role(id("left"), "Left"), AbstractResource::role(id("right"), "Right")],
        relations: Vec::new(),
    };
    let abstract_protocol =
        AbstractSocialProtocol { id: id("generated"), network, interaction, tags: BTreeSet::from(["generated".to_string()]) };
    let activity_map = manual_activity_map(&abstract_protocol);
    ImplementedSocialProtocol { id: id("generated-manual"), abstract_protocol, resource_map: BTreeMap::new(), activity_map }
}

pub const CREW: &[&str] = &["lea", "rao", "omni"];

/// lea holds `left`, rao holds `right`, omni holds both.
pub fn crew() -> (RoleAssignment, SocialEnvironment) {
    let assignment =
        RoleAssignment::new().with(id("left"), [id("lea"), id("omni")]).with(id("right"), [id("rao"), id("omni")]);
    let mut env = SocialEnvironment::new();
    for c in CREW {
        env.add_resource(ImplementedResource::person(id(c), *c)).expect("fresh ids");
    }
    (assignment, env)
}

/// Persons `v0..vn` and random undirected links with random labels.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize) -> (SocialEnvironment, usize, Vec<(usize, usize)>) {
    let n = rng.gen_range(2..=max_nodes);
    let density: f64 = rng.gen_range(0.02..0.3);
    let mut env = SocialEnvironment::new();
    for i in 0..n {
        env.add_resource(ImplementedResource::person(id(&format!("v{i}")), format!("V{i}"))).expect("fresh ids");
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density / 2.0) {
                let label = ["knows", "works_with", "manages"].choose(rng).expect("nonempty");
                env.add_relation(&id(&format!("v{a}")), &id(&format!("v{b}")), label).expect("known endpoints");
                edges.push((a, b));
            }
        }
    }
    (env, n, edges)
}

/// What a transaction generator may refer to.
pub struct Vocabulary {
    pub target: Id,
    pub states: Vec<Id>,
    pub activities: Vec<Id>,
    pub roles: Vec<Id>,
    pub people: Vec<Id>,
}

impl Vocabulary {
    fn node(&self, rng: &mut StdRng) -> Id {
        let fresh = [id("extra-0"), id("extra-1")];
        self.states.iter().chain(&self.activities).chain(&fresh).collect::<Vec<_>>().choose(rng).map(|x| (*x).clone()).expect("nonempty")
    }

    fn any<'a>(rng: &mut StdRng, pool: &'a [Id]) -> &'a Id {
        pool.choose(rng).expect("nonempty pool")
    }

    fn people(&self, rng: &mut StdRng) -> BTreeSet<Id> {
        let mut pool: Vec<Id> = self.people.clone();
        pool.push(id("stranger"));
        let k = rng.gen_range(0..=3.min(pool.len()));
        pool.choose_multiple(rng, k).cloned().collect()
    }

    fn noise(&self, rng: &mut StdRng) -> Edit {
        match rng.gen_range(0..8) {
            0 => {
                let mut state = StateNode::new(self.node(rng), "added");
                state.is_final = rng.gen_bool(0.3);
                Edit::AddState { state }
            }
            1 => Edit::RemoveState { id: self.node(rng) },
            2 => {
                let mut roles = self.roles.clone();
                roles.push(id("ghost"));
                Edit::AddActivity {
                    activity: AbstractActivity::new(self.node(rng), "added", Self::any(rng, &roles).clone()),
                    action: ActionDescriptor::manual(),
                }
            }
            3 => Edit::RemoveActivity { id: self.node(rng) },
            4 => Edit::AddEdge { from: self.node(rng), to: self.node(rng) },
            5 => Edit::RemoveEdge { from: self.node(rng), to: self.node(rng) },
            6 => Edit::ReassignRole { role: Self::any(rng, &self.roles).clone(), collaborators: self.people(rng) },
            _ => Edit::RemapActivity {
                activity: self.node(rng),
                action: ActionDescriptor::http_call(if rng.gen_bool(0.7) { "http://example.org/hook" } else { "" }),
            },
        }
    }

    /// An edit shaped like a real adaptation: likely, though not certain,
    /// to be accepted.
    fn plausible(&self, rng: &mut StdRng) -> (Vec<Edit>, BTreeMap<Id, Option<Id>>) {
        let mut migration = BTreeMap::new();
        let edits = match rng.gen_range(0..5) {
            0 => {
                let k = rng.gen_range(1..=self.people.len());
                let collaborators = self.people.choose_multiple(rng, k).cloned().collect();
                vec![Edit::ReassignRole { role: Self::any(rng, &self.roles).clone(), collaborators }]
            }
            1 => {
                let from = Self::any(rng, &self.states).clone();
                vec![
                    Edit::AddState { state: StateNode::new(id("extra-0"), "added").terminal() },
                    Edit::AddActivity {
                        activity: AbstractActivity::new(id("extra-1"), "added", Self::any(rng, &self.roles).clone()),
                        action: ActionDescriptor::manual(),
                    },
                    Edit::AddEdge { from, to: id("extra-1") },
                    Edit::AddEdge { from: id("extra-1"), to: id("extra-0") },
                ]
            }
            2 => vec![Edit::RemapActivity {
                activity: Self::any(rng, &self.activities).clone(),
                action: ActionDescriptor::http_call("http://example.org/hook"),
            }],
            3 => vec![Edit::RemoveActivity { id: Self::any(rng, &self.activities).clone() }],
            _ => {
                let removed = Self::any(rng, &self.states).clone();
                let replacement = self.states.iter().find(|s| **s != removed).cloned();
                migration.insert(removed.clone(), replacement);
                vec![Edit::RemoveState { id: removed }]
            }
        };
        (edits, migration)
    }

    pub fn transaction(&self, rng: &mut StdRng) -> EditTransaction {
        let (mut edits, mut migration) = if rng.gen_bool(0.5) { self.plausible(rng) } else { (Vec::new(), BTreeMap::new()) };
        for _ in 0..rng.gen_range(0..4) {
            let at = rng.gen_range(0..=edits.len());
            edits.insert(at, self.noise(rng));
        }
        if rng.gen_bool(0.2) {
            migration.insert(self.node(rng), if rng.gen_bool(0.5) { Some(self.node(rng)) } else { None });
        }
        let target = if rng.gen_bool(0.95) { self.target.clone() } else { id("elsewhere") };
        EditTransaction { target, edits, marking_migration: migration }
    }
}

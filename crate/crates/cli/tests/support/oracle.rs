use std::collections::{BTreeMap, BTreeSet, VecDeque};

use socproto_core::AbstractInteractionProtocol;

/// A net flattened to bitmasks over its states, in document order.
#[derive(Debug, Clone)]
pub struct MaskNet {
    pub states: Vec<String>,
    /// (activity id, role id, input mask, output mask)
    pub activities: Vec<(String, String, u16, u16)>,
    pub initial: u16,
    pub finals: u16,
}

impl MaskNet {
    pub fn from_interaction(net: &AbstractInteractionProtocol) -> Self {
        let states: Vec<String> = net.states.iter().map(|s| s.id.to_string()).collect();
        let bit = |id: &str| states.iter().position(|s| s == id).map(|i| 1u16 << i);
        let activities = net
            .activities
            .iter()
            .map(|a| {
                let mut pre = 0;
                let mut post = 0;
                for e in &net.edges {
                    if e.to == a.id {
                        pre |= bit(e.from.as_str()).unwrap_or(0);
                    }
                    if e.from == a.id {
                        post |= bit(e.to.as_str()).unwrap_or(0);
                    }
                }
                (a.id.to_string(), a.role.to_string(), pre, post)
            })
            .collect();
        let mask = |pick: &dyn Fn(usize) -> bool| (0..states.len()).filter(|i| pick(*i)).fold(0u16, |m, i| m | 1 << i);
        let initial = mask(&|i| net.states[i].is_initial);
        let finals = mask(&|i| net.states[i].is_final);
        Self { states, activities, initial, finals }
    }

    pub fn mask_of<'a>(&self, marking: impl IntoIterator<Item = &'a str>) -> u16 {
        marking.into_iter().fold(0, |m, s| m | 1 << self.states.iter().position(|x| x == s).expect("known state"))
    }

    pub fn names(&self, mask: u16) -> BTreeSet<String> {
        (0..self.states.len()).filter(|i| mask & (1 << i) != 0).map(|i| self.states[i].clone()).collect()
    }

    pub fn completed(&self, mask: u16) -> bool {
        mask != 0 && mask & !self.finals == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fire {
    To(u16),
    Disabled,
    Contact,
}

/// The elementary firing rule with the contact condition.
pub fn fire(pre: u16, post: u16, marking: u16) -> Fire {
    if marking & pre != pre {
        Fire::Disabled
    } else if post & !pre & marking != 0 {
        Fire::Contact
    } else {
        Fire::To((marking & !pre) | post)
    }
}

/// Markings reachable from the initial one. Builds the successor relation
/// over every one of the 2^n markings first, then walks it breadth-first.
/// Completed markings have no successors.
pub fn reachable(net: &MaskNet) -> BTreeSet<u16> {
    let n = net.states.len();
    let mut successors: BTreeMap<u16, Vec<u16>> = BTreeMap::new();
    for marking in 0..(1u32 << n) {
        let marking = marking as u16;
        let next = if net.completed(marking) {
            Vec::new()
        } else {
            net.activities
                .iter()
                .filter_map(|(_, _, pre, post)| match fire(*pre, *post, marking) {
                    Fire::To(m) => Some(m),
                    _ => None,
                })
                .collect()
        };
        successors.insert(marking, next);
    }
    let mut seen = BTreeSet::from([net.initial]);
    let mut queue = VecDeque::from([net.initial]);
    while let Some(m) = queue.pop_front() {
        for &next in &successors[&m] {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Hop distances from `source` over an undirected edge list, by plain BFS
/// on an adjacency matrix.
pub fn distances(n: usize, edges: &[(usize, usize)], source: usize) -> Vec<Option<usize>> {
    let mut adjacent = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adjacent[a][b] = true;
        adjacent[b][a] = true;
    }
    let mut dist = vec![None; n];
    dist[source] = Some(0);
    let mut frontier = vec![source];
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &u in &frontier {
            for v in 0..n {
                if adjacent[u][v] && dist[v].is_none() {
                    dist[v] = Some(d);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    dist
}

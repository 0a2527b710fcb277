use proptest::prelude::*;
use socproto_core::fixtures;
use socproto_core::id::id;
use socproto_core::{
    instantiate, ImplementedResource, ImplementedSocialProtocol, RoleAssignment, SocialEnvironment,
};

/// Floyd-Warshall over the undirected version of the relation graph.
fn all_pairs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(a, b) in edges {
        if a != b {
            d[a][b] = Some(1);
            d[b][a] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|cur| x + y < cur) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

fn person(i: usize) -> String {
    format!("n{i}")
}

/// Chairman and participants are drawn from the first three nodes.
fn process_in(env: &mut SocialEnvironment) -> socproto_core::SocialProcess {
    let protocol: ImplementedSocialProtocol = fixtures::brainstorming_implemented();
    let assignment = RoleAssignment::new().with(id("chairman"), [id("n0")]).with(id("participant"), [id("n1"), id("n2")]);
    instantiate(id("p1"), &protocol, assignment, env).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distances_match_all_pairs(
        n in 3usize..=25,
        raw_edges in proptest::collection::vec((0usize..25, 0usize..25), 0..60),
        systems in proptest::collection::btree_set(3usize..25, 0..4),
        depth in 1usize..6,
    ) {
        let edges: Vec<(usize, usize)> = raw_edges.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        let mut env = SocialEnvironment::new();
        for i in 0..n {
            let resource = if systems.contains(&i) {
                ImplementedResource::system(id(&person(i)), "system", "http://example.org")
            } else {
                ImplementedResource::person(id(&person(i)), "person")
            };
            env.add_resource(resource).unwrap();
        }
        for &(a, b) in &edges {
            env.add_relation(&id(&person(a)), &id(&person(b)), "knows").unwrap();
        }
        // process enrichment adds collaborates-in edges among n0..n2
        let process = process_in(&mut env);
        let mut all_edges = edges.clone();
        all_edges.extend([(0, 1), (0, 2), (1, 2)]);
        let d = all_pairs(n, &all_edges);
        for unavailable in 0..3 {
            let got = env.find_substitutes("participant", &person(unavailable), &process, depth).unwrap();
            let mut expected: Vec<(String, usize)> = (3..n)
                .filter(|j| !systems.contains(j))
                .filter_map(|j| d[unavailable][j].filter(|&k| k <= depth).map(|k| (person(j), k)))
                .collect();
            expected.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
            let got: Vec<(String, usize)> = got.into_iter().map(|(i, k)| (i.to_string(), k)).collect();
            prop_assert_eq!(got, expected);
        }
    }
}

#[test]
fn fixture_environment_ranking() {
    let mut env = fixtures::substitute_environment();
    env.add_resource(ImplementedResource::person(id("john"), "John")).unwrap();
    let assignment = RoleAssignment::new().with(id("chairman"), [id("john")]).with(id("participant"), [id("ann")]);
    let process = instantiate(id("p1"), &fixtures::brainstorming_implemented(), assignment, &mut env).unwrap();
    let got = env.find_substitutes("participant", "ann", &process, 3).unwrap();
    assert_eq!(got, vec![(id("bob"), 1), (id("dan"), 1), (id("cecil"), 2)]);
}

mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use socproto_core::id::id;
use socproto_core::process::{try_fire, Firing};
use socproto_core::{instantiate, Error, ExecCtx, ProcessStatus, StepClock};

#[derive(Debug, PartialEq)]
enum Expected {
    Fires(BTreeSet<String>),
    Disabled,
    Contact,
}

/// Elementary firing rule evaluated over plain strings.
fn oracle(pre: &BTreeSet<String>, post: &BTreeSet<String>, marking: &BTreeSet<String>) -> Expected {
    if !pre.iter().all(|s| marking.contains(s)) {
        return Expected::Disabled;
    }
    if post.iter().any(|s| !pre.contains(s) && marking.contains(s)) {
        return Expected::Contact;
    }
    let mut next: BTreeSet<String> = marking.iter().filter(|s| !pre.contains(*s)).cloned().collect();
    next.extend(post.iter().cloned());
    Expected::Fires(next)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn try_fire_matches_the_firing_rule(spec in net_spec(6, 6), mask in 0u8..64, pick in 0usize..6) {
        let net = build_interaction(&spec);
        let marking = marking_of(mask % (1 << spec.states), spec.states);
        let name = activity(pick % spec.activities.len());
        let (pre, post) = pre_post(&net, &name);
        let plain: BTreeSet<String> = marking.iter().map(|s| s.to_string()).collect();
        let got = match try_fire(&net, &marking, &name) {
            Firing::Fired(next) => Expected::Fires(next.iter().map(|s| s.to_string()).collect()),
            Firing::NotEnabled => Expected::Disabled,
            Firing::Contact(_) => Expected::Contact,
        };
        let expected = oracle(&pre, &post, &plain);
        prop_assert_eq!(&got, &expected);
        if let Expected::Fires(next) = got {
            for s in (0..spec.states).map(state) {
                if !pre.contains(&s) && !post.contains(&s) {
                    prop_assert_eq!(plain.contains(&s), next.contains(&s), "non-adjacent state {} changed", s);
                }
            }
        }
    }

    #[test]
    fn random_walks_respect_roles_and_absorption(spec in net_spec(6, 6), moves in proptest::collection::vec((0usize..3, 0usize..6), 1..40)) {
        let net = build_interaction(&spec);
        let protocol = implemented(net);
        let (assignment, mut env) = crew();
        let mut process = instantiate(id("p1"), &protocol, assignment.clone(), &mut env).unwrap();
        let clock = StepClock::new(0, 1);
        let states: BTreeSet<String> = (0..spec.states).map(state).collect();
        for (who, pick) in moves {
            let collaborator = format!("c{who}");
            let name = activity(pick % spec.activities.len());
            let before = process.marking.clone();
            let was_running = process.status == ProcessStatus::Running;
            let role = process.interaction().activity(&name).unwrap().role.clone();
            let (pre, post) = pre_post(process.interaction(), &name);
            let plain: BTreeSet<String> = before.iter().map(|s| s.to_string()).collect();
            let expected = if !was_running {
                None
            } else if !assignment.holds(&collaborator, role.as_str()) {
                Some(Expected::Disabled)
            } else {
                Some(oracle(&pre, &post, &plain))
            };
            let result = process.fire(ExecCtx::new(&clock), &collaborator, &name, None);
            match (expected, result) {
                (None, Err(Error::ProcessNotRunning(_))) => prop_assert_eq!(&process.marking, &before),
                (Some(Expected::Disabled), Err(Error::NotEnabled { .. })) => prop_assert_eq!(&process.marking, &before),
                (Some(Expected::Contact), Err(Error::ContactViolation { .. })) => prop_assert_eq!(&process.marking, &before),
                (Some(Expected::Fires(next)), Ok(_)) => {
                    let got: BTreeSet<String> = process.marking.iter().map(|s| s.to_string()).collect();
                    prop_assert_eq!(got, next);
                }
                (expected, result) => prop_assert!(false, "expected {:?}, got {:?}", expected, result),
            }
            let listed: Vec<String> = serde_json::from_value(serde_json::to_value(&process.marking).unwrap()).unwrap();
            let unique: BTreeSet<&String> = listed.iter().collect();
            prop_assert_eq!(unique.len(), listed.len());
            prop_assert!(listed.iter().all(|s| states.contains(s)));
            let finals: BTreeSet<String> = process.interaction().final_states().iter().map(|s| s.to_string()).collect();
            let complete = !listed.is_empty() && listed.iter().all(|s| finals.contains(s));
            prop_assert_eq!(process.status == ProcessStatus::Completed, complete || !was_running);
        }
        prop_assert!(process.validate().is_valid(), "{}", process.validate());
        prop_assert_eq!(process.replay().unwrap(), process.marking.clone());
    }

    #[test]
    fn enabled_lists_agree_with_fire(spec in net_spec(6, 6), warmup in proptest::collection::vec((0usize..3, 0usize..6), 0..10)) {
        let protocol = implemented(build_interaction(&spec));
        let (_, mut env) = crew();
        let (assignment, _) = crew();
        let mut process = instantiate(id("p1"), &protocol, assignment, &mut env).unwrap();
        let clock = StepClock::new(0, 1);
        for (who, pick) in warmup {
            let _ = process.fire(ExecCtx::new(&clock), &format!("c{who}"), &activity(pick % spec.activities.len()), None);
        }
        for who in ["c0", "c1", "c2"] {
            let enabled = process.enabled_activities(who).unwrap();
            let mut sorted = enabled.clone();
            sorted.sort();
            prop_assert_eq!(&sorted, &enabled);
            for i in 0..spec.activities.len() {
                let name = activity(i);
                let mut probe = process.clone();
                let outcome = probe.fire(ExecCtx::new(&clock), who, &name, None);
                if outcome.is_ok() {
                    prop_assert!(enabled.iter().any(|a| *a == name.as_str()));
                }
                if !enabled.iter().any(|a| *a == name.as_str()) {
                    prop_assert!(outcome.is_err());
                }
            }
        }
    }
}

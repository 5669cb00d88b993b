use std::collections::BTreeSet;

use tm_core::corpus::{
    self, ATM_CARD_INVALID, ATM_HAPPY, ATM_INSUFFICIENT, ORDERING_HAPPY, ORDERING_RETRY,
};
use tm_core::events::{check_behavior, check_coverage, infer_behavior, BehaviorEdge};
use tm_core::sim::{all_traces, check_precedence, filtered_graph, simulate, Scenario, Terminal};
use tm_core::{validate, EventId};

fn ids(names: &[&str]) -> Vec<EventId> {
    names.iter().map(|n| EventId::from(*n)).collect()
}

#[test]
fn atm_fixture_is_valid_and_fully_covered() {
    let m = corpus::atm();
    assert!(validate(&m).passed());
    let o = corpus::atm_overlay(&m);
    assert_eq!(o.events.len(), 23);
    assert_eq!(o.events.keys().next().unwrap().as_str(), "E1");
    assert_eq!(o.events.keys().last().unwrap().as_str(), "E23");
    assert!(check_coverage(&o, &m).is_complete());
    assert!(m.machine(&"BankSystem.AccountSystem".into()).is_some());
}

#[test]
fn atm_declared_chronology_matches_inference() {
    let m = corpus::atm();
    let o = corpus::atm_overlay(&m);
    let inferred = infer_behavior(&m, &o);
    assert_eq!(inferred.nodes.len(), 23);
    assert_eq!(inferred.edges.len(), 26);
    let diff = check_behavior(o.declared.as_ref().unwrap(), &inferred).unwrap();
    assert!(diff.is_empty(), "{diff:?}");
    assert!(inferred.check(&o, &m).is_ok());
    assert_eq!(
        inferred.sources().into_iter().collect::<Vec<_>>(),
        ids(&["E1"])
    );
}

#[test]
fn ordering_declared_chronology_matches_inference() {
    let m = corpus::ordering();
    let o = corpus::ordering_overlay(&m);
    let inferred = infer_behavior(&m, &o);
    assert_eq!(inferred.edges.len(), 24);
    let diff = check_behavior(o.declared.as_ref().unwrap(), &inferred).unwrap();
    assert!(diff.is_empty(), "{diff:?}");
}

#[test]
fn ordering_fixture_has_the_retry_edge() {
    let m = corpus::ordering();
    assert!(validate(&m).passed());
    let o = corpus::ordering_overlay(&m);
    assert_eq!(o.events.len(), 20);
    let g = infer_behavior(&m, &o);
    assert!(g.edges.contains(&BehaviorEdge::new("E8", "E5", None)));
    assert!(g
        .edges
        .contains(&BehaviorEdge::new("E7", "E8", Some(("match", "no")))));
    let uncovered: Vec<_> = check_coverage(&o, &m)
        .uncovered
        .iter()
        .map(|a| a.to_string())
        .collect();
    assert_eq!(
        uncovered,
        [
            "Customer.OrderStructure.p_date",
            "Customer.OrderStructure.p_name"
        ]
    );
}

#[test]
fn atm_happy_path() {
    let m = corpus::atm();
    let g = infer_behavior(&m, &corpus::atm_overlay(&m));
    let sc = corpus::scenario(ATM_HAPPY);
    let t = simulate(&g, &sc).unwrap();
    let fired: Vec<EventId> = t.steps.iter().map(|s| s.event.clone()).collect();
    assert_eq!(
        fired,
        ids(&[
            "E1", "E2", "E3", "E6", "E7", "E8", "E10", "E11", "E12", "E13", "E19", "E14", "E15",
            "E16", "E18", "E20", "E21", "E22"
        ])
    );
    assert_eq!(t.terminal, Terminal::Completed);
    assert_eq!(t.steps.last().unwrap().tick, 16);
    check_precedence(&g, &sc, &t).unwrap();
}

#[test]
fn atm_invalid_card_ejects() {
    let m = corpus::atm();
    let g = infer_behavior(&m, &corpus::atm_overlay(&m));
    let sc = corpus::scenario(ATM_CARD_INVALID);
    let t = simulate(&g, &sc).unwrap();
    let fired: BTreeSet<&EventId> = t.fired();
    assert_eq!(fired, ids(&["E1", "E2", "E3", "E4", "E5"]).iter().collect());
    assert_eq!(t.terminal, Terminal::Completed);
    check_precedence(&g, &sc, &t).unwrap();
    // Small enough to enumerate: the trace is the single linearization.
    let all = all_traces(&g, &sc, 100).unwrap();
    assert_eq!(all, vec![ids(&["E1", "E2", "E3", "E4", "E5"])]);
}

#[test]
fn atm_insufficient_funds_ends_at_e23() {
    let m = corpus::atm();
    let g = infer_behavior(&m, &corpus::atm_overlay(&m));
    let sc = corpus::scenario(ATM_INSUFFICIENT);
    let t = simulate(&g, &sc).unwrap();
    assert_eq!(t.steps.last().unwrap().event.as_str(), "E23");
    assert_eq!(t.count("E22"), 0);
    check_precedence(&g, &sc, &t).unwrap();
}

#[test]
fn atm_unbound_guard_is_an_error() {
    let m = corpus::atm();
    let g = infer_behavior(&m, &corpus::atm_overlay(&m));
    let sc = Scenario::new("partial", "ATM").bind("card", "valid");
    assert!(simulate(&g, &sc).is_err());
}

#[test]
fn ordering_retry_loop() {
    let m = corpus::ordering();
    let g = infer_behavior(&m, &corpus::ordering_overlay(&m));
    let sc = corpus::scenario(ORDERING_RETRY);
    let t = simulate(&g, &sc).unwrap();
    assert_eq!(t.count("E5"), 2);
    assert_eq!(t.count("E8"), 1);
    assert_eq!(t.fired().len(), 20);
    assert_eq!(t.terminal, Terminal::Completed);
    check_precedence(&g, &sc, &t).unwrap();
    let happy = simulate(&g, &corpus::scenario(ORDERING_HAPPY)).unwrap();
    assert_eq!(happy.count("E5"), 1);
    assert_eq!(happy.count("E8"), 0);
    assert_eq!(happy.fired().len(), 19);
}

#[test]
fn simulation_is_deterministic() {
    let m = corpus::atm();
    let g = infer_behavior(&m, &corpus::atm_overlay(&m));
    let sc = corpus::scenario(ATM_HAPPY);
    assert_eq!(simulate(&g, &sc).unwrap(), simulate(&g, &sc).unwrap());
}

#[test]
fn happy_path_diamond_counts_match_brute_force() {
    // The E16, E18, E19, E20 corner of the happy path: E16 -> E18 -> E20 and
    // E19 -> E20.
    let m = corpus::atm();
    let full = infer_behavior(&m, &corpus::atm_overlay(&m));
    let keep: BTreeSet<EventId> = ids(&["E16", "E18", "E19", "E20"]).into_iter().collect();
    let sub = tm_core::BehaviorGraph {
        nodes: keep.clone(),
        edges: full
            .edges
            .iter()
            .filter(|e| keep.contains(&e.from) && keep.contains(&e.to))
            .cloned()
            .collect(),
    };
    let sc = Scenario::new("s", "ATM");
    let enumerated = all_traces(&sub, &sc, 1000).unwrap();
    let nodes: Vec<&EventId> = keep.iter().collect();
    let mut brute = 0;
    let mut perm: Vec<usize> = (0..nodes.len()).collect();
    permutations(&mut perm, 0, &mut |p| {
        let pos = |e: &EventId| p.iter().position(|&i| nodes[i] == e).unwrap();
        if sub.edges.iter().all(|e| pos(&e.from) < pos(&e.to)) {
            brute += 1;
        }
    });
    assert_eq!(enumerated.len(), brute);
    assert_eq!(brute, 3);
    let t = simulate(&sub, &sc).unwrap();
    assert!(enumerated.contains(&t.steps.iter().map(|s| s.event.clone()).collect()));
}

#[test]
fn filtered_graph_drops_unreachable_branches() {
    let m = corpus::atm();
    let g = infer_behavior(&m, &corpus::atm_overlay(&m));
    let f = filtered_graph(&g, &corpus::scenario(ATM_CARD_INVALID));
    assert_eq!(f.nodes.len(), 5);
}

fn permutations(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
}

#[test]
fn fixtures_survive_simplify_and_elaborate() {
    for m in [corpus::atm(), corpus::ordering()] {
        let s = tm_core::simplify(&m).unwrap();
        assert!(s.actions().len() < m.actions().len());
        let e = tm_core::elaborate(&s).unwrap();
        assert!(
            validate(&e).passed(),
            "{}: {:?}",
            m.name(),
            validate(&e).violations
        );
    }
}

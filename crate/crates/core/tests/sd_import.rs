use proptest::prelude::*;
use tm_core::dsl::diag::codes;
use tm_core::events::infer_behavior;
use tm_core::sd::{parse_sd, sd_to_tm, sd_to_tm_with_overlay};
use tm_core::sim::{all_traces, check_precedence, simulate, Scenario};
use tm_core::{corpus, simplify, validate, ActionKind, EventId};

fn ping_pong(n: usize) -> String {
    let mut s = String::from("participant A\nparticipant B\n");
    for i in 0..n {
        let (from, to) = if i % 2 == 0 { ("A", "B") } else { ("B", "A") };
        s.push_str(&format!("{from} -> {to} : message {i}\n"));
    }
    s
}

#[test]
fn linear_documents_chain_through_triggers() {
    for n in 1..=8 {
        let m = sd_to_tm(&parse_sd(&ping_pong(n)).unwrap());
        assert_eq!(m.actions().len(), 6 * n);
        assert_eq!(m.flows().len(), 5 * n);
        assert_eq!(m.triggers().len(), n - 1);
        assert!(validate(&m).passed());
        let s = simplify(&m).unwrap();
        assert_eq!(s.actions().len(), 2 * n);
        assert!(s
            .actions()
            .values()
            .all(|a| matches!(a.kind, ActionKind::Create | ActionKind::Process)));
    }
}

#[test]
fn card_then_verify_import_as_distinct_things() {
    let doc = parse_sd("participant User\nparticipant ATM\nparticipant Bank\nUser -> ATM : card\nATM -> Bank : verify card\n").unwrap();
    let m = sd_to_tm(&doc);
    let labels: std::collections::BTreeSet<&str> =
        doc.messages().iter().map(|m| m.label.as_str()).collect();
    assert!(m.things().len() >= labels.len());
    assert_eq!(m.triggers().len(), 1);
    assert_eq!(
        m.triggers().keys().next().unwrap(),
        "ATM.p_card~>ATM.c_verify_card"
    );
}

#[test]
fn alternatives_simulate_each_branch() {
    let doc = corpus::withdraw();
    let (m, o) = sd_to_tm_with_overlay(&doc);
    assert!(validate(&m).passed());
    let g = infer_behavior(&m, &o);
    assert_eq!(g.nodes.len(), 6);
    let fired = |value: &str| {
        let sc = Scenario::new("s", "Withdraw").bind("alt1", value);
        let t = simulate(&g, &sc).unwrap();
        check_precedence(&g, &sc, &t).unwrap();
        let all = all_traces(&g, &sc, 100).unwrap();
        assert!(all.contains(&t.steps.iter().map(|s| s.event.clone()).collect()));
        t.steps
            .iter()
            .map(|s| o.events[&s.event].description.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(
        fired("valid"),
        [
            "insert card",
            "verify card number",
            "card ok",
            "request pin"
        ]
    );
    assert_eq!(
        fired("invalid"),
        [
            "insert card",
            "verify card number",
            "card not ok",
            "eject card"
        ]
    );
}

#[test]
fn message_order_is_a_linearization() {
    let (m, o) = sd_to_tm_with_overlay(&parse_sd(&ping_pong(6)).unwrap());
    let g = infer_behavior(&m, &o);
    let order: Vec<EventId> = (1..=6).map(|i| EventId::from(format!("M{i}"))).collect();
    let t = simulate(&g, &Scenario::new("s", "Sequence")).unwrap();
    assert_eq!(
        t.steps.iter().map(|s| s.event.clone()).collect::<Vec<_>>(),
        order
    );
}

#[test]
fn diagnostics_carry_codes() {
    assert!(parse_sd("").unwrap_err().has_code(codes::SYNTAX));
    assert!(parse_sd("participant A\npar\nend")
        .unwrap_err()
        .has_code(codes::UNSUPPORTED));
    assert!(parse_sd("participant A\nB -> A : x")
        .unwrap_err()
        .has_code(codes::UNKNOWN_PARTICIPANT));
}

#[derive(Debug, Clone)]
enum El {
    Msg(usize, usize),
    Alt(Vec<Vec<El>>),
}

fn element(depth: u32) -> BoxedStrategy<El> {
    let msg = (0usize..4, 1usize..4)
        .prop_map(|(a, d)| El::Msg(a, (a + d) % 4))
        .boxed();
    if depth == 0 {
        return msg;
    }
    prop_oneof![
        3 => msg,
        1 => prop::collection::vec(prop::collection::vec(element(depth - 1), 1..4), 1..4).prop_map(El::Alt),
    ]
    .boxed()
}

fn render(els: &[El], out: &mut String, n: &mut usize) {
    for e in els {
        match e {
            El::Msg(a, b) => {
                *n += 1;
                out.push_str(&format!("P{a} -> P{b} : msg {n}\n"));
            }
            El::Alt(branches) => {
                for (i, br) in branches.iter().enumerate() {
                    out.push_str(if i == 0 { "alt" } else { "else" });
                    out.push_str(&format!(" [branch {i}]\n"));
                    render(br, out, n);
                }
                out.push_str("end\n");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn every_parseable_document_validates(els in prop::collection::vec(element(3), 1..8)) {
        let mut text = String::from("participant P0\nparticipant P1\nparticipant P2\nparticipant P3\n");
        let mut n = 0;
        render(&els, &mut text, &mut n);
        if let Ok(doc) = parse_sd(&text) {
            let (m, o) = sd_to_tm_with_overlay(&doc);
            let count = doc.messages().len();
            prop_assert_eq!(m.actions().len(), 6 * count);
            let r = validate(&m);
            prop_assert!(r.passed(), "{:?}\n{}", r, text);
            prop_assert_eq!(simplify(&m).unwrap().actions().len(), 2 * count);
            // Behavior edges only run forward in document order.
            let g = infer_behavior(&m, &o);
            for e in &g.edges {
                let idx = |id: &EventId| id.as_str()[1..].parse::<usize>().unwrap();
                prop_assert!(idx(&e.from) < idx(&e.to), "{}", e);
            }
        }
    }
}

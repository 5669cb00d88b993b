//! Well-formedness of the TM action grammar.
//!
//! | code | rule |
//! |------|------|
//! | V1 | intra-machine flows follow the [`SuccessorTable`] |
//! | V2 | flows between machines run Transfer to Transfer |
//! | V3 | every Receive is fed, through flows, by a Transfer or a storage |
//! | V4 | every Create has an outgoing flow or trigger |
//! | V5 | guarded sibling triggers share one key with distinct values |
//! | V6 | the flow graph of each thing is acyclic |
//!
//! V1 to V3 are boundary rules and are suspended for simplified models.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::dsl::Severity;
use crate::model::{ActionId, ActionKind, Endpoint, StaticModel, ThingId};

/// Node category used by the successor table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Action(ActionKind),
    Storage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    /// Both endpoints owned by the same machine.
    Within,
    /// Endpoints owned by different machines.
    Across,
}

/// Allowed `(from, to, scope)` flow pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessorTable {
    pub pairs: BTreeSet<(Slot, Slot, Scope)>,
}

impl Default for SuccessorTable {
    fn default() -> Self {
        use ActionKind::*;
        use Scope::*;
        let a = Slot::Action;
        let pairs = [
            (a(Create), a(Process), Within),
            (a(Create), a(Release), Within),
            (a(Receive), a(Process), Within),
            (a(Receive), a(Release), Within),
            (a(Process), a(Release), Within),
            (a(Process), a(Process), Within),
            (a(Release), a(Transfer), Within),
            (a(Transfer), a(Transfer), Across),
            (a(Transfer), a(Receive), Within),
            (a(Release), Slot::Storage, Within),
            (Slot::Storage, a(Receive), Within),
            (Slot::Storage, a(Process), Within),
        ];
        SuccessorTable {
            pairs: pairs.into_iter().collect(),
        }
    }
}

impl SuccessorTable {
    pub fn allows(&self, from: Slot, to: Slot, scope: Scope) -> bool {
        self.pairs.contains(&(from, to, scope))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub code: &'static str,
    pub element: String,
    pub message: String,
    pub severity: SeverityOrd,
}

/// Orderable wrapper so reports sort deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum SeverityOrd {
    #[default]
    Error,
    Warning,
}

impl SeverityOrd {
    pub fn severity(self) -> Severity {
        match self {
            SeverityOrd::Error => Severity::Error,
            SeverityOrd::Warning => Severity::Warning,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    /// Sorted by code, then element.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn verdict(&self) -> Verdict {
        if self.errors().next().is_none() {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == SeverityOrd::Error)
    }

    pub fn with_code<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a Violation> + 'a {
        self.violations.iter().filter(move |v| v.code == code)
    }

    /// One JSON object per violation, LF-terminated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            let line = serde_json::json!({
                "code": v.code,
                "element": v.element,
                "message": v.message,
                "severity": v.severity.severity(),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn validate(model: &StaticModel) -> ValidationReport {
    validate_with(model, &SuccessorTable::default())
}

pub fn validate_with(model: &StaticModel, table: &SuccessorTable) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |code: &'static str, element: &str, message: String| {
        violations.push(Violation {
            code,
            element: element.to_string(),
            message,
            severity: SeverityOrd::Error,
        })
    };
    let boundary_rules = !model.is_simplified();

    if boundary_rules {
        for f in model.flows().values() {
            let (Some(from), Some(to)) = (slot(model, &f.from), slot(model, &f.to)) else {
                continue;
            };
            let across = model.endpoint_owner(&f.from) != model.endpoint_owner(&f.to);
            if across {
                if !table.allows(from, to, Scope::Across) {
                    push(
                        "V2",
                        &f.id,
                        format!(
                            "flow between machines runs {} to {}; only transfer to transfer may cross",
                            slot_name(from),
                            slot_name(to)
                        ),
                    );
                }
            } else if !table.allows(from, to, Scope::Within) {
                push(
                    "V1",
                    &f.id,
                    format!(
                        "{} may not flow to {} inside one machine",
                        slot_name(from),
                        slot_name(to)
                    ),
                );
            }
        }

        for a in model.actions().values() {
            if a.kind == ActionKind::Receive && !fed_by_carrier(model, &a.id) {
                push(
                    "V3",
                    a.id.as_str(),
                    "receive is not reachable from any transfer or storage".into(),
                );
            }
        }
    }

    for a in model.actions().values() {
        if a.kind == ActionKind::Create {
            let end = Endpoint::Action(a.id.clone());
            if model.flows_from(&end).next().is_none()
                && model.triggers_from(&a.id).next().is_none()
            {
                push(
                    "V4",
                    a.id.as_str(),
                    "created thing goes nowhere: no outgoing flow or trigger".into(),
                );
            }
        }
    }

    let mut by_source: BTreeMap<&ActionId, Vec<&crate::model::Guard>> = BTreeMap::new();
    for t in model.triggers().values() {
        if let Some(g) = &t.guard {
            by_source.entry(&t.from).or_default().push(g);
        }
    }
    for (source, guards) in by_source {
        let keys: BTreeSet<&str> = guards.iter().map(|g| g.key.as_str()).collect();
        if keys.len() > 1 {
            push(
                "V5",
                source.as_str(),
                format!(
                    "sibling triggers are guarded on different keys: {}",
                    keys.into_iter().collect::<Vec<_>>().join(", ")
                ),
            );
            continue;
        }
        let mut seen = HashSet::new();
        for g in guards {
            if !seen.insert(g.value.as_str()) {
                push(
                    "V5",
                    source.as_str(),
                    format!("two sibling triggers share the guard {g}"),
                );
            }
        }
    }

    for thing in things_with_flow_cycles(model) {
        push(
            "V6",
            thing.as_str(),
            "flows of this thing form a cycle".into(),
        );
    }

    violations.sort();
    violations.dedup();
    ValidationReport { violations }
}

fn slot(model: &StaticModel, end: &Endpoint) -> Option<Slot> {
    match end {
        Endpoint::Action(a) => model.action(a).map(|a| Slot::Action(a.kind)),
        Endpoint::Storage(_) => Some(Slot::Storage),
    }
}

fn slot_name(s: Slot) -> &'static str {
    match s {
        Slot::Action(k) => k.as_str(),
        Slot::Storage => "storage",
    }
}

/// Backward search over flows for a Transfer action or a storage.
fn fed_by_carrier(model: &StaticModel, receive: &ActionId) -> bool {
    let mut preds: HashMap<&Endpoint, Vec<&Endpoint>> = HashMap::new();
    for f in model.flows().values() {
        preds.entry(&f.to).or_default().push(&f.from);
    }
    let start = Endpoint::Action(receive.clone());
    let mut stack: Vec<&Endpoint> = preds.get(&start).cloned().unwrap_or_default();
    let mut seen: HashSet<&Endpoint> = HashSet::new();
    while let Some(n) = stack.pop() {
        if !seen.insert(n) {
            continue;
        }
        match n {
            Endpoint::Storage(_) => return true,
            Endpoint::Action(a) => {
                if model.action(a).map(|a| a.kind) == Some(ActionKind::Transfer) {
                    return true;
                }
            }
        }
        if let Some(p) = preds.get(n) {
            stack.extend(p.iter().copied());
        }
    }
    false
}

/// Things whose flow subgraph contains a directed cycle.
pub fn things_with_flow_cycles(model: &StaticModel) -> BTreeSet<ThingId> {
    let mut succ: BTreeMap<&Endpoint, Vec<&Endpoint>> = BTreeMap::new();
    for f in model.flows().values() {
        succ.entry(&f.from).or_default().push(&f.to);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&Endpoint, Mark> = HashMap::new();
    let mut cyclic = BTreeSet::new();
    for &start in succ.keys() {
        if marks.contains_key(start) {
            continue;
        }
        // iterative DFS with an explicit child cursor
        let mut stack: Vec<(&Endpoint, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::Open);
        while let Some((node, i)) = stack.pop() {
            let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if i < children.len() {
                stack.push((node, i + 1));
                let child = children[i];
                match marks.get(child) {
                    Some(Mark::Open) => {
                        if let Some(t) = model.endpoint_thing(child) {
                            cyclic.insert(t.clone());
                        }
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(child, Mark::Open);
                        stack.push((child, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
    cyclic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    fn report(src: &str) -> ValidationReport {
        validate(&parse_model(src).unwrap())
    }

    #[test]
    fn process_to_receive_inside_a_machine_is_v1() {
        let r = report(
            "model M machine A { thing X action c: create of X action p: process of X action v: receive of X }
             flow A.c -> A.p flow A.p -> A.v",
        );
        assert_eq!(r.with_code("V1").count(), 1);
        assert_eq!(r.with_code("V1").next().unwrap().element, "A.p->A.v");
        assert_eq!(r.verdict(), Verdict::Fail);
    }

    #[test]
    fn a_clean_two_machine_chain_passes() {
        let r = report(
            "model M
             machine A { thing X action c: create of X action r: release of X action t: transfer of X }
             machine B { action t: transfer of X action v: receive of X action p: process of X }
             flow A.c -> A.r flow A.r -> A.t flow A.t -> B.t flow B.t -> B.v flow B.v -> B.p",
        );
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.to_json_lines().is_empty());
    }

    #[test]
    fn releasing_straight_into_another_machine_is_v2() {
        let r = report(
            "model M
             machine A { thing X action c: create of X action r: release of X }
             machine B { action t: transfer of X action v: receive of X }
             flow A.c -> A.r flow A.r -> B.t flow B.t -> B.v",
        );
        assert_eq!(r.with_code("V2").count(), 1);
        assert_eq!(r.with_code("V1").count(), 0);
    }

    #[test]
    fn orphan_receive_and_dead_create() {
        let r = report(
            "model M machine A { thing X action c: create of X action v: receive of X action p: process of X }
             flow A.v -> A.p",
        );
        assert_eq!(r.with_code("V3").next().unwrap().element, "A.v");
        assert_eq!(r.with_code("V4").next().unwrap().element, "A.c");
    }

    #[test]
    fn guard_exclusivity() {
        let base = "model M machine A { thing X action p: process of X action a: process of X action b: process of X }";
        let ok = report(&format!(
            "{base} trigger A.p ~> A.a [pin=invalid] trigger A.p ~> A.b [pin=valid]"
        ));
        assert_eq!(ok.with_code("V5").count(), 0);
        let mixed = report(&format!(
            "{base} trigger A.p ~> A.a [pin=invalid] trigger A.p ~> A.b [card=valid]"
        ));
        assert_eq!(mixed.with_code("V5").count(), 1);
        let same = report(&format!(
            "{base} trigger A.p ~> A.a [pin=valid] trigger A.p ~> A.b [pin=valid]"
        ));
        assert_eq!(same.with_code("V5").count(), 1);
    }

    #[test]
    fn per_thing_flow_cycle_is_v6() {
        let r = report(
            "model M machine A { thing X action p: process of X action q: process of X }
             flow A.p -> A.q flow A.q -> A.p",
        );
        let v6: Vec<_> = r.with_code("V6").collect();
        assert_eq!(v6.len(), 1);
        assert_eq!(v6[0].element, "X");
    }

    #[test]
    fn simplified_models_skip_boundary_rules() {
        let src = "model M simplified
             machine A { thing X action c: create of X }
             machine B { action p: process of X }
             flow A.c -> B.p";
        assert!(report(src).passed());
        assert!(!report(&src.replace(" simplified", "")).passed());
    }

    #[test]
    fn store_and_retrieve_through_a_storage() {
        let r = report(
            "model M machine A { thing X store db of X action c: create of X action r: release of X
               action v: receive of X action p: process of X }
             flow A.c -> A.r flow A.r -> A.db flow A.db -> A.v flow A.v -> A.p",
        );
        assert!(r.passed(), "{:?}", r.violations);
    }

    #[test]
    fn report_json_lines_are_sorted_objects() {
        let r = report("model M machine A { thing X action c: create of X }");
        assert_eq!(
            r.to_json_lines(),
            "{\"code\":\"V4\",\"element\":\"A.c\",\"message\":\"created thing goes nowhere: no outgoing flow or trigger\",\"severity\":\"error\"}\n"
        );
    }
}

//! Simplify and elaborate: contracting boundary-crossing chains into direct
//! arrows, and expanding direct arrows back into explicit chains.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::model::{Action, ActionId, ActionKind, Endpoint, FlowArc, StaticModel};
use crate::validate::{validate, Scope, Slot, SuccessorTable, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("model does not validate ({} violation(s))", .0.violations.len())]
    NotValidated(ValidationReport),
    #[error("model is not marked simplified")]
    NotSimplified,
}

/// Release, Transfer and Receive actions that only move a thing across a
/// boundary: no trigger touches them and they are not wired to a storage.
pub fn boundary_candidates(model: &StaticModel) -> BTreeSet<ActionId> {
    let touched: HashSet<&ActionId> = model
        .triggers()
        .values()
        .flat_map(|t| [&t.from, &t.to])
        .collect();
    let stored: HashSet<&ActionId> = model
        .flows()
        .values()
        .filter(|f| f.from.is_storage() || f.to.is_storage())
        .flat_map(|f| [f.from.as_action(), f.to.as_action()])
        .flatten()
        .collect();
    model
        .actions()
        .values()
        .filter(|a| a.kind.is_boundary() && !touched.contains(&a.id) && !stored.contains(&a.id))
        .map(|a| a.id.clone())
        .collect()
}

/// Candidates that sit strictly between two surviving nodes on every path
/// through them. A candidate that can reach a dangling end (a candidate with
/// no successor, or no predecessor) is kept so no reachability is lost.
pub fn eliminable_actions(model: &StaticModel) -> BTreeSet<ActionId> {
    let candidates = boundary_candidates(model);
    let is_cand = |e: &Endpoint| e.as_action().is_some_and(|a| candidates.contains(a));
    let mut succ: BTreeMap<&ActionId, Vec<&ActionId>> = BTreeMap::new();
    let mut pred: BTreeMap<&ActionId, Vec<&ActionId>> = BTreeMap::new();
    let mut has_out: HashSet<&ActionId> = HashSet::new();
    let mut has_in: HashSet<&ActionId> = HashSet::new();
    for f in model.flows().values() {
        if let Some(a) = f.from.as_action() {
            has_out.insert(a);
        }
        if let Some(b) = f.to.as_action() {
            has_in.insert(b);
        }
        if is_cand(&f.from) && is_cand(&f.to) {
            let (a, b) = (f.from.as_action().unwrap(), f.to.as_action().unwrap());
            succ.entry(a).or_default().push(b);
            pred.entry(b).or_default().push(a);
        }
    }
    let spread = |seeds: Vec<&'_ ActionId>, edges: &BTreeMap<&ActionId, Vec<&ActionId>>| {
        let mut seen: HashSet<ActionId> = HashSet::new();
        let mut stack = seeds;
        while let Some(n) = stack.pop() {
            if seen.insert(n.clone()) {
                if let Some(next) = edges.get(n) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        seen
    };
    let sinks: Vec<&ActionId> = candidates.iter().filter(|c| !has_out.contains(c)).collect();
    let sources: Vec<&ActionId> = candidates.iter().filter(|c| !has_in.contains(c)).collect();
    let reaches_sink = spread(sinks, &pred);
    let reached_from_source = spread(sources, &succ);
    candidates
        .iter()
        .filter(|c| !reaches_sink.contains(*c) && !reached_from_source.contains(*c))
        .cloned()
        .collect()
}

/// Contracts every boundary chain on one thing into a single flow arc
/// between the chain's neighbours. Triggers and all other actions are kept
/// with their ids.
pub fn simplify(model: &StaticModel) -> Result<StaticModel, TransformError> {
    let report = validate(model);
    if !report.passed() {
        return Err(TransformError::NotValidated(report));
    }
    let gone = eliminable_actions(model);
    let is_gone = |e: &Endpoint| e.as_action().is_some_and(|a| gone.contains(a));

    let mut out = StaticModel::new(model.name());
    out.set_simplified(true);
    copy_structure(model, &mut out, |a| !gone.contains(&a.id));

    let mut succ: BTreeMap<&Endpoint, Vec<&Endpoint>> = BTreeMap::new();
    for f in model.flows().values() {
        succ.entry(&f.from).or_default().push(&f.to);
    }
    let mut new_flows: BTreeSet<(Endpoint, Endpoint)> = BTreeSet::new();
    for f in model.flows().values() {
        if is_gone(&f.from) {
            continue;
        }
        if !is_gone(&f.to) {
            new_flows.insert((f.from.clone(), f.to.clone()));
            continue;
        }
        let mut stack = vec![&f.to];
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for &next in succ.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                if is_gone(next) {
                    stack.push(next);
                } else if next != &f.from {
                    new_flows.insert((f.from.clone(), next.clone()));
                }
            }
        }
    }
    for (from, to) in new_flows {
        out.add_flow(FlowArc::new(from, to))
            .expect("contraction keeps same-thing endpoints");
    }
    for t in model.triggers().values() {
        out.add_trigger(t.clone())
            .expect("trigger endpoints survive");
    }
    Ok(out)
}

/// Expands every flow arc the boundary rules reject into the shortest chain
/// of release, transfer and receive actions that makes it legal. Arcs that
/// already pass, and arcs touching storages, are copied as is.
pub fn elaborate(model: &StaticModel) -> Result<StaticModel, TransformError> {
    if !model.is_simplified() {
        return Err(TransformError::NotSimplified);
    }
    let report = validate(model);
    if !report.passed() {
        return Err(TransformError::NotValidated(report));
    }
    let table = SuccessorTable::default();
    let mut out = StaticModel::new(model.name());
    copy_structure(model, &mut out, |_| true);

    for f in model.flows().values() {
        let ends = match (f.from.as_action(), f.to.as_action()) {
            (Some(a), Some(b)) => Some((&model.actions()[a], &model.actions()[b])),
            _ => None,
        };
        let steps =
            ends.and_then(|(src, dst)| missing_links(&table, src, dst).map(|s| (src, dst, s)));
        let Some((src, dst, steps)) = steps.filter(|(_, _, s)| !s.is_empty()) else {
            out.add_flow(f.clone()).expect("copied flow");
            continue;
        };
        let tag = format!(
            "{}__{}",
            sanitize(src.id.as_str()),
            sanitize(dst.id.as_str())
        );
        let mut chain: Vec<Endpoint> = vec![Endpoint::Action(src.id.clone())];
        for (kind, far) in steps {
            let side = if far { dst } else { src };
            let suffix = match (kind, far) {
                (ActionKind::Release, _) => "rel",
                (ActionKind::Transfer, false) => "out",
                (ActionKind::Transfer, true) => "in",
                _ => "rcv",
            };
            let id = fresh_id(&out, side.owner.as_str(), &format!("{tag}_{suffix}"));
            out.add_action(Action {
                id: id.clone(),
                kind,
                owner: side.owner.clone(),
                thing: src.thing.clone(),
                label: None,
            })
            .expect("fresh id");
            chain.push(Endpoint::Action(id));
        }
        chain.push(Endpoint::Action(dst.id.clone()));
        for pair in chain.windows(2) {
            let arc = FlowArc::new(pair[0].clone(), pair[1].clone());
            if !out.flows().contains_key(&arc.id) {
                out.add_flow(arc).expect("chain arc");
            }
        }
    }
    for t in model.triggers().values() {
        out.add_trigger(t.clone()).expect("copied trigger");
    }
    Ok(out)
}

/// Shortest list of `(kind, on_destination_side)` links to splice between
/// `src` and `dst`. Empty when the arc is legal already; `None` when no
/// chain of boundary actions can make it legal.
fn missing_links(
    table: &SuccessorTable,
    src: &Action,
    dst: &Action,
) -> Option<Vec<(ActionKind, bool)>> {
    const LINKS: [ActionKind; 3] = [
        ActionKind::Release,
        ActionKind::Transfer,
        ActionKind::Receive,
    ];
    let crossing = src.owner != dst.owner;
    let hop = |from: (ActionKind, bool), to: (ActionKind, bool)| {
        let scope = if from.1 == to.1 {
            Scope::Within
        } else {
            Scope::Across
        };
        (to.1 || !from.1) && table.allows(Slot::Action(from.0), Slot::Action(to.0), scope)
    };
    let start = (src.kind, false);
    let goal = (dst.kind, crossing);
    let mut parent: HashMap<(ActionKind, bool), (ActionKind, bool)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if hop(node, goal) {
            let mut path = Vec::new();
            let mut at = node;
            while at != start {
                path.push(at);
                at = parent[&at];
            }
            path.reverse();
            return Some(path);
        }
        let sides: &[bool] = if crossing { &[false, true] } else { &[false] };
        for &kind in &LINKS {
            for &far in sides {
                let next = (kind, far);
                if next != start && !parent.contains_key(&next) && hop(node, next) {
                    parent.insert(next, node);
                    queue.push_back(next);
                }
            }
        }
    }
    None
}

fn copy_structure(model: &StaticModel, out: &mut StaticModel, keep: impl Fn(&Action) -> bool) {
    let mut machines: Vec<_> = model.machines().values().collect();
    machines.sort_by_key(|m| m.id.as_str().matches('.').count());
    for m in machines {
        out.add_machine(m.clone()).expect("copied machine");
    }
    for t in model.things().values() {
        out.add_thing(t.clone()).expect("copied thing");
    }
    for s in model.storages().values() {
        out.add_storage(s.clone()).expect("copied storage");
    }
    for a in model.actions().values().filter(|a| keep(a)) {
        out.add_action(a.clone()).expect("copied action");
    }
}

fn sanitize(path: &str) -> String {
    path.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn fresh_id(model: &StaticModel, owner: &str, local: &str) -> ActionId {
    let base = format!("{owner}.{local}");
    let mut id = base.clone();
    let mut n = 2;
    while model.resolve_endpoint(&id).is_some() || model.machine(&id.as_str().into()).is_some() {
        id = format!("{base}_{n}");
        n += 1;
    }
    ActionId::from(id)
}

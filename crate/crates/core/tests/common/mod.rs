//! Random valid models for property tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;
use tm_core::{
    Action, ActionId, ActionKind, Endpoint, FlowArc, Guard, Machine, MachineId, StaticModel,
    Storage, Thing, TriggerArc,
};

#[derive(Debug, Clone)]
pub struct ThingPlan {
    /// Machine indices visited in order; neighbours differ.
    pub route: Vec<usize>,
    pub process_at_stops: Vec<bool>,
    pub stash: bool,
    /// Stop the last hop at the receiving transfer.
    pub dangling: bool,
}

#[derive(Debug, Clone)]
pub struct Plan {
    /// Parent index for each machine; roots have `None`.
    pub machines: Vec<Option<usize>>,
    pub things: Vec<ThingPlan>,
    /// (from, to, guarded) as indices into the action list.
    pub triggers: Vec<(usize, usize, bool)>,
}

fn machines() -> impl Strategy<Value = Vec<Option<usize>>> {
    (1usize..=3, prop::collection::vec(any::<bool>(), 3)).prop_map(|(roots, nest)| {
        let mut out: Vec<Option<usize>> = (0..roots).map(|_| None).collect();
        for (i, n) in nest.into_iter().enumerate().take(roots) {
            if n {
                out.push(Some(i));
            }
        }
        out
    })
}

pub fn plan() -> impl Strategy<Value = Plan> {
    machines()
        .prop_flat_map(|ms| {
            let n = ms.len();
            let thing = (
                prop::collection::vec(0..n, 1..=4),
                prop::collection::vec(any::<bool>(), 4),
                any::<bool>(),
                any::<bool>(),
            )
                .prop_map(|(mut route, process_at_stops, stash, dangling)| {
                    route.dedup();
                    ThingPlan {
                        route,
                        process_at_stops,
                        stash,
                        dangling,
                    }
                });
            (
                Just(ms),
                prop::collection::vec(thing, 1..=4),
                prop::collection::vec((0usize..64, 0usize..64, any::<bool>()), 0..6),
            )
        })
        .prop_map(|(machines, things, triggers)| Plan {
            machines,
            things,
            triggers,
        })
}

pub struct Built {
    pub machines: Vec<Machine>,
    pub things: Vec<Thing>,
    pub storages: Vec<Storage>,
    pub actions: Vec<Action>,
    pub flows: Vec<FlowArc>,
    pub triggers: Vec<TriggerArc>,
}

fn machine_ids(plan: &Plan) -> Vec<MachineId> {
    let mut ids: Vec<MachineId> = Vec::new();
    for (i, p) in plan.machines.iter().enumerate() {
        ids.push(match p {
            None => format!("M{i}").into(),
            Some(parent) => format!("{}.S{i}", ids[*parent]).into(),
        });
    }
    ids
}

pub fn build_parts(plan: &Plan) -> Built {
    let ids = machine_ids(plan);
    let machines = plan
        .machines
        .iter()
        .zip(&ids)
        .map(|(p, id)| Machine {
            id: id.clone(),
            name: id.as_str().rsplit('.').next().unwrap().to_string(),
            parent: p.map(|i| ids[i].clone()),
            children: Vec::new(),
        })
        .collect();
    let mut things = Vec::new();
    let mut storages = Vec::new();
    let mut actions: Vec<Action> = Vec::new();
    let mut flows = Vec::new();
    for (t, tp) in plan.things.iter().enumerate() {
        let thing = format!("T{t}");
        let home = &ids[tp.route[0]];
        things.push(Thing {
            id: thing.as_str().into(),
            name: thing.clone(),
            home: home.clone(),
        });
        let mut step = 0;
        let mut add = |m: &MachineId, kind: ActionKind, actions: &mut Vec<Action>| {
            let letter = &kind.as_str()[..1];
            let id = ActionId::from(format!("{m}.{letter}{t}_{step}"));
            step += 1;
            actions.push(Action {
                id: id.clone(),
                kind,
                owner: m.clone(),
                thing: thing.as_str().into(),
                label: None,
            });
            Endpoint::Action(id)
        };
        let mut prev = add(home, ActionKind::Create, &mut actions);
        let link = |a: &Endpoint, b: &Endpoint, flows: &mut Vec<FlowArc>| {
            flows.push(FlowArc::new(a.clone(), b.clone()));
        };
        if tp.process_at_stops[0] || (tp.route.len() == 1 && !tp.stash) {
            let p = add(home, ActionKind::Process, &mut actions);
            link(&prev, &p, &mut flows);
            prev = p;
        }
        if tp.stash {
            let r = add(home, ActionKind::Release, &mut actions);
            let store = Storage {
                id: format!("{home}.db{t}").into(),
                owner: home.clone(),
                name: format!("db{t}"),
                thing: thing.as_str().into(),
            };
            let s = Endpoint::Storage(store.id.clone());
            storages.push(store);
            let v = add(home, ActionKind::Receive, &mut actions);
            link(&prev, &r, &mut flows);
            link(&r, &s, &mut flows);
            link(&s, &v, &mut flows);
            prev = v;
        }
        let hops = tp.route.len() - 1;
        for (h, pair) in tp.route.windows(2).enumerate() {
            let (a, b) = (&ids[pair[0]], &ids[pair[1]]);
            let r = add(a, ActionKind::Release, &mut actions);
            let out = add(a, ActionKind::Transfer, &mut actions);
            let inn = add(b, ActionKind::Transfer, &mut actions);
            link(&prev, &r, &mut flows);
            link(&r, &out, &mut flows);
            link(&out, &inn, &mut flows);
            if h + 1 == hops && tp.dangling {
                prev = inn;
                break;
            }
            let v = add(b, ActionKind::Receive, &mut actions);
            link(&inn, &v, &mut flows);
            prev = v;
            if tp.process_at_stops[(h + 1) % tp.process_at_stops.len()] {
                let p = add(b, ActionKind::Process, &mut actions);
                link(&prev, &p, &mut flows);
                prev = p;
            }
        }
    }
    let mut triggers = Vec::new();
    let mut seen = HashSet::new();
    for &(a, b, guarded) in &plan.triggers {
        let (from, to) = (
            &actions[a % actions.len()].id,
            &actions[b % actions.len()].id,
        );
        if from == to || !seen.insert((from.clone(), to.clone())) {
            continue;
        }
        let guard = guarded.then(|| Guard {
            key: format!("k{}", a % actions.len()),
            value: format!("v{}", b % actions.len()),
        });
        triggers.push(TriggerArc::new(from.clone(), to.clone(), guard));
    }
    Built {
        machines,
        things,
        storages,
        actions,
        flows,
        triggers,
    }
}

/// Inserts parts in the given per-section orders (indices are reduced
/// modulo the section length and used as a rotation).
pub fn assemble(b: &Built, rotate: usize) -> StaticModel {
    fn rot<T: Clone>(v: &[T], k: usize) -> Vec<T> {
        let mut v = v.to_vec();
        if !v.is_empty() {
            let n = v.len();
            v.rotate_left(k % n);
            if k % 2 == 1 {
                v.reverse();
            }
        }
        v
    }
    let mut m = StaticModel::new("Gen");
    let mut machines = b.machines.clone();
    machines.sort_by_key(|m| m.id.as_str().matches('.').count());
    for x in machines {
        m.add_machine(x).unwrap();
    }
    for x in rot(&b.things, rotate) {
        m.add_thing(x).unwrap();
    }
    for x in rot(&b.storages, rotate) {
        m.add_storage(x).unwrap();
    }
    for x in rot(&b.actions, rotate) {
        m.add_action(x).unwrap();
    }
    for x in rot(&b.flows, rotate) {
        m.add_flow(x).unwrap();
    }
    for x in rot(&b.triggers, rotate) {
        m.add_trigger(x).unwrap();
    }
    m
}

pub fn build(plan: &Plan) -> StaticModel {
    assemble(&build_parts(plan), 0)
}

/// Pairs of actions `(a, b)` within `keep` where `b` is reachable from `a`
/// by flows (through anything, storages included).
pub fn flow_closure(
    model: &StaticModel,
    keep: &BTreeSet<ActionId>,
) -> BTreeSet<(ActionId, ActionId)> {
    let mut succ: BTreeMap<&Endpoint, Vec<&Endpoint>> = BTreeMap::new();
    for f in model.flows().values() {
        succ.entry(&f.from).or_default().push(&f.to);
    }
    let mut out = BTreeSet::new();
    for a in keep {
        let start = Endpoint::Action(a.clone());
        let mut stack: Vec<&Endpoint> = succ.get(&start).cloned().unwrap_or_default();
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            if let Some(b) = n.as_action() {
                if keep.contains(b) {
                    out.insert((a.clone(), b.clone()));
                }
            }
            if let Some(next) = succ.get(n) {
                stack.extend(next.iter().copied());
            }
        }
    }
    out
}

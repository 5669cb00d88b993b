//! The dynamic plane: events as regions over the static model, and the
//! behavioral graph of guarded precedence between them.
//!
//! `.ev` files look like
//!
//! ```text
//! events ATM
//! event E1 "The user inserts a card" { User.c_card, User.r_card }
//! chronology {
//!   E1 -> E2
//!   E3 -> E4 [card=invalid]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::dsl::diag::codes;
use crate::dsl::lexer::{tokenize, Cursor, Tok};
use crate::dsl::{quote, Diagnostics, ParseDiagnostic, SourceSpan};
use crate::model::{ActionId, ActionKind, Endpoint, EventId, Guard, StaticModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDef {
    pub id: EventId,
    pub description: String,
    pub region: BTreeSet<ActionId>,
}

impl EventDef {
    pub fn new<I, A>(id: &str, description: &str, region: I) -> Self
    where
        I: IntoIterator<Item = A>,
        A: Into<ActionId>,
    {
        EventDef {
            id: id.into(),
            description: description.to_string(),
            region: region.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlayError {
    #[error("event `{event}` refers to unknown action `{action}`")]
    UnknownAction { event: EventId, action: ActionId },
    #[error("event `{0}` has an empty region")]
    EmptyRegion(EventId),
    #[error("region of event `{0}` is not connected by flows or triggers")]
    DisconnectedRegion(EventId),
    #[error("events `{first}` and `{second}` share non-transfer action `{action}`")]
    IllegalOverlap {
        first: EventId,
        second: EventId,
        action: ActionId,
    },
    #[error("event `{0}` is defined twice")]
    DuplicateEvent(EventId),
}

impl OverlayError {
    pub fn event(&self) -> &EventId {
        match self {
            OverlayError::UnknownAction { event, .. } => event,
            OverlayError::EmptyRegion(e)
            | OverlayError::DisconnectedRegion(e)
            | OverlayError::DuplicateEvent(e) => e,
            OverlayError::IllegalOverlap { second, .. } => second,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            OverlayError::UnknownAction { .. } => codes::UNKNOWN_ACTION,
            OverlayError::EmptyRegion(_) => codes::EMPTY_REGION,
            OverlayError::DisconnectedRegion(_) => codes::DISCONNECTED_REGION,
            OverlayError::IllegalOverlap { .. } => codes::ILLEGAL_OVERLAP,
            OverlayError::DuplicateEvent(_) => codes::DUPLICATE_ID,
        }
    }
}

/// Events over one static model, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventOverlay {
    pub model_name: String,
    pub events: BTreeMap<EventId, EventDef>,
    /// Hand-authored chronology, if the overlay file declared one.
    pub declared: Option<BehaviorGraph>,
}

impl EventOverlay {
    pub fn empty(model: &StaticModel) -> Self {
        EventOverlay {
            model_name: model.name().to_string(),
            ..Default::default()
        }
    }

    /// Builds an overlay, checking every region against `model`. All
    /// problems are returned, not only the first.
    pub fn new(model: &StaticModel, events: Vec<EventDef>) -> Result<Self, Vec<OverlayError>> {
        let mut errors = Vec::new();
        let mut map: BTreeMap<EventId, EventDef> = BTreeMap::new();
        for ev in events {
            if let Err(e) = check_region(model, &ev) {
                errors.push(e);
            }
            if map.contains_key(&ev.id) {
                errors.push(OverlayError::DuplicateEvent(ev.id.clone()));
                continue;
            }
            map.insert(ev.id.clone(), ev);
        }
        let mut owner: HashMap<&ActionId, &EventId> = HashMap::new();
        for ev in map.values() {
            for a in &ev.region {
                let Some(action) = model.action(a) else {
                    continue;
                };
                if action.kind == ActionKind::Transfer {
                    continue;
                }
                if let Some(first) = owner.insert(a, &ev.id) {
                    errors.push(OverlayError::IllegalOverlap {
                        first: first.clone(),
                        second: ev.id.clone(),
                        action: a.clone(),
                    });
                }
            }
        }
        if errors.is_empty() {
            Ok(EventOverlay {
                model_name: model.name().to_string(),
                events: map,
                declared: None,
            })
        } else {
            Err(errors)
        }
    }

    pub fn ids(&self) -> BTreeSet<EventId> {
        self.events.keys().cloned().collect()
    }

    /// Events whose region contains `action`.
    pub fn events_of<'a>(&'a self, action: &'a ActionId) -> impl Iterator<Item = &'a EventId> + 'a {
        self.events
            .values()
            .filter(move |e| e.region.contains(action))
            .map(|e| &e.id)
    }
}

fn check_region(model: &StaticModel, ev: &EventDef) -> Result<(), OverlayError> {
    if ev.region.is_empty() {
        return Err(OverlayError::EmptyRegion(ev.id.clone()));
    }
    if let Some(missing) = ev.region.iter().find(|a| model.action(a).is_none()) {
        return Err(OverlayError::UnknownAction {
            event: ev.id.clone(),
            action: missing.clone(),
        });
    }
    if !weakly_connected(model, &ev.region) {
        return Err(OverlayError::DisconnectedRegion(ev.id.clone()));
    }
    Ok(())
}

/// Connectivity of `region` under flow and trigger arcs between its members.
pub fn weakly_connected(model: &StaticModel, region: &BTreeSet<ActionId>) -> bool {
    let Some(start) = region.iter().next() else {
        return true;
    };
    let mut adj: HashMap<&ActionId, Vec<&ActionId>> = HashMap::new();
    let mut link = |a: &'_ Endpoint, b: &'_ Endpoint| {
        if let (Some(a), Some(b)) = (a.as_action(), b.as_action()) {
            if let (Some(a), Some(b)) = (region.get(a), region.get(b)) {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
        }
    };
    for f in model.flows().values() {
        link(&f.from, &f.to);
    }
    for t in model.triggers().values() {
        link(
            &Endpoint::Action(t.from.clone()),
            &Endpoint::Action(t.to.clone()),
        );
    }
    let mut seen: HashSet<&ActionId> = HashSet::new();
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        if seen.insert(n) {
            if let Some(next) = adj.get(n) {
                stack.extend(next.iter().copied());
            }
        }
    }
    seen.len() == region.len()
}

/// Non-transfer actions outside every region. Reported as warnings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageReport {
    pub uncovered: Vec<ActionId>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.uncovered.is_empty()
    }
}

pub fn check_coverage(overlay: &EventOverlay, model: &StaticModel) -> CoverageReport {
    let covered: HashSet<&ActionId> = overlay.events.values().flat_map(|e| &e.region).collect();
    CoverageReport {
        uncovered: model
            .actions()
            .values()
            .filter(|a| a.kind != ActionKind::Transfer && !covered.contains(&a.id))
            .map(|a| a.id.clone())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BehaviorEdge {
    pub from: EventId,
    pub to: EventId,
    pub guard: Option<Guard>,
}

impl BehaviorEdge {
    pub fn new(from: &str, to: &str, guard: Option<(&str, &str)>) -> Self {
        BehaviorEdge {
            from: from.into(),
            to: to.into(),
            guard: guard.map(|(k, v)| Guard {
                key: k.to_string(),
                value: v.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for BehaviorEdge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)?;
        if let Some(g) = &self.guard {
            write!(f, " [{g}]")?;
        }
        Ok(())
    }
}

/// Directed graph over events with optionally guarded precedence edges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorGraph {
    pub nodes: BTreeSet<EventId>,
    pub edges: BTreeSet<BehaviorEdge>,
}

impl BehaviorGraph {
    pub fn in_edges<'a>(&'a self, e: &'a EventId) -> impl Iterator<Item = &'a BehaviorEdge> + 'a {
        self.edges.iter().filter(move |x| &x.to == e)
    }

    pub fn out_edges<'a>(&'a self, e: &'a EventId) -> impl Iterator<Item = &'a BehaviorEdge> + 'a {
        self.edges.iter().filter(move |x| &x.from == e)
    }

    /// Events with no incoming edge.
    pub fn sources(&self) -> BTreeSet<EventId> {
        let targets: HashSet<&EventId> = self.edges.iter().map(|e| &e.to).collect();
        self.nodes
            .iter()
            .filter(|n| !targets.contains(n))
            .cloned()
            .collect()
    }

    pub fn guard_keys(&self) -> BTreeSet<&str> {
        self.edges
            .iter()
            .filter_map(|e| e.guard.as_ref().map(|g| g.key.as_str()))
            .collect()
    }

    /// Checks the graph against an overlay and its model: every node is an
    /// overlay event, and every guard key appears on some static trigger.
    pub fn check(&self, overlay: &EventOverlay, model: &StaticModel) -> Result<(), String> {
        for n in &self.nodes {
            if !overlay.events.contains_key(n) {
                return Err(format!("behavior node `{n}` is not an overlay event"));
            }
        }
        for e in &self.edges {
            if !self.nodes.contains(&e.from) || !self.nodes.contains(&e.to) {
                return Err(format!("edge `{e}` leaves the node set"));
            }
        }
        let keys = model.guard_keys();
        for k in self.guard_keys() {
            if !keys.contains(k) {
                return Err(format!("guard key `{k}` does not appear on any trigger"));
            }
        }
        Ok(())
    }
}

/// Derives the behavioral graph: `A -> B` exists when a static arc leaves
/// A's region and enters B's, or when a transfer shared by both regions
/// carries flow from A's side to B's. Trigger guards carry over.
pub fn infer_behavior(model: &StaticModel, overlay: &EventOverlay) -> BehaviorGraph {
    let mut edges = BTreeSet::new();
    let regions: Vec<&EventDef> = overlay.events.values().collect();
    let mut add = |from: &ActionId, to: &ActionId, guard: Option<&Guard>| {
        for a in &regions {
            if !a.region.contains(from) || a.region.contains(to) {
                continue;
            }
            for b in &regions {
                if b.id != a.id && b.region.contains(to) && !b.region.contains(from) {
                    edges.insert(BehaviorEdge {
                        from: a.id.clone(),
                        to: b.id.clone(),
                        guard: guard.cloned(),
                    });
                }
            }
        }
    };
    for f in model.flows().values() {
        if let (Some(from), Some(to)) = (f.from.as_action(), f.to.as_action()) {
            add(from, to, None);
        }
    }
    for t in model.triggers().values() {
        add(&t.from, &t.to, t.guard.as_ref());
    }
    for a in &regions {
        for b in &regions {
            if a.id == b.id {
                continue;
            }
            for shared in a.region.intersection(&b.region) {
                let end = Endpoint::Action(shared.clone());
                let from_a = model.flows_into(&end).any(|f| {
                    f.from
                        .as_action()
                        .is_some_and(|x| a.region.contains(x) && !b.region.contains(x))
                });
                let to_b = model.flows_from(&end).any(|f| {
                    f.to.as_action()
                        .is_some_and(|y| b.region.contains(y) && !a.region.contains(y))
                });
                if from_a && to_b {
                    edges.insert(BehaviorEdge {
                        from: a.id.clone(),
                        to: b.id.clone(),
                        guard: None,
                    });
                }
            }
        }
    }
    BehaviorGraph {
        nodes: overlay.ids(),
        edges,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node sets differ: only declared {only_declared:?}, only inferred {only_inferred:?}")]
pub struct NodeSetMismatch {
    pub only_declared: Vec<EventId>,
    pub only_inferred: Vec<EventId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorDiff {
    /// Inferred but not declared.
    pub missing: Vec<BehaviorEdge>,
    /// Declared but not inferred.
    pub extra: Vec<BehaviorEdge>,
}

impl BehaviorDiff {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

pub fn check_behavior(
    declared: &BehaviorGraph,
    inferred: &BehaviorGraph,
) -> Result<BehaviorDiff, NodeSetMismatch> {
    if declared.nodes != inferred.nodes {
        return Err(NodeSetMismatch {
            only_declared: declared
                .nodes
                .difference(&inferred.nodes)
                .cloned()
                .collect(),
            only_inferred: inferred
                .nodes
                .difference(&declared.nodes)
                .cloned()
                .collect(),
        });
    }
    Ok(BehaviorDiff {
        missing: inferred
            .edges
            .difference(&declared.edges)
            .cloned()
            .collect(),
        extra: declared
            .edges
            .difference(&inferred.edges)
            .cloned()
            .collect(),
    })
}

pub fn parse_overlay(text: &str, model: &StaticModel) -> Result<EventOverlay, Diagnostics> {
    parse_overlay_named(text, model, "<input>")
}

pub fn parse_overlay_named(
    text: &str,
    model: &StaticModel,
    file: &str,
) -> Result<EventOverlay, Diagnostics> {
    let toks = tokenize(text, file)?;
    let mut cur = Cursor::new(&toks, file, text);
    let header_span = cur.span();
    cur.expect_keyword("events")?;
    let model_name = cur.expect_ident("a model name")?;
    let mut diags = Vec::new();
    if model_name != model.name() {
        diags.push(ParseDiagnostic::error(
            header_span,
            codes::MODEL_MISMATCH,
            format!(
                "overlay is for model `{model_name}`, not `{}`",
                model.name()
            ),
        ));
    }
    let mut events: Vec<(SourceSpan, EventDef)> = Vec::new();
    let mut chronology: Option<Vec<(SourceSpan, BehaviorEdge)>> = None;
    while !cur.at_end() {
        let span = cur.span();
        if cur.eat_keyword("event") {
            let id = cur.expect_ident("an event id")?;
            let description = cur.expect_str("a quoted description")?;
            cur.expect(&Tok::LBrace)?;
            let mut region = BTreeSet::new();
            while !cur.eat(&Tok::RBrace) {
                region.insert(ActionId::from(cur.expect_path("an action reference")?));
                if !cur.eat(&Tok::Comma) {
                    cur.expect(&Tok::RBrace)?;
                    break;
                }
            }
            events.push((
                span,
                EventDef {
                    id: id.into(),
                    description,
                    region,
                },
            ));
        } else if cur.eat_keyword("chronology") {
            if chronology.is_some() {
                return Err(cur.error("only one chronology block is allowed"));
            }
            cur.expect(&Tok::LBrace)?;
            let mut edges = Vec::new();
            while !cur.eat(&Tok::RBrace) {
                let span = cur.span();
                let from = cur.expect_ident("an event id")?;
                cur.expect(&Tok::Arrow)?;
                let to = cur.expect_ident("an event id")?;
                let guard = cur.opt_guard()?.map(|(key, value)| Guard { key, value });
                edges.push((
                    span,
                    BehaviorEdge {
                        from: from.into(),
                        to: to.into(),
                        guard,
                    },
                ));
            }
            chronology = Some(edges);
        } else {
            return Err(cur.error("expected `event` or `chronology`"));
        }
    }

    let spans: HashMap<EventId, SourceSpan> = events
        .iter()
        .map(|(s, e)| (e.id.clone(), s.clone()))
        .collect();
    let ids: BTreeSet<EventId> = events.iter().map(|(_, e)| e.id.clone()).collect();
    let mut overlay = match EventOverlay::new(model, events.into_iter().map(|(_, e)| e).collect()) {
        Ok(o) => Some(o),
        Err(errors) => {
            for e in errors {
                let span = spans
                    .get(e.event())
                    .cloned()
                    .unwrap_or_else(|| SourceSpan::new(file, 1, 1));
                diags.push(ParseDiagnostic::error(span, e.code(), e.to_string()));
            }
            None
        }
    };
    if let Some(edges) = chronology {
        let mut graph = BehaviorGraph {
            nodes: ids.clone(),
            edges: BTreeSet::new(),
        };
        for (span, edge) in edges {
            for end in [&edge.from, &edge.to] {
                if !ids.contains(end) {
                    diags.push(ParseDiagnostic::error(
                        span.clone(),
                        codes::DANGLING_REFERENCE,
                        format!("chronology refers to unknown event `{end}`"),
                    ));
                }
            }
            graph.edges.insert(edge);
        }
        if let Some(o) = overlay.as_mut() {
            o.declared = Some(graph);
        }
    }
    match overlay {
        Some(o) if diags.is_empty() => Ok(o),
        _ => Err(Diagnostics(diags)),
    }
}

/// Canonical `.ev` text for an overlay and its declared chronology.
pub fn print_overlay(overlay: &EventOverlay) -> String {
    let mut out = format!("events {}\n", overlay.model_name);
    for ev in overlay.events.values() {
        let refs: Vec<&str> = ev.region.iter().map(ActionId::as_str).collect();
        let _ = writeln!(
            out,
            "event {} {} {{ {} }}",
            ev.id,
            quote(&ev.description),
            refs.join(", ")
        );
    }
    if let Some(graph) = &overlay.declared {
        out.push_str("chronology {\n");
        for e in &graph.edges {
            let _ = writeln!(out, "  {e}");
        }
        out.push_str("}\n");
    }
    out
}

/// Edges consistent with a fixed assignment of guard values. Unguarded
/// edges always pass; guarded edges pass when the key is bound to their value.
pub fn filter_edges<F>(graph: &BehaviorGraph, passes: F) -> Vec<&BehaviorEdge>
where
    F: Fn(&Guard) -> bool,
{
    graph
        .edges
        .iter()
        .filter(|e| e.guard.as_ref().is_none_or(&passes))
        .collect()
}

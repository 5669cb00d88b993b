//! Token-game execution of a behavioral graph under a scenario.
//!
//! Firing an event puts one token on each out-edge whose guard passes. An
//! event is enabled once a token sits on some in-edge and every empty
//! in-edge is either hopeless (its source can no longer fire, or its guard
//! can no longer pass) or is a loop-back edge. All enabled
//! events fire together in one tick.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde_json::json;
use thiserror::Error;

use crate::dsl::diag::codes;
use crate::dsl::lexer::{tokenize, Cursor, Tok};
use crate::dsl::{Diagnostics, ParseDiagnostic};
use crate::events::{BehaviorEdge, BehaviorGraph};
use crate::model::{EventId, Guard};

pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    Scalar(String),
    /// Successive evaluations take successive values; the last one repeats.
    Sequence(Vec<String>),
}

impl Binding {
    fn remaining(&self, cursor: usize) -> &[String] {
        match self {
            Binding::Scalar(v) => std::slice::from_ref(v),
            Binding::Sequence(vs) => &vs[cursor.min(vs.len().saturating_sub(1))..],
        }
    }

    fn all(&self) -> &[String] {
        self.remaining(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub model_name: String,
    pub bindings: BTreeMap<String, Binding>,
    pub max_steps: usize,
}

impl Scenario {
    pub fn new(name: &str, model_name: &str) -> Self {
        Scenario {
            name: name.to_string(),
            model_name: model_name.to_string(),
            bindings: BTreeMap::new(),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn bind(mut self, key: &str, value: &str) -> Self {
        self.bindings
            .insert(key.to_string(), Binding::Scalar(value.to_string()));
        self
    }

    pub fn bind_seq(mut self, key: &str, values: &[&str]) -> Self {
        self.bindings.insert(
            key.to_string(),
            Binding::Sequence(values.iter().map(|v| v.to_string()).collect()),
        );
        self
    }

    /// Whether `guard` can pass under any value this scenario may supply.
    pub fn admits(&self, guard: &Guard) -> bool {
        self.bindings
            .get(&guard.key)
            .is_some_and(|b| b.all().contains(&guard.value))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, Diagnostics> {
    parse_scenario_named(text, "<input>")
}

pub fn parse_scenario_named(text: &str, file: &str) -> Result<Scenario, Diagnostics> {
    let toks = tokenize(text, file)?;
    let mut cur = Cursor::new(&toks, file, text);
    cur.expect_keyword("scenario")?;
    let name = cur.expect_ident("a scenario name")?;
    cur.expect_keyword("on")?;
    let model_name = cur.expect_ident("a model name")?;
    let mut sc = Scenario::new(&name, &model_name);
    let mut seen_steps = false;
    while !cur.at_end() {
        let span = cur.span();
        if cur.eat_keyword("bind") {
            let key = cur.expect_ident("a guard key")?;
            cur.expect(&Tok::Eq)?;
            let binding = if cur.eat(&Tok::LBracket) {
                let mut values = vec![cur.expect_ident("a guard value")?];
                while cur.eat(&Tok::Comma) {
                    values.push(cur.expect_ident("a guard value")?);
                }
                cur.expect(&Tok::RBracket)?;
                Binding::Sequence(values)
            } else {
                Binding::Scalar(cur.expect_ident("a guard value")?)
            };
            if sc.bindings.insert(key.clone(), binding).is_some() {
                return Err(Diagnostics::single(ParseDiagnostic::error(
                    span,
                    codes::DUPLICATE_ID,
                    format!("key `{key}` is bound twice"),
                )));
            }
        } else if cur.eat_keyword("max_steps") {
            if seen_steps {
                return Err(cur.error("`max_steps` is set twice"));
            }
            seen_steps = true;
            cur.expect(&Tok::Eq)?;
            let n = cur.expect_ident("a step count")?;
            sc.max_steps = n.parse().map_err(|_| {
                Diagnostics::single(ParseDiagnostic::error(
                    span,
                    codes::SYNTAX,
                    format!("`{n}` is not a step count"),
                ))
            })?;
        } else {
            return Err(cur.error("expected `bind` or `max_steps`"));
        }
    }
    Ok(sc)
}

pub fn print_scenario(sc: &Scenario) -> String {
    let mut out = format!("scenario {} on {}\n", sc.name, sc.model_name);
    for (k, b) in &sc.bindings {
        match b {
            Binding::Scalar(v) => out.push_str(&format!("bind {k} = {v}\n")),
            Binding::Sequence(vs) => out.push_str(&format!("bind {k} = [{}]\n", vs.join(", "))),
        }
    }
    if sc.max_steps != DEFAULT_MAX_STEPS {
        out.push_str(&format!("max_steps = {}\n", sc.max_steps));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event `{event}` needs guard key `{key}`, which the scenario does not bind")]
    UnboundGuard { event: EventId, key: String },
    #[error("scenario binds `{0}`, which no behavior edge is guarded by")]
    UnknownKey(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub event: EventId,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminal {
    Completed,
    Deadlocked { waiting: Vec<EventId> },
    StepLimit,
}

impl Terminal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Terminal::Completed => "completed",
            Terminal::Deadlocked { .. } => "deadlocked",
            Terminal::StepLimit => "step-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<Step>,
    pub terminal: Terminal,
}

impl Trace {
    pub fn events(&self) -> Vec<&EventId> {
        self.steps.iter().map(|s| &s.event).collect()
    }

    pub fn fired(&self) -> BTreeSet<&EventId> {
        self.steps.iter().map(|s| &s.event).collect()
    }

    pub fn count(&self, e: &str) -> usize {
        self.steps.iter().filter(|s| s.event.as_str() == e).count()
    }

    /// One JSON object per line: each step, then the terminal state.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&json!({"event": s.event.as_str(), "tick": s.tick}).to_string());
            out.push('\n');
        }
        let mut last = json!({"terminal": self.terminal.as_str()});
        if let Terminal::Deadlocked { waiting } = &self.terminal {
            last["waiting"] = json!(waiting.iter().map(EventId::as_str).collect::<Vec<_>>());
        }
        out.push_str(&last.to_string());
        out.push('\n');
        out
    }
}

/// Rejects bindings for keys that no edge uses.
pub fn check_scenario(graph: &BehaviorGraph, sc: &Scenario) -> Result<(), SimError> {
    let keys = graph.guard_keys();
    match sc.bindings.keys().find(|k| !keys.contains(k.as_str())) {
        Some(k) => Err(SimError::UnknownKey(k.clone())),
        None => Ok(()),
    }
}

struct Net<'a> {
    edges: Vec<&'a BehaviorEdge>,
    /// Edges that close a cycle in a depth-first walk from the sources,
    /// taken in event order. They never hold up a first firing.
    back: Vec<bool>,
    ins: HashMap<&'a EventId, Vec<usize>>,
    outs: HashMap<&'a EventId, Vec<usize>>,
}

impl<'a> Net<'a> {
    fn new(graph: &'a BehaviorGraph) -> Self {
        let edges: Vec<&BehaviorEdge> = graph.edges.iter().collect();
        let mut ins: HashMap<&EventId, Vec<usize>> = HashMap::new();
        let mut outs: HashMap<&EventId, Vec<usize>> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            ins.entry(&e.to).or_default().push(i);
            outs.entry(&e.from).or_default().push(i);
        }
        let mut net = Net {
            back: vec![false; edges.len()],
            edges,
            ins,
            outs,
        };
        let mut state: HashMap<&EventId, bool> = HashMap::new();
        let roots = graph.sources();
        for n in roots.iter().chain(graph.nodes.iter()) {
            if let Some(n) = graph.nodes.get(n) {
                net.dfs(n, &mut state);
            }
        }
        net
    }

    /// `state` maps a node to whether it is still on the stack.
    fn dfs(&mut self, n: &'a EventId, state: &mut HashMap<&'a EventId, bool>) {
        if state.contains_key(n) {
            return;
        }
        state.insert(n, true);
        let mut outs = self.outs(n).to_vec();
        outs.sort_by(|a, b| self.edges[*a].to.cmp(&self.edges[*b].to));
        for i in outs {
            let to = &self.edges[i].to;
            match state.get(to) {
                Some(true) => self.back[i] = true,
                Some(false) => {}
                None => self.dfs(to, state),
            }
        }
        state.insert(n, false);
    }

    fn back_edges(&self) -> HashSet<&'a BehaviorEdge> {
        self.edges
            .iter()
            .zip(&self.back)
            .filter(|(_, b)| **b)
            .map(|(e, _)| *e)
            .collect()
    }

    fn ins(&self, e: &EventId) -> &[usize] {
        self.ins.get(e).map_or(&[], Vec::as_slice)
    }

    fn outs(&self, e: &EventId) -> &[usize] {
        self.outs.get(e).map_or(&[], Vec::as_slice)
    }

    /// Nodes reachable from `start` over edges accepted by `pass`, never
    /// entering `avoid`.
    fn reach<F>(
        &self,
        start: impl IntoIterator<Item = &'a EventId>,
        avoid: Option<&EventId>,
        pass: F,
    ) -> HashSet<&'a EventId>
    where
        F: Fn(&BehaviorEdge) -> bool,
    {
        let mut seen = HashSet::new();
        let mut queue: VecDeque<&EventId> =
            start.into_iter().filter(|n| Some(*n) != avoid).collect();
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n) {
                continue;
            }
            for &i in self.outs(n) {
                let e = self.edges[i];
                if Some(&e.to) != avoid && pass(e) {
                    queue.push_back(&e.to);
                }
            }
        }
        seen
    }
}

struct State<'a> {
    sc: &'a Scenario,
    tokens: Vec<usize>,
    cursors: HashMap<&'a str, usize>,
}

impl<'a> State<'a> {
    fn can_pass(&self, e: &BehaviorEdge) -> bool {
        match &e.guard {
            None => true,
            Some(g) => self.sc.bindings.get(&g.key).is_some_and(|b| {
                b.remaining(self.cursors.get(g.key.as_str()).copied().unwrap_or(0))
                    .contains(&g.value)
            }),
        }
    }

    fn evaluate(&mut self, key: &'a str, event: &EventId) -> Result<&'a str, SimError> {
        let binding = self
            .sc
            .bindings
            .get(key)
            .ok_or_else(|| SimError::UnboundGuard {
                event: event.clone(),
                key: key.to_string(),
            })?;
        Ok(match binding {
            Binding::Scalar(v) => v,
            Binding::Sequence(vs) => {
                let c = self.cursors.entry(key).or_insert(0);
                let v = vs
                    .get((*c).min(vs.len().saturating_sub(1)))
                    .ok_or_else(|| SimError::UnboundGuard {
                        event: event.clone(),
                        key: key.to_string(),
                    })?;
                *c += 1;
                v
            }
        })
    }
}

pub fn simulate(graph: &BehaviorGraph, sc: &Scenario) -> Result<Trace, SimError> {
    check_scenario(graph, sc)?;
    let net = Net::new(graph);
    let mut st = State {
        sc,
        tokens: vec![0; net.edges.len()],
        cursors: HashMap::new(),
    };
    let mut steps = Vec::new();
    let mut ready: Vec<&EventId> = graph
        .sources()
        .into_iter()
        .filter_map(|s| graph.nodes.get(&s))
        .collect();
    let mut tick = 0u64;
    loop {
        if ready.is_empty() {
            let waiting: BTreeSet<EventId> = net
                .edges
                .iter()
                .enumerate()
                .filter(|(i, _)| st.tokens[*i] > 0)
                .map(|(_, e)| e.to.clone())
                .collect();
            let terminal = if waiting.is_empty() {
                Terminal::Completed
            } else {
                Terminal::Deadlocked {
                    waiting: waiting.into_iter().collect(),
                }
            };
            return Ok(Trace { steps, terminal });
        }
        for &ev in &ready {
            for &i in net.ins(ev) {
                st.tokens[i] = st.tokens[i].saturating_sub(1);
            }
        }
        for &ev in &ready {
            if steps.len() >= sc.max_steps {
                return Ok(Trace {
                    steps,
                    terminal: Terminal::StepLimit,
                });
            }
            steps.push(Step {
                event: ev.clone(),
                tick,
            });
            let mut values: HashMap<&str, &str> = HashMap::new();
            for &i in net.outs(ev) {
                let e = net.edges[i];
                let pass = match &e.guard {
                    None => true,
                    Some(g) => {
                        let v = match values.get(g.key.as_str()) {
                            Some(v) => *v,
                            None => {
                                let v = st.evaluate(&g.key, ev)?;
                                values.insert(&g.key, v);
                                v
                            }
                        };
                        v == g.value
                    }
                };
                if pass {
                    st.tokens[i] += 1;
                }
            }
        }
        tick += 1;
        ready = graph
            .nodes
            .iter()
            .filter(|n| enabled(&net, &st, n))
            .collect();
    }
}

fn enabled(net: &Net<'_>, st: &State<'_>, x: &EventId) -> bool {
    let ins = net.ins(x);
    if !ins.iter().any(|&i| st.tokens[i] > 0) {
        return false;
    }
    let empty: Vec<&BehaviorEdge> = ins
        .iter()
        .filter(|&&i| st.tokens[i] == 0 && !net.back[i])
        .map(|&i| net.edges[i])
        .filter(|e| st.can_pass(e))
        .collect();
    if empty.is_empty() {
        return true;
    }
    let marked = net
        .edges
        .iter()
        .enumerate()
        .filter(|(i, _)| st.tokens[*i] > 0)
        .map(|(_, e)| &e.to);
    let live = net.reach(marked, Some(x), |e| st.can_pass(e));
    empty.iter().all(|e| !live.contains(&e.from))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("{nodes} events exceed the enumeration limit of {max}")]
    TooLarge { nodes: usize, max: usize },
    #[error("the filtered behavior graph has a cycle")]
    Cyclic,
    #[error("more than {0} traces")]
    TooMany(usize),
}

pub const MAX_ENUMERATED_NODES: usize = 12;

/// The subgraph a scenario with fixed values can traverse: unguarded edges
/// plus edges whose guard value the binding may produce, restricted to
/// nodes reachable from the sources.
pub fn filtered_graph(graph: &BehaviorGraph, sc: &Scenario) -> BehaviorGraph {
    let net = Net::new(graph);
    let sources = graph.sources();
    let keep = |e: &BehaviorEdge| e.guard.as_ref().is_none_or(|g| sc.admits(g));
    let reached = net.reach(
        sources.iter().filter_map(|s| graph.nodes.get(s)),
        None,
        keep,
    );
    BehaviorGraph {
        nodes: reached.iter().map(|n| (*n).clone()).collect(),
        edges: graph
            .edges
            .iter()
            .filter(|e| keep(e) && reached.contains(&e.from) && reached.contains(&e.to))
            .cloned()
            .collect(),
    }
}

/// Every order of the filtered graph's events that respects its edges.
pub fn all_traces(
    graph: &BehaviorGraph,
    sc: &Scenario,
    limit: usize,
) -> Result<Vec<Vec<EventId>>, EnumerateError> {
    let g = filtered_graph(graph, sc);
    if g.nodes.len() > MAX_ENUMERATED_NODES {
        return Err(EnumerateError::TooLarge {
            nodes: g.nodes.len(),
            max: MAX_ENUMERATED_NODES,
        });
    }
    let nodes: Vec<&EventId> = g.nodes.iter().collect();
    let index: HashMap<&EventId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut preds = vec![0u32; nodes.len()];
    for e in &g.edges {
        preds[index[&e.to]] |= 1 << index[&e.from];
    }
    // Kahn's check for cycles.
    let mut done = 0u32;
    loop {
        let next = (0..nodes.len()).find(|&i| done & (1 << i) == 0 && preds[i] & !done == 0);
        match next {
            Some(i) => done |= 1 << i,
            None => break,
        }
    }
    if done.count_ones() as usize != nodes.len() {
        return Err(EnumerateError::Cyclic);
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    extend(&nodes, &preds, 0, &mut prefix, &mut out, limit)?;
    Ok(out)
}

fn extend(
    nodes: &[&EventId],
    preds: &[u32],
    placed: u32,
    prefix: &mut Vec<usize>,
    out: &mut Vec<Vec<EventId>>,
    limit: usize,
) -> Result<(), EnumerateError> {
    if prefix.len() == nodes.len() {
        if out.len() == limit {
            return Err(EnumerateError::TooMany(limit));
        }
        out.push(prefix.iter().map(|&i| nodes[i].clone()).collect());
        return Ok(());
    }
    for i in 0..nodes.len() {
        if placed & (1 << i) == 0 && preds[i] & !placed == 0 {
            prefix.push(i);
            extend(nodes, preds, placed | (1 << i), prefix, out, limit)?;
            prefix.pop();
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {index} (`{event}`) breaks precedence: {reason}")]
pub struct PrecedenceViolation {
    pub index: usize,
    pub event: EventId,
    pub reason: String,
}

/// Post-hoc check of a trace against the graph it was produced from. Every
/// non-source firing must follow a firing of some admissible predecessor,
/// and the first firing of an event must follow every admissible,
/// non-cyclic predecessor that occurs in the trace at all.
pub fn check_precedence(
    graph: &BehaviorGraph,
    sc: &Scenario,
    trace: &Trace,
) -> Result<(), PrecedenceViolation> {
    let g = filtered_graph(graph, sc);
    let net = Net::new(&g);
    let back = Net::new(graph).back_edges();
    let sources = graph.sources();
    let in_trace = trace.fired();
    let mut first_tick: HashMap<&EventId, u64> = HashMap::new();
    for (index, step) in trace.steps.iter().enumerate() {
        let fail = |reason: String| PrecedenceViolation {
            index,
            event: step.event.clone(),
            reason,
        };
        if !g.nodes.contains(&step.event) {
            return Err(fail("event is unreachable under the scenario".into()));
        }
        let ins: Vec<&BehaviorEdge> = net.ins(&step.event).iter().map(|&i| net.edges[i]).collect();
        let preds: Vec<&EventId> = ins.iter().map(|e| &e.from).collect();
        if !sources.contains(&step.event)
            && !preds
                .iter()
                .any(|p| first_tick.get(p).is_some_and(|t| *t < step.tick))
        {
            return Err(fail("no predecessor fired earlier".into()));
        }
        if !first_tick.contains_key(&step.event) {
            for e in ins.iter().filter(|e| !back.contains(*e)) {
                let p = &e.from;
                if in_trace.contains(p) && !first_tick.get(p).is_some_and(|t| *t < step.tick) {
                    return Err(fail(format!("predecessor `{p}` had not fired")));
                }
            }
            first_tick.insert(&step.event, step.tick);
        }
    }
    Ok(())
}

//! Graphviz DOT for the static, overlay and behavior views.
//!
//! Output is deterministic: everything is emitted in id order.

pub mod dot_check;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::events::{BehaviorGraph, EventOverlay};
use crate::model::{ActionId, Machine, StaticModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum View {
    #[default]
    Static,
    Overlay,
    Behavior,
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(View::Static),
            "overlay" => Ok(View::Overlay),
            "behavior" => Ok(View::Behavior),
            _ => Err(format!(
                "unknown view `{s}` (expected static, overlay or behavior)"
            )),
        }
    }
}

pub const DEFAULT_PALETTE: [&str; 8] = [
    "lightblue",
    "palegreen",
    "lightsalmon",
    "khaki",
    "plum",
    "lightpink",
    "lightcyan",
    "wheat",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderOptions {
    pub view: View,
    /// Append step labels (the `# "..."` text) to action nodes.
    pub show_labels: bool,
    /// Mark the graph title as a simplified view. The caller simplifies.
    pub simplified: bool,
    /// Cycled over events in id order. Never empty.
    pub palette: Vec<String>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            view: View::Static,
            show_labels: false,
            simplified: false,
            palette: DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl RenderOptions {
    fn color(&self, i: usize) -> &str {
        if self.palette.is_empty() {
            DEFAULT_PALETTE[i % DEFAULT_PALETTE.len()]
        } else {
            &self.palette[i % self.palette.len()]
        }
    }
}

/// Quotes a DOT identifier.
pub fn dot_id(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn header(out: &mut String, name: &str, opts: &RenderOptions) {
    let _ = writeln!(out, "digraph {} {{", dot_id(name));
    if opts.simplified {
        let _ = writeln!(out, "  label={};", dot_id(&format!("{name} (simplified)")));
    }
    out.push_str("  graph [fontname=\"Helvetica\", compound=true];\n");
    out.push_str("  node [fontname=\"Helvetica\", shape=box, style=rounded];\n");
    out.push_str("  edge [fontname=\"Helvetica\"];\n");
}

pub fn render_static(model: &StaticModel, opts: &RenderOptions) -> String {
    render_model(model, &HashMap::new(), &[], opts)
}

/// The static view with every covered action filled in its event's color,
/// plus a legend. An empty overlay renders exactly like the static view.
pub fn render_overlay(model: &StaticModel, overlay: &EventOverlay, opts: &RenderOptions) -> String {
    let mut fills: HashMap<&ActionId, &str> = HashMap::new();
    let mut legend = Vec::new();
    for (i, ev) in overlay.events.values().enumerate() {
        let color = opts.color(i);
        for a in &ev.region {
            fills.entry(a).or_insert(color);
        }
        legend.push((ev.id.to_string(), ev.description.clone(), color));
    }
    render_model(model, &fills, &legend, opts)
}

fn render_model(
    model: &StaticModel,
    fills: &HashMap<&ActionId, &str>,
    legend: &[(String, String, &str)],
    opts: &RenderOptions,
) -> String {
    let mut out = String::new();
    header(&mut out, model.name(), opts);
    for root in model.roots() {
        cluster(model, root, 1, fills, opts, &mut out);
    }
    for f in model.flows().values() {
        let _ = writeln!(
            out,
            "  {} -> {};",
            dot_id(f.from.as_str()),
            dot_id(f.to.as_str())
        );
    }
    for t in model.triggers().values() {
        let _ = write!(
            out,
            "  {} -> {} [style=dashed",
            dot_id(t.from.as_str()),
            dot_id(t.to.as_str())
        );
        if let Some(g) = &t.guard {
            let _ = write!(out, ", label={}", dot_id(&format!("[{g}]")));
        }
        out.push_str("];\n");
    }
    if !legend.is_empty() {
        out.push_str("  subgraph \"cluster_legend\" {\n    label=\"Events\";\n");
        for (id, desc, color) in legend {
            let _ = writeln!(
                out,
                "    {} [shape=note, style=filled, fillcolor={}, label={}];",
                dot_id(&format!("legend:{id}")),
                dot_id(color),
                dot_id(&format!("{id}: {desc}"))
            );
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn cluster(
    model: &StaticModel,
    m: &Machine,
    depth: usize,
    fills: &HashMap<&ActionId, &str>,
    opts: &RenderOptions,
    out: &mut String,
) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(
        out,
        "{pad}subgraph {} {{",
        dot_id(&format!("cluster_{}", m.id))
    );
    let _ = writeln!(out, "{pad}  label={};", dot_id(&m.name));
    for s in model.storages().values().filter(|s| s.owner == m.id) {
        let _ = writeln!(
            out,
            "{pad}  {} [shape=cylinder, style=solid, label={}];",
            dot_id(s.id.as_str()),
            dot_id(&format!("{}:{}", s.name, s.thing))
        );
    }
    for a in model.actions().values().filter(|a| a.owner == m.id) {
        let mut label = format!("{}:{}", a.kind, a.thing);
        if opts.show_labels {
            if let Some(l) = &a.label {
                let _ = write!(label, "\n{l}");
            }
        }
        let _ = write!(
            out,
            "{pad}  {} [label={}",
            dot_id(a.id.as_str()),
            dot_id(&label)
        );
        if let Some(color) = fills.get(&a.id) {
            let _ = write!(
                out,
                ", style=\"rounded,filled\", fillcolor={}",
                dot_id(color)
            );
        }
        out.push_str("];\n");
    }
    for child in &m.children {
        cluster(model, &model.machines()[child], depth + 1, fills, opts, out);
    }
    let _ = writeln!(out, "{pad}}}");
}

pub fn render_behavior(graph: &BehaviorGraph, opts: &RenderOptions) -> String {
    let mut out = String::new();
    header(&mut out, "behavior", opts);
    for n in &graph.nodes {
        let _ = writeln!(
            out,
            "  {} [shape=ellipse, style=solid];",
            dot_id(n.as_str())
        );
    }
    for e in &graph.edges {
        let _ = write!(
            out,
            "  {} -> {}",
            dot_id(e.from.as_str()),
            dot_id(e.to.as_str())
        );
        if let Some(g) = &e.guard {
            let _ = write!(out, " [label={}]", dot_id(&format!("[{g}]")));
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

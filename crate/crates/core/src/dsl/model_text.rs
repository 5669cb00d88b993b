//! The `.tm` text format: parser and canonical printer.
//!
//! ```text
//! model      := "model" IDENT "simplified"? item*
//! item       := machineDecl | flowDecl | triggerDecl
//! machineDecl:= "machine" IDENT "{" (thingDecl|actionDecl|storageDecl|machineDecl|flowDecl|triggerDecl)* "}"
//! thingDecl  := "thing" IDENT
//! actionDecl := "action" IDENT ":" kind "of" IDENT ("#" STRING)?
//! storageDecl:= "store" IDENT "of" IDENT
//! flowDecl   := "flow" REF "->" REF
//! triggerDecl:= "trigger" REF "~>" REF ("[" IDENT "=" IDENT "]")?
//! ```
//!
//! References inside a machine body are tried as absolute paths first and
//! then relative to the enclosing machine.

use std::fmt::Write as _;

use super::diag::{codes, Diagnostics, ParseDiagnostic, SourceSpan};
use super::lexer::{tokenize, Cursor, Tok};
use crate::model::{
    Action, ActionId, ActionKind, Endpoint, FlowArc, Guard, Machine, MachineId, ModelError,
    StaticModel, Storage, StorageId, Thing, TriggerArc,
};

pub fn parse_model(text: &str) -> Result<StaticModel, Diagnostics> {
    parse_model_named(text, "<input>")
}

pub fn parse_model_named(text: &str, file: &str) -> Result<StaticModel, Diagnostics> {
    let toks = tokenize(text, file)?;
    let mut cur = Cursor::new(&toks, file, text);
    let ast = parse_ast(&mut cur)?;
    build(ast)
}

struct Ast {
    name: String,
    simplified: bool,
    machines: Vec<MachineAst>,
    arcs: Vec<ArcAst>,
}

struct MachineAst {
    span: SourceSpan,
    id: String,
    name: String,
    parent: Option<String>,
    things: Vec<(SourceSpan, String)>,
    storages: Vec<(SourceSpan, String, String)>,
    actions: Vec<ActionAst>,
}

struct ActionAst {
    span: SourceSpan,
    name: String,
    kind: ActionKind,
    thing: String,
    label: Option<String>,
}

struct ArcAst {
    span: SourceSpan,
    scope: Option<String>,
    trigger: bool,
    from: String,
    to: String,
    guard: Option<(String, String)>,
}

fn parse_ast(cur: &mut Cursor) -> Result<Ast, Diagnostics> {
    cur.expect_keyword("model")?;
    let name = cur.expect_ident("a model name")?;
    let simplified = cur.eat_keyword("simplified");
    let mut ast = Ast {
        name,
        simplified,
        machines: Vec::new(),
        arcs: Vec::new(),
    };
    while !cur.at_end() {
        match cur.peek_ident() {
            Some("machine") => parse_machine(cur, None, &mut ast)?,
            Some("flow") | Some("trigger") => {
                let arc = parse_arc(cur, None)?;
                ast.arcs.push(arc);
            }
            _ => {
                return Err(
                    cur.error("expected `machine`, `flow` or `trigger` at top level".to_string())
                )
            }
        }
    }
    Ok(ast)
}

fn parse_machine(cur: &mut Cursor, parent: Option<&str>, ast: &mut Ast) -> Result<(), Diagnostics> {
    let span = cur.span();
    cur.expect_keyword("machine")?;
    let name = cur.expect_ident("a machine name")?;
    let id = match parent {
        Some(p) => format!("{p}.{name}"),
        None => name.clone(),
    };
    cur.expect(&Tok::LBrace)?;
    let index = ast.machines.len();
    ast.machines.push(MachineAst {
        span,
        id: id.clone(),
        name,
        parent: parent.map(str::to_string),
        things: Vec::new(),
        storages: Vec::new(),
        actions: Vec::new(),
    });
    loop {
        if cur.eat(&Tok::RBrace) {
            return Ok(());
        }
        let span = cur.span();
        match cur.peek_ident() {
            Some("thing") => {
                cur.advance();
                let t = cur.expect_ident("a thing name")?;
                ast.machines[index].things.push((span, t));
            }
            Some("store") => {
                cur.advance();
                let s = cur.expect_ident("a storage name")?;
                cur.expect_keyword("of")?;
                let t = cur.expect_ident("a thing name")?;
                ast.machines[index].storages.push((span, s, t));
            }
            Some("action") => {
                cur.advance();
                let name = cur.expect_ident("an action name")?;
                cur.expect(&Tok::Colon)?;
                let kind_span = cur.span();
                let kind = cur.expect_ident("an action kind")?;
                let kind = kind.parse::<ActionKind>().map_err(|e| {
                    Diagnostics::from(ParseDiagnostic::error(
                        kind_span,
                        codes::SYNTAX,
                        format!("{e}; expected create, process, release, transfer or receive"),
                    ))
                })?;
                cur.expect_keyword("of")?;
                let thing = cur.expect_ident("a thing name")?;
                let label = if cur.eat(&Tok::Hash) {
                    Some(cur.expect_str("a quoted step label")?)
                } else {
                    None
                };
                ast.machines[index].actions.push(ActionAst {
                    span,
                    name,
                    kind,
                    thing,
                    label,
                });
            }
            Some("machine") => parse_machine(cur, Some(&id), ast)?,
            Some("flow") | Some("trigger") => {
                let arc = parse_arc(cur, Some(&id))?;
                ast.arcs.push(arc);
            }
            _ => {
                return Err(cur.error(
                    "expected `thing`, `action`, `store`, `machine`, `flow`, `trigger` or `}`",
                ))
            }
        }
    }
}

fn parse_arc(cur: &mut Cursor, scope: Option<&str>) -> Result<ArcAst, Diagnostics> {
    let span = cur.span();
    let trigger = cur.peek_ident() == Some("trigger");
    cur.advance();
    let from = cur.expect_path("a reference")?;
    cur.expect(if trigger { &Tok::Squiggle } else { &Tok::Arrow })?;
    let to = cur.expect_path("a reference")?;
    let guard = if trigger { cur.opt_guard()? } else { None };
    Ok(ArcAst {
        span,
        scope: scope.map(str::to_string),
        trigger,
        from,
        to,
        guard,
    })
}

fn model_diag(span: SourceSpan, e: ModelError) -> ParseDiagnostic {
    let code = match &e {
        ModelError::DuplicateId(_) | ModelError::DuplicateSiblingName { .. } => codes::DUPLICATE_ID,
        ModelError::DanglingReference { .. } | ModelError::UnknownAction(_) => {
            codes::DANGLING_REFERENCE
        }
        ModelError::SelfLoopArc(_) => codes::SELF_LOOP,
        ModelError::CrossThingFlow { .. } => codes::CROSS_THING_FLOW,
        ModelError::MalformedMachineId { .. } | ModelError::InvalidGuard { .. } => codes::INVALID,
    };
    ParseDiagnostic::error(span, code, e.to_string())
}

fn build(ast: Ast) -> Result<StaticModel, Diagnostics> {
    let mut model = StaticModel::new(ast.name);
    model.set_simplified(ast.simplified);
    let mut diags = Vec::new();

    for m in &ast.machines {
        let machine = Machine {
            id: MachineId::from(m.id.as_str()),
            name: m.name.clone(),
            parent: m.parent.as_deref().map(MachineId::from),
            children: Vec::new(),
        };
        if let Err(e) = model.add_machine(machine) {
            diags.push(model_diag(m.span.clone(), e));
        }
    }
    for m in &ast.machines {
        for (span, t) in &m.things {
            let thing = Thing {
                id: t.as_str().into(),
                name: t.clone(),
                home: m.id.as_str().into(),
            };
            if let Err(e) = model.add_thing(thing) {
                diags.push(model_diag(span.clone(), e));
            }
        }
    }
    for m in &ast.machines {
        for (span, name, thing) in &m.storages {
            let storage = Storage {
                id: StorageId::from(format!("{}.{name}", m.id)),
                owner: m.id.as_str().into(),
                name: name.clone(),
                thing: thing.as_str().into(),
            };
            if let Err(e) = model.add_storage(storage) {
                diags.push(model_diag(span.clone(), e));
            }
        }
        for a in &m.actions {
            let action = Action {
                id: ActionId::from(format!("{}.{}", m.id, a.name)),
                kind: a.kind,
                owner: m.id.as_str().into(),
                thing: a.thing.as_str().into(),
                label: a.label.clone(),
            };
            if let Err(e) = model.add_action(action) {
                diags.push(model_diag(a.span.clone(), e));
            }
        }
    }
    for arc in &ast.arcs {
        let resolve = |path: &str| -> Option<Endpoint> {
            model.resolve_endpoint(path).or_else(|| {
                arc.scope
                    .as_ref()
                    .and_then(|s| model.resolve_endpoint(&format!("{s}.{path}")))
            })
        };
        let (from, to) = match (resolve(&arc.from), resolve(&arc.to)) {
            (Some(f), Some(t)) => (f, t),
            (f, _) => {
                let missing = if f.is_none() { &arc.from } else { &arc.to };
                diags.push(ParseDiagnostic::error(
                    arc.span.clone(),
                    codes::DANGLING_REFERENCE,
                    format!("unknown action or storage `{missing}`"),
                ));
                continue;
            }
        };
        let result = if arc.trigger {
            match (from, to) {
                (Endpoint::Action(f), Endpoint::Action(t)) => {
                    let guard = match &arc.guard {
                        Some((k, v)) => match Guard::new(k.clone(), v.clone()) {
                            Ok(g) => Some(g),
                            Err(e) => {
                                diags.push(model_diag(arc.span.clone(), e));
                                continue;
                            }
                        },
                        None => None,
                    };
                    model.add_trigger(TriggerArc::new(f, t, guard))
                }
                _ => {
                    diags.push(ParseDiagnostic::error(
                        arc.span.clone(),
                        codes::INVALID,
                        "triggers connect actions, not storages",
                    ));
                    continue;
                }
            }
        } else {
            model.add_flow(FlowArc::new(from, to))
        };
        if let Err(e) = result {
            diags.push(model_diag(arc.span.clone(), e));
        }
    }
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(Diagnostics(diags))
    }
}

/// Canonical `.tm` text: sorted elements, two-space indentation, LF endings.
pub fn print_model(model: &StaticModel) -> String {
    let mut out = format!("model {}", model.name());
    if model.is_simplified() {
        out.push_str(" simplified");
    }
    out.push('\n');
    for root in model.roots() {
        out.push('\n');
        print_machine(model, root, 0, &mut out);
    }
    if !model.flows().is_empty() {
        out.push('\n');
        for f in model.flows().values() {
            let _ = writeln!(out, "flow {} -> {}", f.from, f.to);
        }
    }
    if !model.triggers().is_empty() {
        out.push('\n');
        for t in model.triggers().values() {
            let _ = write!(out, "trigger {} ~> {}", t.from, t.to);
            if let Some(g) = &t.guard {
                let _ = write!(out, " [{}={}]", g.key, g.value);
            }
            out.push('\n');
        }
    }
    out
}

fn print_machine(model: &StaticModel, m: &Machine, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let inner = "  ".repeat(depth + 1);
    let _ = writeln!(out, "{pad}machine {} {{", m.name);
    for t in model.things().values().filter(|t| t.home == m.id) {
        let _ = writeln!(out, "{inner}thing {}", t.name);
    }
    for s in model.storages().values().filter(|s| s.owner == m.id) {
        let _ = writeln!(out, "{inner}store {} of {}", s.name, s.thing);
    }
    for a in model.actions().values().filter(|a| a.owner == m.id) {
        let _ = write!(
            out,
            "{inner}action {}: {} of {}",
            a.local_name(),
            a.kind,
            a.thing
        );
        if let Some(label) = &a.label {
            let _ = write!(out, " # {}", quote(label));
        }
        out.push('\n');
    }
    for child in &m.children {
        print_machine(model, &model.machines()[child], depth + 1, out);
    }
    let _ = writeln!(out, "{pad}}}");
}

pub(crate) fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

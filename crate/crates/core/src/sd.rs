//! Import of a small line-based sequence-diagram notation.
//!
//! ```text
//! sequence Withdraw
//! participant User
//! participant ATM
//! User -> ATM : insert card
//! alt [valid]
//!   ATM -> User : ask for pin
//! else [invalid]
//!   ATM -> User : eject card
//! end
//! ```
//!
//! Every message becomes its own thing with a six-action chain from the
//! sender's lifeline to the receiver's.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::dsl::diag::codes;
use crate::dsl::{Diagnostics, ParseDiagnostic, SourceSpan};
use crate::events::{EventDef, EventOverlay};
use crate::model::{
    is_token, Action, ActionId, ActionKind, Endpoint, FlowArc, Guard, Machine, MachineId,
    StaticModel, Thing, TriggerArc,
};

pub const MAX_ALT_DEPTH: usize = 4;
pub const DEFAULT_NAME: &str = "Sequence";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdMessage {
    pub from: String,
    pub to: String,
    pub label: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AltBranch {
    pub guard: String,
    pub elements: Vec<SdElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AltBlock {
    pub branches: Vec<AltBranch>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdElement {
    Message(SdMessage),
    Alt(AltBlock),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdDoc {
    pub name: String,
    pub participants: Vec<String>,
    pub elements: Vec<SdElement>,
}

impl SdDoc {
    /// Messages in document order, descending into every branch.
    pub fn messages(&self) -> Vec<&SdMessage> {
        fn walk<'a>(els: &'a [SdElement], out: &mut Vec<&'a SdMessage>) {
            for e in els {
                match e {
                    SdElement::Message(m) => out.push(m),
                    SdElement::Alt(a) => a.branches.iter().for_each(|b| walk(&b.elements, out)),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.elements, &mut out);
        out
    }
}

/// Lowercase, with runs of anything else collapsed to one underscore.
pub fn slugify(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    if trimmed.is_empty() {
        "message".to_string()
    } else {
        trimmed.to_string()
    }
}

pub fn parse_sd(text: &str) -> Result<SdDoc, Diagnostics> {
    parse_sd_named(text, "<input>")
}

struct Frame {
    line: usize,
    branches: Vec<AltBranch>,
}

pub fn parse_sd_named(text: &str, file: &str) -> Result<SdDoc, Diagnostics> {
    let err = |line: usize, col: usize, code: &str, msg: String| {
        Diagnostics::single(ParseDiagnostic::error(
            SourceSpan::new(file, line, col),
            code,
            msg,
        ))
    };
    let mut name: Option<String> = None;
    let mut participants: Vec<String> = Vec::new();
    let mut top: Vec<SdElement> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut seen_content = false;
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split("//").next().unwrap_or("");
        let line = content.trim();
        if line.is_empty() {
            continue;
        }
        let col = raw.len() - raw.trim_start().len() + 1;
        let (word, rest) = match line.split_once(char::is_whitespace) {
            Some((w, r)) => (w, r.trim()),
            None => (line, ""),
        };
        let current = |stack: &mut Vec<Frame>, top: &mut Vec<SdElement>, el: SdElement| match stack
            .last_mut()
        {
            Some(f) => f
                .branches
                .last_mut()
                .expect("frame has a branch")
                .elements
                .push(el),
            None => top.push(el),
        };
        match word {
            "sequence" => {
                if seen_content || name.is_some() {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        "`sequence` must be the first line".into(),
                    ));
                }
                if !is_token(rest) {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        format!("`{rest}` is not a valid name"),
                    ));
                }
                name = Some(rest.to_string());
            }
            "participant" => {
                if !is_token(rest) {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        format!("`{rest}` is not a valid participant name"),
                    ));
                }
                if participants.iter().any(|p| p == rest) {
                    return Err(err(
                        line_no,
                        col,
                        codes::DUPLICATE_ID,
                        format!("participant `{rest}` is declared twice"),
                    ));
                }
                participants.push(rest.to_string());
            }
            "alt" | "else" => {
                let guard = rest
                    .strip_prefix('[')
                    .and_then(|g| g.strip_suffix(']'))
                    .map(str::trim)
                    .filter(|g| !g.is_empty())
                    .ok_or_else(|| {
                        err(
                            line_no,
                            col,
                            codes::SYNTAX,
                            format!("`{word}` needs a guard like `[valid]`"),
                        )
                    })?;
                let branch = AltBranch {
                    guard: guard.to_string(),
                    elements: Vec::new(),
                };
                if word == "alt" {
                    if stack.len() == MAX_ALT_DEPTH {
                        return Err(err(
                            line_no,
                            col,
                            codes::UNSUPPORTED,
                            format!("alternatives nest deeper than {MAX_ALT_DEPTH}"),
                        ));
                    }
                    if let Some(f) = stack.last() {
                        if f.branches.last().is_some_and(|b| b.elements.is_empty()) {
                            return Err(err(
                                line_no,
                                col,
                                codes::UNSUPPORTED,
                                "a branch must begin with a message".into(),
                            ));
                        }
                    }
                    stack.push(Frame {
                        line: line_no,
                        branches: vec![branch],
                    });
                } else {
                    let Some(f) = stack.last_mut() else {
                        return Err(err(
                            line_no,
                            col,
                            codes::SYNTAX,
                            "`else` outside `alt`".into(),
                        ));
                    };
                    if f.branches.last().is_some_and(|b| b.elements.is_empty()) {
                        return Err(err(
                            line_no,
                            col,
                            codes::SYNTAX,
                            "empty alternative branch".into(),
                        ));
                    }
                    let slug = slugify(guard);
                    if f.branches.iter().any(|b| slugify(&b.guard) == slug) {
                        return Err(err(
                            line_no,
                            col,
                            codes::DUPLICATE_ID,
                            format!("branch label `{guard}` repeats within one alternative"),
                        ));
                    }
                    f.branches.push(branch);
                }
            }
            "end" => {
                let Some(f) = stack.pop() else {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        "`end` without `alt`".into(),
                    ));
                };
                if f.branches.last().is_some_and(|b| b.elements.is_empty()) {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        "empty alternative branch".into(),
                    ));
                }
                current(
                    &mut stack,
                    &mut top,
                    SdElement::Alt(AltBlock {
                        branches: f.branches,
                        line: f.line,
                    }),
                );
            }
            "loop" | "par" | "critical" | "opt" | "break" | "neg" | "strict" | "seq" | "ignore"
            | "consider" | "assert" => {
                return Err(err(
                    line_no,
                    col,
                    codes::UNSUPPORTED,
                    format!("`{word}` fragments are not supported; only `alt` is"),
                ));
            }
            _ => {
                let Some((arrow, label)) = line.split_once(':') else {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        "expected `A -> B : label`".into(),
                    ));
                };
                let Some((from, to)) = arrow.split_once("->") else {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        "expected `A -> B : label`".into(),
                    ));
                };
                let (from, to, label) = (from.trim(), to.trim(), label.trim());
                for who in [from, to] {
                    if !is_token(who) {
                        return Err(err(
                            line_no,
                            col,
                            codes::SYNTAX,
                            format!("`{who}` is not a valid participant name"),
                        ));
                    }
                    if !participants.iter().any(|p| p == who) {
                        let at = raw.find(who).map_or(col, |i| i + 1);
                        return Err(err(
                            line_no,
                            at,
                            codes::UNKNOWN_PARTICIPANT,
                            format!("`{who}` is not a declared participant"),
                        ));
                    }
                }
                if from == to {
                    return Err(err(
                        line_no,
                        col,
                        codes::UNSUPPORTED,
                        "self-messages are not supported".into(),
                    ));
                }
                if label.is_empty() {
                    return Err(err(
                        line_no,
                        col,
                        codes::SYNTAX,
                        "message needs a label".into(),
                    ));
                }
                current(
                    &mut stack,
                    &mut top,
                    SdElement::Message(SdMessage {
                        from: from.into(),
                        to: to.into(),
                        label: label.into(),
                        line: line_no,
                    }),
                );
            }
        }
        seen_content = true;
    }
    if let Some(f) = stack.last() {
        return Err(err(
            f.line,
            1,
            codes::SYNTAX,
            "`alt` is never closed with `end`".into(),
        ));
    }
    if !seen_content {
        return Err(err(
            last_line,
            1,
            codes::SYNTAX,
            "empty sequence diagram".into(),
        ));
    }
    let doc = SdDoc {
        name: name.unwrap_or_else(|| DEFAULT_NAME.to_string()),
        participants,
        elements: top,
    };
    build(&doc).map_err(|(line, msg)| err(line, 1, codes::UNSUPPORTED, msg))?;
    Ok(doc)
}

/// Builds the static model. Documents from [`parse_sd`] always translate.
pub fn sd_to_tm(doc: &SdDoc) -> StaticModel {
    build(doc)
        .map(|(m, _)| m)
        .expect("document was checked when parsed")
}

/// The static model plus one event per message, `M1`, `M2`, ... in
/// document order, each covering that message's six actions.
pub fn sd_to_tm_with_overlay(doc: &SdDoc) -> (StaticModel, EventOverlay) {
    let (model, chains) = build(doc).expect("document was checked when parsed");
    let events = chains
        .iter()
        .enumerate()
        .map(|(i, (label, actions))| EventDef {
            id: format!("M{}", i + 1).into(),
            description: label.clone(),
            region: actions.iter().cloned().collect(),
        })
        .collect();
    let overlay =
        EventOverlay::new(&model, events).expect("message chains are disjoint and connected");
    (model, overlay)
}

type Chains = Vec<(String, [ActionId; 6])>;

struct Builder<'a> {
    doc: &'a SdDoc,
    model: StaticModel,
    used: HashSet<String>,
    chains: Chains,
    alt_count: usize,
    guard_keys: HashMap<ActionId, String>,
}

type Lifelines = BTreeMap<String, BTreeSet<ActionId>>;

fn build(doc: &SdDoc) -> Result<(StaticModel, Chains), (usize, String)> {
    let mut b = Builder {
        doc,
        model: StaticModel::new(&doc.name),
        used: HashSet::new(),
        chains: Vec::new(),
        alt_count: 0,
        guard_keys: HashMap::new(),
    };
    for p in &doc.participants {
        b.model
            .add_machine(Machine::root(p))
            .map_err(|e| (1, e.to_string()))?;
    }
    let mut lanes = Lifelines::new();
    b.walk(&doc.elements, &mut lanes, None)?;
    Ok((b.model, b.chains))
}

impl Builder<'_> {
    fn walk(
        &mut self,
        els: &[SdElement],
        lanes: &mut Lifelines,
        mut guard: Option<Guard>,
    ) -> Result<(), (usize, String)> {
        for el in els {
            match el {
                SdElement::Message(m) => {
                    self.message(m, lanes, guard.take())?;
                }
                SdElement::Alt(alt) => {
                    self.alt_count += 1;
                    let key = format!("alt{}", self.alt_count);
                    let before = lanes.clone();
                    let mut after = Lifelines::new();
                    for br in &alt.branches {
                        let mut local = before.clone();
                        let g = Guard {
                            key: key.clone(),
                            value: slugify(&br.guard),
                        };
                        self.walk(&br.elements, &mut local, Some(g))?;
                        for (lane, procs) in local {
                            after.entry(lane).or_default().extend(procs);
                        }
                    }
                    *lanes = after;
                }
            }
        }
        Ok(())
    }

    fn fresh_slug(&mut self, label: &str) -> String {
        let base = slugify(label);
        let mut slug = base.clone();
        let mut n = 2;
        while !self.used.insert(slug.clone()) || self.doc.participants.contains(&slug) {
            slug = format!("{base}_{n}");
            n += 1;
        }
        slug
    }

    fn message(
        &mut self,
        m: &SdMessage,
        lanes: &mut Lifelines,
        guard: Option<Guard>,
    ) -> Result<(), (usize, String)> {
        let slug = self.fresh_slug(&m.label);
        let from = MachineId::from(m.from.as_str());
        let to = MachineId::from(m.to.as_str());
        let at = |e: crate::model::ModelError| (m.line, e.to_string());
        self.model
            .add_thing(Thing {
                id: slug.as_str().into(),
                name: slug.clone(),
                home: from.clone(),
            })
            .map_err(at)?;
        let steps = [
            (&from, "c", ActionKind::Create),
            (&from, "r", ActionKind::Release),
            (&from, "t", ActionKind::Transfer),
            (&to, "t", ActionKind::Transfer),
            (&to, "v", ActionKind::Receive),
            (&to, "p", ActionKind::Process),
        ];
        let ids: [ActionId; 6] =
            steps.map(|(owner, prefix, _)| ActionId::from(format!("{owner}.{prefix}_{slug}")));
        for (i, (owner, _, kind)) in steps.iter().enumerate() {
            self.model
                .add_action(Action {
                    id: ids[i].clone(),
                    kind: *kind,
                    owner: (*owner).clone(),
                    thing: slug.as_str().into(),
                    label: (i == 0).then(|| m.label.clone()),
                })
                .map_err(at)?;
        }
        for pair in ids.windows(2) {
            self.model
                .add_flow(FlowArc::new(
                    Endpoint::Action(pair[0].clone()),
                    Endpoint::Action(pair[1].clone()),
                ))
                .map_err(at)?;
        }
        let sources = lanes.get(&m.from).cloned().unwrap_or_default();
        if guard.is_some() && sources.is_empty() {
            return Err((m.line, format!("`{}` has received nothing before this alternative, so the branch cannot be guarded", m.from)));
        }
        for src in sources {
            if let Some(g) = &guard {
                match self.guard_keys.get(&src) {
                    Some(k) if k != &g.key => {
                        return Err((
                            m.line,
                            "two alternatives follow the same message; put a message between them"
                                .into(),
                        ));
                    }
                    _ => {
                        self.guard_keys.insert(src.clone(), g.key.clone());
                    }
                }
            }
            self.model
                .add_trigger(TriggerArc::new(src, ids[0].clone(), guard.clone()))
                .map_err(at)?;
        }
        lanes.insert(m.to.clone(), BTreeSet::from([ids[5].clone()]));
        self.chains.push((m.label.clone(), ids));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate;

    #[test]
    fn single_message() {
        let doc =
            parse_sd("participant User\nparticipant ATM\nUser -> ATM : insert card\n").unwrap();
        assert_eq!(doc.participants, ["User", "ATM"]);
        assert_eq!(doc.messages().len(), 1);
        let m = sd_to_tm(&doc);
        assert_eq!(m.actions().len(), 6);
        assert_eq!(m.flows().len(), 5);
        assert_eq!(m.triggers().len(), 0);
        assert!(m.things().contains_key(&"insert_card".into()));
        assert!(validate(&m).passed());
    }

    #[test]
    fn reply_is_triggered_by_the_receipt() {
        let m = sd_to_tm(
            &parse_sd("participant A\nparticipant B\nA -> B : ping\nB -> A : pong").unwrap(),
        );
        assert_eq!(m.actions().len(), 12);
        assert_eq!(m.flows().len(), 10);
        let t: Vec<_> = m.triggers().keys().cloned().collect();
        assert_eq!(t, ["B.p_ping~>B.c_pong"]);
        assert!(validate(&m).passed());
    }

    #[test]
    fn empty_and_bad_input_are_rejected() {
        assert!(parse_sd("").unwrap_err().has_code(codes::SYNTAX));
        assert!(parse_sd("// nothing\n\n")
            .unwrap_err()
            .has_code(codes::SYNTAX));
        let d = parse_sd("participant A\nA -> Z : hi").unwrap_err();
        assert!(d.has_code(codes::UNKNOWN_PARTICIPANT));
        assert_eq!(d.0[0].span.line, 2);
        assert_eq!(d.0[0].span.column, 6);
        assert!(parse_sd("participant A\nloop [x]\nend")
            .unwrap_err()
            .has_code(codes::UNSUPPORTED));
        assert!(parse_sd("participant A\nA -> A : self")
            .unwrap_err()
            .has_code(codes::UNSUPPORTED));
        assert!(parse_sd("participant A\nparticipant B\nalt [x]\nA -> B : m\n").is_err());
        assert!(parse_sd("participant A\nparticipant B\nalt [x]\nelse [y]\nend").is_err());
        assert!(parse_sd("participant A\nparticipant A")
            .unwrap_err()
            .has_code(codes::DUPLICATE_ID));
    }

    #[test]
    fn alternatives_become_guarded_triggers() {
        let src = "sequence S
participant User
participant ATM
User -> ATM : insert card
alt [valid card]
  ATM -> User : ask for pin
else [invalid card]
  ATM -> User : eject card
end
User -> ATM : goodbye";
        let doc = parse_sd(src).unwrap();
        assert!(matches!(&doc.elements[1], SdElement::Alt(a) if a.branches.len() == 2));
        let (m, o) = sd_to_tm_with_overlay(&doc);
        assert!(validate(&m).passed(), "{:?}", validate(&m));
        let guards: Vec<String> = m
            .triggers()
            .values()
            .filter_map(|t| t.guard.as_ref().map(|g| g.to_string()))
            .collect();
        assert_eq!(guards, ["alt1=valid_card", "alt1=invalid_card"]);
        // "goodbye" follows either branch.
        assert_eq!(m.triggers_into(&"User.c_goodbye".into()).count(), 2);
        assert_eq!(o.events.len(), 4);
    }

    #[test]
    fn joins_after_alternatives() {
        let src = "participant A
participant B
A -> B : start
alt [x]
  B -> A : left
else [y]
  B -> A : right
end
A -> B : done";
        let m = sd_to_tm(&parse_sd(src).unwrap());
        let into_done: Vec<_> = m
            .triggers_into(&"A.c_done".into())
            .map(|t| t.from.to_string())
            .collect();
        assert_eq!(into_done, ["A.p_left", "A.p_right"]);
        assert!(validate(&m).passed());
    }

    #[test]
    fn unguardable_branch_is_rejected() {
        let src = "participant A\nparticipant B\nalt [x]\nA -> B : m\nend";
        assert!(parse_sd(src).unwrap_err().has_code(codes::UNSUPPORTED));
    }

    #[test]
    fn label_collisions_get_suffixes() {
        let m =
            sd_to_tm(&parse_sd("participant A\nparticipant B\nA -> B : Hi!\nB -> A : hi").unwrap());
        let things: Vec<_> = m.things().keys().map(|t| t.to_string()).collect();
        assert_eq!(things, ["hi", "hi_2"]);
        assert_eq!(slugify("  Insert the Card  "), "insert_the_card");
        assert_eq!(slugify("!!!"), "message");
    }

    #[test]
    fn nesting_is_limited() {
        let mut src = String::from("participant A\nparticipant B\nA -> B : go\n");
        for i in 0..5 {
            src.push_str(&format!("alt [g{i}]\nB -> A : m{i}\n"));
        }
        src.push_str(&"end\n".repeat(5));
        assert!(parse_sd(&src).unwrap_err().has_code(codes::UNSUPPORTED));
    }
}

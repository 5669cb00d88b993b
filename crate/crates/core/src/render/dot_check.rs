//! A small parser for the DOT language, used to check emitted graphs.
//!
//! Covers the abstract grammar: `[strict] (graph|digraph) [id] { stmts }`
//! with node, edge, attribute, assignment and subgraph statements, quoted
//! and HTML ids, ports, and the three comment styles.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct DotError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub type Attrs = Vec<(String, String)>;

fn lookup<'a>(attrs: &'a Attrs, key: &str) -> Option<&'a str> {
    attrs
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeStmt {
    pub id: String,
    pub attrs: Attrs,
}

impl NodeStmt {
    pub fn attr(&self, key: &str) -> Option<&str> {
        lookup(&self.attrs, key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeEnd {
    Node(String),
    Subgraph(Subgraph),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeStmt {
    pub ends: Vec<EdgeEnd>,
    pub attrs: Attrs,
}

impl EdgeStmt {
    pub fn attr(&self, key: &str) -> Option<&str> {
        lookup(&self.attrs, key)
    }

    /// Node ids of the endpoints that are plain nodes.
    pub fn node_ends(&self) -> Vec<&str> {
        self.ends
            .iter()
            .filter_map(|e| match e {
                EdgeEnd::Node(n) => Some(n.as_str()),
                EdgeEnd::Subgraph(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrTarget {
    Graph,
    Node,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Node(NodeStmt),
    Edge(EdgeStmt),
    Attr(AttrTarget, Attrs),
    Assign(String, String),
    Subgraph(Subgraph),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subgraph {
    pub id: Option<String>,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DotGraph {
    pub strict: bool,
    pub directed: bool,
    pub id: Option<String>,
    pub body: Subgraph,
}

impl std::ops::Deref for DotGraph {
    type Target = Subgraph;
    fn deref(&self) -> &Subgraph {
        &self.body
    }
}

impl Subgraph {
    /// A direct child subgraph by id.
    pub fn subgraph(&self, id: &str) -> Option<&Subgraph> {
        self.stmts.iter().find_map(|s| match s {
            Stmt::Subgraph(g) if g.id.as_deref() == Some(id) => Some(g),
            _ => None,
        })
    }

    pub fn subgraphs(&self) -> impl Iterator<Item = &Subgraph> {
        self.stmts.iter().filter_map(|s| match s {
            Stmt::Subgraph(g) => Some(g),
            _ => None,
        })
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        for s in &self.stmts {
            f(s);
            if let Stmt::Subgraph(g) = s {
                g.walk(f);
            }
        }
    }

    /// Node statements at any depth.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeStmt> {
        let mut out = Vec::new();
        self.walk(&mut |s| {
            if let Stmt::Node(n) = s {
                out.push(n);
            }
        });
        out.into_iter()
    }

    pub fn node(&self, id: &str) -> Option<&NodeStmt> {
        self.nodes().find(|n| n.id == id)
    }

    /// Edge statements at any depth.
    pub fn edges(&self) -> impl Iterator<Item = &EdgeStmt> {
        let mut out = Vec::new();
        self.walk(&mut |s| {
            if let Stmt::Edge(e) = s {
                out.push(e);
            }
        });
        out.into_iter()
    }

    pub fn assignment(&self, key: &str) -> Option<&str> {
        self.stmts.iter().find_map(|s| match s {
            Stmt::Assign(k, v) if k == key => Some(v.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Id(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Eq,
    Colon,
    Arrow,
    Dash,
}

struct Lexed {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Lexed>, DotError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut at_line_start = true;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
                at_line_start = true;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (l, cl) = (line, col);
        let err = |m: &str| DotError {
            line: l,
            column: cl,
            message: m.to_string(),
        };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' && at_line_start {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        at_line_start = false;
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(err("unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = simple {
            bump!();
            out.push(Lexed {
                tok,
                line: l,
                column: cl,
            });
            continue;
        }
        if c == '-' && matches!(chars.get(i + 1), Some('>') | Some('-')) {
            let tok = if chars[i + 1] == '>' {
                Tok::Arrow
            } else {
                Tok::Dash
            };
            bump!();
            bump!();
            out.push(Lexed {
                tok,
                line: l,
                column: cl,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err("unterminated string")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        bump!();
                        bump!();
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'\\') => {
                        s.push_str("\\\\");
                        bump!();
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push(Lexed {
                tok: Tok::Id(s),
                line: l,
                column: cl,
            });
            continue;
        }
        if c == '<' {
            let mut depth = 0usize;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err("unterminated HTML string")),
                    Some('<') => depth += 1,
                    Some('>') => depth -= 1,
                    _ => {}
                }
                s.push(chars[i]);
                bump!();
                if depth == 0 {
                    break;
                }
            }
            out.push(Lexed {
                tok: Tok::Id(s),
                line: l,
                column: cl,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' || !c.is_ascii() {
            let mut s = String::new();
            while let Some(&ch) = chars.get(i) {
                if ch.is_alphanumeric() || ch == '_' || !ch.is_ascii() {
                    s.push(ch);
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Lexed {
                tok: Tok::Id(s),
                line: l,
                column: cl,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '.' || c == '-' {
            let mut s = String::new();
            if c == '-' {
                s.push(c);
                bump!();
            }
            let mut dot = false;
            let mut digits = 0;
            while let Some(&ch) = chars.get(i) {
                if ch.is_ascii_digit() {
                    digits += 1;
                } else if ch == '.' && !dot {
                    dot = true;
                } else {
                    break;
                }
                s.push(ch);
                bump!();
            }
            if digits == 0 {
                return Err(err("malformed numeral"));
            }
            out.push(Lexed {
                tok: Tok::Id(s),
                line: l,
                column: cl,
            });
            continue;
        }
        return Err(err(&format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    directed: bool,
}

fn keyword(t: Option<&Tok>, kw: &str) -> bool {
    matches!(t, Some(Tok::Id(s)) if s.eq_ignore_ascii_case(kw))
}

const KEYWORDS: [&str; 6] = ["node", "edge", "graph", "digraph", "subgraph", "strict"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.tok)
    }

    fn err(&self, message: impl Into<String>) -> DotError {
        let (line, column) = match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => (t.line, t.column),
            None => (1, 1),
        };
        DotError {
            line,
            column,
            message: message.into(),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), DotError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn id(&mut self) -> Result<String, DotError> {
        match self.peek() {
            Some(Tok::Id(s)) if !KEYWORDS.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected an identifier")),
        }
    }

    fn graph(&mut self) -> Result<DotGraph, DotError> {
        let strict = keyword(self.peek(), "strict");
        if strict {
            self.pos += 1;
        }
        self.directed = if keyword(self.peek(), "digraph") {
            true
        } else if keyword(self.peek(), "graph") {
            false
        } else {
            return Err(self.err("expected `graph` or `digraph`"));
        };
        self.pos += 1;
        let id = if matches!(self.peek(), Some(Tok::Id(_))) {
            Some(self.id()?)
        } else {
            None
        };
        let stmts = self.block()?;
        if self.pos != self.toks.len() {
            return Err(self.err("trailing input after the graph"));
        }
        Ok(DotGraph {
            strict,
            directed: self.directed,
            id: id.clone(),
            body: Subgraph { id, stmts },
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, DotError> {
        self.expect(&Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.peek().is_none() {
                return Err(self.err("unclosed `{`"));
            }
            stmts.push(self.stmt()?);
            self.eat(&Tok::Semi);
        }
        Ok(stmts)
    }

    fn attr_lists(&mut self) -> Result<Attrs, DotError> {
        let mut attrs = Vec::new();
        while self.eat(&Tok::LBracket) {
            while !self.eat(&Tok::RBracket) {
                let k = self.id()?;
                self.expect(&Tok::Eq, "`=` in attribute")?;
                let v = self.id()?;
                attrs.push((k, v));
                if !self.eat(&Tok::Comma) {
                    self.eat(&Tok::Semi);
                }
            }
        }
        Ok(attrs)
    }

    fn subgraph(&mut self) -> Result<Subgraph, DotError> {
        let mut id = None;
        if keyword(self.peek(), "subgraph") {
            self.pos += 1;
            if matches!(self.peek(), Some(Tok::Id(_))) {
                id = Some(self.id()?);
            }
        }
        Ok(Subgraph {
            id,
            stmts: self.block()?,
        })
    }

    fn node_ref(&mut self) -> Result<String, DotError> {
        let id = self.id()?;
        if self.eat(&Tok::Colon) {
            self.id()?;
            if self.eat(&Tok::Colon) {
                self.id()?;
            }
        }
        Ok(id)
    }

    fn edge_op(&mut self) -> Result<bool, DotError> {
        match self.peek() {
            Some(Tok::Arrow) if self.directed => {
                self.pos += 1;
                Ok(true)
            }
            Some(Tok::Dash) if !self.directed => {
                self.pos += 1;
                Ok(true)
            }
            Some(Tok::Arrow) | Some(Tok::Dash) => {
                Err(self.err("edge operator does not match the graph kind"))
            }
            _ => Ok(false),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, DotError> {
        for (kw, target) in [
            ("graph", AttrTarget::Graph),
            ("node", AttrTarget::Node),
            ("edge", AttrTarget::Edge),
        ] {
            if keyword(self.peek(), kw) {
                self.pos += 1;
                if self.peek() != Some(&Tok::LBracket) {
                    return Err(self.err("expected `[` after attribute statement keyword"));
                }
                return Ok(Stmt::Attr(target, self.attr_lists()?));
            }
        }
        let first = if keyword(self.peek(), "subgraph") || self.peek() == Some(&Tok::LBrace) {
            EdgeEnd::Subgraph(self.subgraph()?)
        } else {
            if matches!(self.peek(), Some(Tok::Id(_))) && self.peek2() == Some(&Tok::Eq) {
                let k = self.id()?;
                self.pos += 1;
                let v = self.id()?;
                return Ok(Stmt::Assign(k, v));
            }
            EdgeEnd::Node(self.node_ref()?)
        };
        let mut ends = vec![first];
        while self.edge_op()? {
            if keyword(self.peek(), "subgraph") || self.peek() == Some(&Tok::LBrace) {
                ends.push(EdgeEnd::Subgraph(self.subgraph()?));
            } else {
                ends.push(EdgeEnd::Node(self.node_ref()?));
            }
        }
        let attrs = self.attr_lists()?;
        if ends.len() > 1 {
            return Ok(Stmt::Edge(EdgeStmt { ends, attrs }));
        }
        match ends.pop() {
            Some(EdgeEnd::Node(id)) => Ok(Stmt::Node(NodeStmt { id, attrs })),
            Some(EdgeEnd::Subgraph(g)) if attrs.is_empty() => Ok(Stmt::Subgraph(g)),
            _ => Err(self.err("attributes on a bare subgraph")),
        }
    }
}

pub fn parse(text: &str) -> Result<DotGraph, DotError> {
    let toks = lex(text)?;
    Parser {
        toks,
        pos: 0,
        directed: true,
    }
    .graph()
}

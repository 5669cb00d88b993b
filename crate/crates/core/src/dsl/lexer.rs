//! Tokenizer shared by the `.tm`, `.ev` and `.scn` formats.

use super::diag::{codes, Diagnostics, ParseDiagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Comma,
    Dot,
    Eq,
    Hash,
    /// `->`, a solid flow arrow.
    Arrow,
    /// `~>`, a dashed trigger arrow.
    Squiggle,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Hash => "`#`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Squiggle => "`~>`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub fn tokenize(text: &str, file: &str) -> Result<Vec<Token>, Diagnostics> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            })
        };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(err(
                        file,
                        tl,
                        tc,
                        "unexpected `/` (comments start with `//`)",
                    ));
                }
            }
            '-' | '~' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    push(&mut out, if c == '-' { Tok::Arrow } else { Tok::Squiggle });
                } else {
                    return Err(err(file, tl, tc, format!("expected `{c}>`")));
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None | Some('\n') => {
                            return Err(err(file, tl, tc, "unterminated string"));
                        }
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            _ => return Err(err(file, line, column, "invalid escape in string")),
                        },
                        Some(c) => s.push(c),
                    }
                }
                push(&mut out, Tok::Str(s));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                push(&mut out, Tok::Ident(s));
            }
            _ => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    '=' => Tok::Eq,
                    '#' => Tok::Hash,
                    other => {
                        return Err(err(file, tl, tc, format!("unexpected character {other:?}")));
                    }
                };
                bump!();
                push(&mut out, tok);
            }
        }
    }
    Ok(out)
}

fn err(file: &str, line: usize, column: usize, msg: impl Into<String>) -> Diagnostics {
    ParseDiagnostic::error(SourceSpan::new(file, line, column), codes::SYNTAX, msg).into()
}

/// Cursor over a token stream with span-aware error helpers.
pub struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    file: &'a str,
    /// Position reported for errors at end of input.
    eof: (usize, usize),
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token], file: &'a str, text: &str) -> Self {
        let last_line = text.split('\n').count().max(1);
        let last_col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Cursor {
            toks,
            pos: 0,
            file,
            eof: (last_line, last_col),
        }
    }

    pub fn file(&self) -> &str {
        self.file
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn span(&self) -> SourceSpan {
        match self.toks.get(self.pos) {
            Some(t) => SourceSpan::new(self.file, t.line, t.column),
            None => SourceSpan::new(self.file, self.eof.0, self.eof.1),
        }
    }

    pub fn advance(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|t| &t.tok);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn error(&self, msg: impl Into<String>) -> Diagnostics {
        ParseDiagnostic::error(self.span(), codes::SYNTAX, msg).into()
    }

    fn found(&self) -> String {
        self.peek()
            .map_or_else(|| "end of input".to_string(), Tok::describe)
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<(), Diagnostics> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                tok.describe(),
                self.found()
            )))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), Diagnostics> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {}", self.found())))
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<String, Diagnostics> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    pub fn expect_str(&mut self, what: &str) -> Result<String, Diagnostics> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}, found {}", self.found()))),
        }
    }

    /// `IDENT ("." IDENT)*`
    pub fn expect_path(&mut self, what: &str) -> Result<String, Diagnostics> {
        let mut path = self.expect_ident(what)?;
        while self.eat(&Tok::Dot) {
            path.push('.');
            path.push_str(&self.expect_ident("a path segment")?);
        }
        Ok(path)
    }

    /// `"[" IDENT "=" IDENT "]"` when the next token is `[`.
    pub fn opt_guard(&mut self) -> Result<Option<(String, String)>, Diagnostics> {
        if !self.eat(&Tok::LBracket) {
            return Ok(None);
        }
        let key = self.expect_ident("a guard key")?;
        self.expect(&Tok::Eq)?;
        let value = self.expect_ident("a guard value")?;
        self.expect(&Tok::RBracket)?;
        Ok(Some((key, value)))
    }
}

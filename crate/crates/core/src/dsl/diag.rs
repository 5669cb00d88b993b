use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub column: usize,
}

impl SourceSpan {
    pub fn new(file: &str, line: usize, column: usize) -> Self {
        SourceSpan {
            file: file.to_string(),
            line: line.max(1),
            column: column.max(1),
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub span: SourceSpan,
    pub code: String,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn error(span: SourceSpan, code: &str, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            severity: Severity::Error,
            span,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(span: SourceSpan, code: &str, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            severity: Severity::Warning,
            ..ParseDiagnostic::error(span, code, message)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}[{}]: {}", self.span, self.code, self.message)
    }
}

/// Diagnostics produced by a failed parse. Always holds at least one error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<ParseDiagnostic>);

impl Diagnostics {
    pub fn single(d: ParseDiagnostic) -> Self {
        Diagnostics(vec![d])
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParseDiagnostic> {
        self.0.iter()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.0.iter().any(|d| d.code == code)
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl From<ParseDiagnostic> for Diagnostics {
    fn from(d: ParseDiagnostic) -> Self {
        Diagnostics::single(d)
    }
}

pub mod codes {
    pub const SYNTAX: &str = "syntax";
    pub const DUPLICATE_ID: &str = "duplicate-id";
    pub const DANGLING_REFERENCE: &str = "dangling-reference";
    pub const CROSS_THING_FLOW: &str = "cross-thing-flow";
    pub const SELF_LOOP: &str = "self-loop";
    pub const INVALID: &str = "invalid";
    pub const UNKNOWN_ACTION: &str = "unknown-action";
    pub const EMPTY_REGION: &str = "empty-region";
    pub const DISCONNECTED_REGION: &str = "disconnected-region";
    pub const ILLEGAL_OVERLAP: &str = "illegal-overlap";
    pub const MODEL_MISMATCH: &str = "model-mismatch";
    pub const UNKNOWN_PARTICIPANT: &str = "unknown-participant";
    pub const UNSUPPORTED: &str = "unsupported";
}

//! Text and JSON formats for static models.

pub mod diag;
pub mod json;
pub mod lexer;
mod model_text;

pub use diag::{Diagnostics, ParseDiagnostic, Severity, SourceSpan};
pub use json::{from_json, to_json, JsonError};
pub(crate) use model_text::quote;
pub use model_text::{parse_model, parse_model_named, print_model};

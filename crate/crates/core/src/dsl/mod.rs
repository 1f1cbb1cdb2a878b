//! Text format for structural causal models.
//!
//! One declaration per node, in dependency order:
//!
//! ```text
//! # vaccination toy model
//! var x: {0, 1} ~ bernoulli(0.5);
//! var a: {0, 1} cpt | x=0 -> 0.8, 0.2 | x=1 -> 0.2, 0.8;
//! var y: real := 0.3*a + 0.5*x + 0.1 + normal(0, 0.1);
//! var g: {0, 1} := ind(x + a - 1);
//! ```
//!
//! Mechanisms are a distribution (`~`), an arithmetic expression with at most
//! one inline noise draw (`:=`), or a table (`cpt`). Parents are inferred from
//! the names a mechanism mentions, which must already be declared.

mod lexer;
mod parser;
mod serialize;

use std::fmt;

use serde::Serialize;

use crate::scm::Scm;

pub use serialize::serialize_scm;

/// 1-based position of a diagnostic; `length` counts characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    pub fn new(line: usize, column: usize, length: usize) -> Self {
        SourceSpan {
            line: line.max(1),
            column: column.max(1),
            length: length.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseErrorKind {
    Syntax,
    UnknownSymbol,
    DuplicateDefinition,
    DomainMismatch,
    CptShape,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::UnknownSymbol => "unknown-symbol",
            ParseErrorKind::DuplicateDefinition => "duplicate-definition",
            ParseErrorKind::DomainMismatch => "domain-mismatch",
            ParseErrorKind::CptShape => "cpt-shape",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    pub fn new(span: SourceSpan, kind: ParseErrorKind, message: impl Into<String>) -> Self {
        ParseError {
            span,
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {} error: {}",
            self.span.line, self.span.column, self.kind, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// Parses a model, returning every independent diagnostic on failure.
pub fn parse_scm(source: &str) -> Result<Scm, Vec<ParseError>> {
    parser::parse(source)
}

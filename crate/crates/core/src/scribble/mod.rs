//! The Scribble dialect: lexer, parser, validator and canonical printer.
//!
//! ```text
//! global protocol P(role A, role B) {
//!   @{size(data) <= 512}
//!   Raw(data) from A to B;
//!   choice at B { Ok from B to A; } or { Ko from B to A; }
//! }
//! ```
//!
//! Statements end with `;`, blocks use braces, choice branches are separated
//! by `or`, parallel branches by `and`, and `rec X { ... }` loops back on a
//! bare `X;`. Local protocols use `from R` for receives and `to R` for sends.

pub mod assertion;
pub mod ast;
mod lexer;
mod parser;
mod printer;
mod validate;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use printer::{serialize, serialize_global, serialize_local};
pub use validate::{validate_global, validate_local};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValidationKind {
    UndeclaredRole,
    UnboundRecursion,
    DuplicateRole,
    LabelClash,
    /// A choice branch that does not open with a message sent by the choosing role.
    ChoiceSubject,
    SelfInteraction,
}

impl ValidationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationKind::UndeclaredRole => "undeclared-role",
            ValidationKind::UnboundRecursion => "unbound-recursion",
            ValidationKind::DuplicateRole => "duplicate-role",
            ValidationKind::LabelClash => "label-clash",
            ValidationKind::ChoiceSubject => "choice-subject",
            ValidationKind::SelfInteraction => "self-interaction",
        }
    }
}

impl fmt::Display for ValidationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: expected one of {}", expected.join(", "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
    },
    #[error("invalid protocol ({kind}): {location}")]
    Validation {
        kind: ValidationKind,
        location: String,
    },
}

impl ParseError {
    pub(crate) fn syntax<I, S>(line: usize, column: usize, expected: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ParseError::Syntax {
            line,
            column,
            expected: expected.into_iter().map(Into::into).collect(),
        }
    }

    pub(crate) fn invalid(kind: ValidationKind, location: impl Into<String>) -> Self {
        ParseError::Validation {
            kind,
            location: location.into(),
        }
    }

    pub fn validation_kind(&self) -> Option<ValidationKind> {
        match self {
            ParseError::Validation { kind, .. } => Some(*kind),
            ParseError::Syntax { .. } => None,
        }
    }
}

/// Parses and validates a global protocol.
pub fn parse_global(source: &str) -> Result<GlobalProtocol, ParseError> {
    let g = parser::Parser::new(source)?.global_file()?;
    validate_global(&g)?;
    Ok(g)
}

/// Parses and validates a local protocol.
pub fn parse_local(source: &str) -> Result<LocalProtocol, ParseError> {
    let l = parser::Parser::new(source)?.local_file()?;
    validate_local(&l)?;
    Ok(l)
}

/// Parses either kind, dispatching on the leading `global`/`local` keyword.
pub fn parse(source: &str) -> Result<Protocol, ParseError> {
    let mut p = parser::Parser::new(source)?;
    let protocol = p.any_file()?;
    match &protocol {
        Protocol::Global(g) => validate_global(g)?,
        Protocol::Local(l) => validate_local(l)?,
    }
    Ok(protocol)
}

//! The `.idr0` surface language: lexing, parsing, printing and elaboration.

pub mod ast;
mod elaborate;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use thiserror::Error;

pub use elaborate::elaborate;
pub use parser::parse_program;
pub use pretty::{pretty_program, pretty_type};

use crate::program::CoreProgram;

/// A 1-based source position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Lex,
    Parse,
    Scope,
    Type,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Lex => "lexical error",
            ErrorKind::Parse => "syntax error",
            ErrorKind::Scope => "scope error",
            ErrorKind::Type => "type error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {message}")]
pub struct SurfaceSyntaxError {
    pub span: Span,
    pub message: String,
    pub kind: ErrorKind,
}

/// Parses and elaborates a whole program.
pub fn load(text: &str) -> Result<CoreProgram, SurfaceSyntaxError> {
    elaborate(&parse_program(text)?)
}

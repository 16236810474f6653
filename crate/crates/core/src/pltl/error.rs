use std::fmt;

use thiserror::Error;

/// 1-based line and column (in characters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lex,
    Syntax,
    UnboundVariable,
    DuplicateProperty,
    Shadowing,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        Self { kind, pos, message: message.into() }
    }

    pub(crate) fn lex(pos: Pos, message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Lex, pos, message)
    }

    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Syntax, pos, message)
    }
}

use std::fmt;

use super::error::{ParseError, Pos};
use crate::trace::{parse_u64, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(Word),
    // keywords
    Property,
    Not,
    And,
    Or,
    Forall,
    Exists,
    ExistsPair,
    In,
    CallStack,
    InFlashLoan,
    Event,
    HookId,
    Arg,
    Sum,
    Deposits,
    Withdrawals,
    Ratio,
    True,
    False,
    // temporal operators
    X,
    U,
    S,
    Y,
    F,
    G,
    O,
    H,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Arrow,
    Plus,
    Minus,
    Lt,
    Le,
    EqEq,
    Ne,
    Ge,
    Gt,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(name) => return write!(f, "identifier `{name}`"),
            Tok::Num(n) => return write!(f, "number {n}"),
            Tok::Property => "property",
            Tok::Not => "not",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Forall => "forall",
            Tok::Exists => "exists",
            Tok::ExistsPair => "exists_pair",
            Tok::In => "in",
            Tok::CallStack => "callstack",
            Tok::InFlashLoan => "inflashloan",
            Tok::Event => "event",
            Tok::HookId => "hookid",
            Tok::Arg => "arg",
            Tok::Sum => "sum",
            Tok::Deposits => "deposits",
            Tok::Withdrawals => "withdrawals",
            Tok::Ratio => "ratio",
            Tok::True => "true",
            Tok::False => "false",
            Tok::X => "X",
            Tok::U => "U",
            Tok::S => "S",
            Tok::Y => "Y",
            Tok::F => "F",
            Tok::G => "G",
            Tok::O => "O",
            Tok::H => "H",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Arrow => "->",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Ge => ">=",
            Tok::Gt => ">",
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "property" => Tok::Property,
        "not" => Tok::Not,
        "and" => Tok::And,
        "or" => Tok::Or,
        "forall" => Tok::Forall,
        "exists" => Tok::Exists,
        "exists_pair" => Tok::ExistsPair,
        "in" => Tok::In,
        "callstack" => Tok::CallStack,
        "inflashloan" => Tok::InFlashLoan,
        "event" => Tok::Event,
        "hookid" => Tok::HookId,
        "arg" => Tok::Arg,
        "sum" => Tok::Sum,
        "deposits" => Tok::Deposits,
        "withdrawals" => Tok::Withdrawals,
        "ratio" => Tok::Ratio,
        "true" => Tok::True,
        "false" => Tok::False,
        "X" => Tok::X,
        "U" => Tok::U,
        "S" => Tok::S,
        "Y" => Tok::Y,
        "F" => Tok::F,
        "G" => Tok::G,
        "O" => Tok::O,
        "H" => Tok::H,
        _ => return None,
    })
}

/// Splits property text into tokens, dropping whitespace and `//` comments.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = keyword(&word).unwrap_or(Tok::Ident(word));
            tokens.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let value = parse_u64(&word).ok_or_else(|| ParseError::lex(pos, format!("invalid number `{word}`")))?;
            tokens.push(Token { tok: Tok::Num(value), pos });
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            _ => return Err(ParseError::lex(pos, format!("illegal character `{}`", c.escape_debug()))),
        };
        tokens.push(Token { tok, pos });
        i += width;
        col += width;
    }
    Ok(tokens)
}

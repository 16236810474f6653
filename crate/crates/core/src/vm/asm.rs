//! Assembly text: one instruction per line, optional `label:` prefix,
//! `;`, `#` or `//` comments. `PUSH` takes a decimal, `0x` or `@label`
//! immediate; `JUMP @l` and `JUMPI @l` expand to `PUSH @l` plus the jump.
//! `EMIT` takes an event code or name (`deposit`, `withdrawal`, `token_transfer`).

use std::collections::HashMap;

use thiserror::Error;

use super::opcode::Op;
use crate::trace::{parse_u64, EventKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct AsmError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

enum Imm {
    Value(u64),
    Label(String, usize, usize),
}

struct Item {
    op: Op,
    label: Option<(String, usize, usize)>,
}

fn strip_comment(line: &str) -> &str {
    let mut end = line.len();
    for marker in [";", "#", "//"] {
        if let Some(i) = line.find(marker) {
            end = end.min(i);
        }
    }
    &line[..end]
}

fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Assembles `text` to bytecode.
pub fn assemble(text: &str) -> Result<Vec<u8>, AsmError> {
    let mut items: Vec<Item> = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut offset = 0usize;

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let code = strip_comment(raw);
        let err = |col: usize, message: String| AsmError { line, col, message };
        let col_of = |s: &str| s.as_ptr() as usize - raw.as_ptr() as usize + 1;

        let mut rest = code.trim();
        if let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if !is_label(name) {
                return Err(err(col_of(rest), format!("invalid label `{name}`")));
            }
            if labels.insert(name.to_string(), offset).is_some() {
                return Err(err(col_of(rest), format!("duplicate label `{name}`")));
            }
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }

        let mut words = rest.split_whitespace();
        let mnemonic = words.next().unwrap_or_default();
        let operand = words.next();
        if let Some(extra) = words.next() {
            return Err(err(col_of(extra), format!("unexpected `{extra}`")));
        }
        let upper = mnemonic.to_ascii_uppercase();

        let imm = |what: &str| -> Result<Imm, AsmError> {
            let s = operand.ok_or_else(|| err(col_of(mnemonic), format!("{upper} needs {what}")))?;
            if let Some(label) = s.strip_prefix('@') {
                if !is_label(label) {
                    return Err(err(col_of(s), format!("invalid label reference `{s}`")));
                }
                return Ok(Imm::Label(label.to_string(), line, col_of(s)));
            }
            parse_u64(s).map(Imm::Value).ok_or_else(|| err(col_of(s), format!("invalid or overflowing immediate `{s}`")))
        };
        let byte_imm = |what: &str| -> Result<u8, AsmError> {
            match imm(what)? {
                Imm::Value(v) => u8::try_from(v).map_err(|_| {
                    err(col_of(operand.unwrap_or_default()), format!("{upper} immediate {v} exceeds 255"))
                }),
                Imm::Label(..) => Err(err(col_of(operand.unwrap_or_default()), format!("{upper} takes a number"))),
            }
        };
        let no_operand = |op: Op| -> Result<Op, AsmError> {
            match operand {
                Some(s) => Err(err(col_of(s), format!("{upper} takes no operand"))),
                None => Ok(op),
            }
        };
        let indexed = |prefix: &str| -> Option<u8> {
            upper.strip_prefix(prefix).and_then(|d| d.parse::<u8>().ok()).filter(|n| *n < 16)
        };

        let mut emit = |op: Op, label: Option<(String, usize, usize)>| {
            offset += op.size();
            items.push(Item { op, label });
        };

        match upper.as_str() {
            "PUSH" => match imm("an immediate")? {
                Imm::Value(v) => emit(Op::Push(v), None),
                Imm::Label(l, ln, c) => emit(Op::Push(0), Some((l, ln, c))),
            },
            "JUMP" | "JUMPI" => {
                let jump = if upper == "JUMP" { Op::Jump } else { Op::JumpI };
                match operand {
                    None => emit(jump, None),
                    Some(_) => {
                        match imm("a target")? {
                            Imm::Value(v) => emit(Op::Push(v), None),
                            Imm::Label(l, ln, c) => emit(Op::Push(0), Some((l, ln, c))),
                        }
                        emit(jump, None);
                    }
                }
            }
            "EMIT" => {
                let s = operand.ok_or_else(|| err(col_of(mnemonic), "EMIT needs an event kind".into()))?;
                let kind = match EventKind::from_name(s) {
                    Some(k) => k.code(),
                    None => byte_imm("an event kind")?,
                };
                emit(Op::Emit(kind), None);
            }
            "HOOK" => {
                let id = byte_imm("a hook id")?;
                emit(Op::Hook(id), None);
            }
            _ => {
                let op = match upper.as_str() {
                    "STOP" => Op::Stop,
                    "ADD" => Op::Add,
                    "SUB" => Op::Sub,
                    "MUL" => Op::Mul,
                    "DIV" => Op::Div,
                    "LT" => Op::Lt,
                    "GT" => Op::Gt,
                    "EQ" => Op::Eq,
                    "ISZERO" => Op::IsZero,
                    "AND" => Op::And,
                    "OR" => Op::Or,
                    "NOT" => Op::Not,
                    "CALLER" => Op::Caller,
                    "CALLVALUE" => Op::CallValue,
                    "SELFADDR" => Op::SelfAddr,
                    "BALANCE" => Op::Balance,
                    "CALLARG" => Op::CallArg,
                    "SELECTOR" => Op::Selector,
                    "POP" => Op::Pop,
                    "SLOAD" => Op::SLoad,
                    "SSTORE" => Op::SStore,
                    "JUMPDEST" => Op::JumpDest,
                    "TRANSFER" => Op::Transfer,
                    "CALL" => Op::Call,
                    "RETURN" => Op::Return,
                    "REVERT" => Op::Revert,
                    _ => {
                        if let Some(n) = indexed("DUP") {
                            Op::Dup(n)
                        } else if let Some(n) = indexed("SWAP") {
                            Op::Swap(n)
                        } else {
                            return Err(err(col_of(mnemonic), format!("unknown mnemonic `{mnemonic}`")));
                        }
                    }
                };
                emit(no_operand(op)?, None);
            }
        }
    }

    let mut out = Vec::with_capacity(offset);
    for item in items {
        let op = match (item.op, item.label) {
            (Op::Push(_), Some((label, line, col))) => {
                let target = labels
                    .get(&label)
                    .ok_or_else(|| AsmError { line, col, message: format!("undefined label `{label}`") })?;
                Op::Push(*target as u64)
            }
            (op, _) => op,
        };
        op.encode(&mut out);
    }
    Ok(out)
}

/// Reads `text` as `0x`-prefixed hex bytecode if it looks like one, else assembles it.
pub fn load_code(text: &str) -> Result<Vec<u8>, AsmError> {
    let t = text.trim();
    if let Some(hex) = t.strip_prefix("0x") {
        if !hex.is_empty() && hex.chars().all(|c| c.is_ascii_hexdigit()) {
            if hex.len() % 2 != 0 {
                return Err(AsmError { line: 1, col: 1, message: "odd-length hex bytecode".into() });
            }
            return Ok((0..hex.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).expect("checked hex digits"))
                .collect());
        }
    }
    assemble(text)
}

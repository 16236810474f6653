use std::fmt;

use crate::trace::Word;

pub const STOP: u8 = 0x00;
pub const ADD: u8 = 0x01;
pub const SUB: u8 = 0x02;
pub const MUL: u8 = 0x03;
pub const DIV: u8 = 0x04;
pub const LT: u8 = 0x10;
pub const GT: u8 = 0x11;
pub const EQ: u8 = 0x12;
pub const ISZERO: u8 = 0x13;
pub const AND: u8 = 0x14;
pub const OR: u8 = 0x15;
pub const NOT: u8 = 0x16;
pub const CALLER: u8 = 0x30;
pub const CALLVALUE: u8 = 0x31;
pub const SELFADDR: u8 = 0x32;
pub const BALANCE: u8 = 0x33;
pub const CALLARG: u8 = 0x34;
/// Not in the base table; lets code dispatch on its own selector.
pub const SELECTOR: u8 = 0x35;
pub const POP: u8 = 0x50;
pub const SLOAD: u8 = 0x54;
pub const SSTORE: u8 = 0x55;
pub const JUMP: u8 = 0x56;
pub const JUMPI: u8 = 0x57;
pub const JUMPDEST: u8 = 0x5B;
pub const PUSH: u8 = 0x60;
pub const DUP0: u8 = 0x80;
pub const SWAP0: u8 = 0x90;
pub const EMIT: u8 = 0xA0;
pub const HOOK: u8 = 0xA5;
pub const TRANSFER: u8 = 0xF0;
pub const CALL: u8 = 0xF1;
pub const RETURN: u8 = 0xF3;
pub const REVERT: u8 = 0xFD;

/// A decoded instruction. Immediates are carried inline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Stop,
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Gt,
    Eq,
    IsZero,
    And,
    Or,
    Not,
    Caller,
    CallValue,
    SelfAddr,
    Balance,
    CallArg,
    Selector,
    Pop,
    SLoad,
    SStore,
    Jump,
    JumpI,
    JumpDest,
    Push(Word),
    Dup(u8),
    Swap(u8),
    Emit(u8),
    Hook(u8),
    Transfer,
    Call,
    Return,
    Revert,
}

impl Op {
    pub fn byte(self) -> u8 {
        match self {
            Op::Stop => STOP,
            Op::Add => ADD,
            Op::Sub => SUB,
            Op::Mul => MUL,
            Op::Div => DIV,
            Op::Lt => LT,
            Op::Gt => GT,
            Op::Eq => EQ,
            Op::IsZero => ISZERO,
            Op::And => AND,
            Op::Or => OR,
            Op::Not => NOT,
            Op::Caller => CALLER,
            Op::CallValue => CALLVALUE,
            Op::SelfAddr => SELFADDR,
            Op::Balance => BALANCE,
            Op::CallArg => CALLARG,
            Op::Selector => SELECTOR,
            Op::Pop => POP,
            Op::SLoad => SLOAD,
            Op::SStore => SSTORE,
            Op::Jump => JUMP,
            Op::JumpI => JUMPI,
            Op::JumpDest => JUMPDEST,
            Op::Push(_) => PUSH,
            Op::Dup(n) => DUP0 + n,
            Op::Swap(n) => SWAP0 + n,
            Op::Emit(_) => EMIT,
            Op::Hook(_) => HOOK,
            Op::Transfer => TRANSFER,
            Op::Call => CALL,
            Op::Return => RETURN,
            Op::Revert => REVERT,
        }
    }

    /// Encoded length in bytes, immediates included.
    pub fn size(self) -> usize {
        match self {
            Op::Push(_) => 9,
            Op::Emit(_) | Op::Hook(_) => 2,
            _ => 1,
        }
    }

    pub fn encode(self, out: &mut Vec<u8>) {
        out.push(self.byte());
        match self {
            Op::Push(v) => out.extend_from_slice(&v.to_le_bytes()),
            Op::Emit(k) => out.push(k),
            Op::Hook(id) => out.push(id),
            _ => {}
        }
    }

    /// Decodes the instruction at `pc`. `None` for an unknown byte or a
    /// truncated immediate.
    pub fn decode(code: &[u8], pc: usize) -> Option<Op> {
        let byte = *code.get(pc)?;
        let imm = |n: usize| code.get(pc + 1..pc + 1 + n);
        Some(match byte {
            STOP => Op::Stop,
            ADD => Op::Add,
            SUB => Op::Sub,
            MUL => Op::Mul,
            DIV => Op::Div,
            LT => Op::Lt,
            GT => Op::Gt,
            EQ => Op::Eq,
            ISZERO => Op::IsZero,
            AND => Op::And,
            OR => Op::Or,
            NOT => Op::Not,
            CALLER => Op::Caller,
            CALLVALUE => Op::CallValue,
            SELFADDR => Op::SelfAddr,
            BALANCE => Op::Balance,
            CALLARG => Op::CallArg,
            SELECTOR => Op::Selector,
            POP => Op::Pop,
            SLOAD => Op::SLoad,
            SSTORE => Op::SStore,
            JUMP => Op::Jump,
            JUMPI => Op::JumpI,
            JUMPDEST => Op::JumpDest,
            PUSH => Op::Push(Word::from_le_bytes(imm(8)?.try_into().ok()?)),
            0x80..=0x8F => Op::Dup(byte - DUP0),
            0x90..=0x9F => Op::Swap(byte - SWAP0),
            EMIT => Op::Emit(imm(1)?[0]),
            HOOK => Op::Hook(imm(1)?[0]),
            TRANSFER => Op::Transfer,
            CALL => Op::Call,
            RETURN => Op::Return,
            REVERT => Op::Revert,
            _ => return None,
        })
    }

    /// Mnemonic without immediates.
    pub fn mnemonic(self) -> String {
        match self {
            Op::Dup(n) => format!("DUP{n}"),
            Op::Swap(n) => format!("SWAP{n}"),
            other => {
                let s = match other {
                    Op::Stop => "STOP",
                    Op::Add => "ADD",
                    Op::Sub => "SUB",
                    Op::Mul => "MUL",
                    Op::Div => "DIV",
                    Op::Lt => "LT",
                    Op::Gt => "GT",
                    Op::Eq => "EQ",
                    Op::IsZero => "ISZERO",
                    Op::And => "AND",
                    Op::Or => "OR",
                    Op::Not => "NOT",
                    Op::Caller => "CALLER",
                    Op::CallValue => "CALLVALUE",
                    Op::SelfAddr => "SELFADDR",
                    Op::Balance => "BALANCE",
                    Op::CallArg => "CALLARG",
                    Op::Selector => "SELECTOR",
                    Op::Pop => "POP",
                    Op::SLoad => "SLOAD",
                    Op::SStore => "SSTORE",
                    Op::Jump => "JUMP",
                    Op::JumpI => "JUMPI",
                    Op::JumpDest => "JUMPDEST",
                    Op::Push(_) => "PUSH",
                    Op::Emit(_) => "EMIT",
                    Op::Hook(_) => "HOOK",
                    Op::Transfer => "TRANSFER",
                    Op::Call => "CALL",
                    Op::Return => "RETURN",
                    Op::Revert => "REVERT",
                    Op::Dup(_) | Op::Swap(_) => unreachable!(),
                };
                s.to_string()
            }
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Op::Push(v) => write!(f, "PUSH {v}"),
            Op::Emit(k) => write!(f, "EMIT {k}"),
            Op::Hook(id) => write!(f, "HOOK {id}"),
            other => f.write_str(&other.mnemonic()),
        }
    }
}

/// Offsets of `JUMPDEST` bytes that are instruction starts, not immediate data.
pub fn jump_dests(code: &[u8]) -> Vec<bool> {
    let mut valid = vec![false; code.len()];
    let mut pc = 0;
    while pc < code.len() {
        let size = match Op::decode(code, pc) {
            Some(op) => {
                if op == Op::JumpDest {
                    valid[pc] = true;
                }
                op.size()
            }
            None => 1,
        };
        pc += size;
    }
    valid
}

/// Decodes `code` into `(offset, op)` pairs, stopping at the first undecodable byte.
pub fn disassemble(code: &[u8]) -> Vec<(usize, Op)> {
    let mut out = Vec::new();
    let mut pc = 0;
    while let Some(op) = Op::decode(code, pc) {
        out.push((pc, op));
        pc += op.size();
    }
    out
}

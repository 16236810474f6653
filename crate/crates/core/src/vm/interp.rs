//! Fetch-decode-execute loop, nested calls and transaction-level atomicity.
//!
//! Operands are popped top-first: `SUB` computes `top - next`, `LT` pushes
//! `top < next`. `CALL` pops target, selector, value, arg and pushes the
//! return word, then the success flag. `TRANSFER` pops recipient then
//! amount and behaves as a selector-0 call that reverts the caller on failure.

use std::fmt;

use crate::pltl::{PropertySet, Verdict};
use crate::trace::{Address, EventKind, Selector, Word};
use crate::tracer::{OpRecord, Registry, Tracer};

use super::opcode::{jump_dests, Op};
use super::world::World;

pub const MAX_CALL_DEPTH: usize = 64;
pub const MAX_STACK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transaction {
    pub origin: Address,
    pub target: Address,
    pub selector: Selector,
    pub value: Word,
    pub arg: Word,
    pub gas_limit: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxStatus {
    Success,
    Reverted { reason: String },
    OutOfGas,
    PropertyViolation { verdict: Verdict },
}

impl TxStatus {
    pub fn name(&self) -> &'static str {
        match self {
            TxStatus::Success => "Success",
            TxStatus::Reverted { .. } => "Reverted",
            TxStatus::OutOfGas => "OutOfGas",
            TxStatus::PropertyViolation { .. } => "PropertyViolation",
        }
    }
}

impl fmt::Display for TxStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxStatus::Reverted { reason } => write!(f, "Reverted({reason})"),
            TxStatus::PropertyViolation { verdict: Verdict::Violation { property, position, .. } } => {
                write!(f, "PropertyViolation({property} @ {position})")
            }
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub status: TxStatus,
    pub gas_used: Word,
    pub return_value: Option<Word>,
}

/// One activation of contract code.
#[derive(Debug, Clone)]
pub struct Frame {
    pub contract: Address,
    pub selector: Selector,
    pub caller: Address,
    pub value: Word,
    pub arg: Word,
    pub pc: usize,
    pub stack: Vec<Word>,
    pub depth: usize,
    code: Vec<u8>,
    dests: Vec<bool>,
}

impl Frame {
    pub fn new(code: Vec<u8>, contract: Address, selector: Selector, caller: Address, value: Word, arg: Word) -> Self {
        let dests = jump_dests(&code);
        Self { contract, selector, caller, value, arg, pc: 0, stack: Vec::new(), depth: 0, code, dests }
    }

    pub fn code(&self) -> &[u8] {
        &self.code
    }
}

/// How a frame ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Halt {
    Stop,
    Return(Word),
    Revert(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Continue,
    Halt(Halt),
}

/// Conditions that end the whole transaction rather than one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Abort {
    OutOfGas,
    Violation(Verdict),
    Internal(String),
}

enum Interrupt {
    Halt(Halt),
    Abort(Abort),
}

impl From<Abort> for Interrupt {
    fn from(a: Abort) -> Self {
        Interrupt::Abort(a)
    }
}

fn revert(reason: impl Into<String>) -> Interrupt {
    Interrupt::Halt(Halt::Revert(reason.into()))
}

fn internal(e: impl fmt::Display) -> Abort {
    Abort::Internal(e.to_string())
}

impl Frame {
    fn pop(&mut self) -> Result<Word, Interrupt> {
        let pc = self.pc;
        self.stack.pop().ok_or_else(|| revert(format!("stack underflow at pc {pc}")))
    }

    fn push(&mut self, v: Word) -> Result<(), Interrupt> {
        if self.stack.len() >= MAX_STACK {
            return Err(revert(format!("stack overflow at pc {}", self.pc)));
        }
        self.stack.push(v);
        Ok(())
    }
}

/// Result of a call as seen by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallResult {
    pub success: bool,
    pub ret: Word,
    pub revert_reason: Option<String>,
}

pub struct Machine<'a> {
    pub world: &'a mut World,
    pub tracer: &'a mut Tracer,
    registry: &'a Registry,
    props: &'a PropertySet,
    gas_left: Word,
}

impl<'a> Machine<'a> {
    pub fn new(
        world: &'a mut World,
        tracer: &'a mut Tracer,
        registry: &'a Registry,
        props: &'a PropertySet,
        gas_limit: Word,
    ) -> Self {
        Self { world, tracer, registry, props, gas_left: gas_limit }
    }

    pub fn gas_left(&self) -> Word {
        self.gas_left
    }

    /// Runs a child frame at trace depth `depth`. A reverting child rolls
    /// back its own state changes; aborts propagate untouched.
    pub fn call(
        &mut self,
        caller: Address,
        target: Address,
        selector: Selector,
        value: Word,
        arg: Word,
        depth: usize,
    ) -> Result<CallResult, Abort> {
        let failed = |reason: &str| CallResult { success: false, ret: 0, revert_reason: Some(reason.to_string()) };
        if depth > MAX_CALL_DEPTH {
            return Ok(failed("call depth exceeded"));
        }
        if self.world.balance(caller) < value {
            return Ok(failed("insufficient balance for call value"));
        }
        let snap = self.world.snapshot();
        if !self.world.transfer(caller, target, value) {
            return Ok(failed("value transfer failed"));
        }
        self.tracer.record_call(target, selector, caller, value, arg).map_err(internal)?;

        let mut frame = Frame::new(self.world.code(target).to_vec(), target, selector, caller, value, arg);
        frame.depth = depth;
        let halt = self.run_frame(&mut frame)?;
        match halt {
            Halt::Stop | Halt::Return(_) => {
                let ret = if let Halt::Return(v) = halt { v } else { 0 };
                self.tracer.record_return(true, ret).map_err(internal)?;
                Ok(CallResult { success: true, ret, revert_reason: None })
            }
            Halt::Revert(reason) => {
                self.world.revert_to(snap);
                self.tracer.record_return(false, 0).map_err(internal)?;
                Ok(CallResult { success: false, ret: 0, revert_reason: Some(reason) })
            }
        }
    }

    pub fn run_frame(&mut self, frame: &mut Frame) -> Result<Halt, Abort> {
        loop {
            if let Outcome::Halt(h) = self.step(frame)? {
                return Ok(h);
            }
        }
    }

    /// Executes one instruction of `frame`.
    pub fn step(&mut self, frame: &mut Frame) -> Result<Outcome, Abort> {
        match self.exec(frame) {
            Ok(()) => Ok(Outcome::Continue),
            Err(Interrupt::Halt(h)) => Ok(Outcome::Halt(h)),
            Err(Interrupt::Abort(a)) => Err(a),
        }
    }

    fn exec(&mut self, f: &mut Frame) -> Result<(), Interrupt> {
        if f.pc >= f.code.len() {
            return Err(Interrupt::Halt(Halt::Stop));
        }
        let Some(op) = Op::decode(&f.code, f.pc) else {
            return Err(revert(format!("invalid opcode 0x{:02x} at pc {}", f.code[f.pc], f.pc)));
        };
        if self.gas_left == 0 {
            return Err(Abort::OutOfGas.into());
        }
        self.gas_left -= 1;
        if self.tracer.debug() {
            self.tracer.record_op(OpRecord {
                depth: f.depth,
                contract: f.contract.to_string(),
                pc: f.pc,
                op: op.to_string(),
                gas_left: self.gas_left,
            });
        }
        let here = f.pc;
        f.pc += op.size();

        match op {
            Op::Stop => return Err(Interrupt::Halt(Halt::Stop)),
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Lt | Op::Gt | Op::Eq | Op::And | Op::Or => {
                let a = f.pop()?;
                let b = f.pop()?;
                let r = match op {
                    Op::Add => a.wrapping_add(b),
                    Op::Sub => a.wrapping_sub(b),
                    Op::Mul => a.wrapping_mul(b),
                    Op::Div => a.checked_div(b).unwrap_or(0),
                    Op::Lt => (a < b) as Word,
                    Op::Gt => (a > b) as Word,
                    Op::Eq => (a == b) as Word,
                    Op::And => a & b,
                    _ => a | b,
                };
                f.push(r)?;
            }
            Op::IsZero => {
                let a = f.pop()?;
                f.push((a == 0) as Word)?;
            }
            Op::Not => {
                let a = f.pop()?;
                f.push(!a)?;
            }
            Op::Caller => f.push(f.caller.0)?,
            Op::CallValue => f.push(f.value)?,
            Op::SelfAddr => f.push(f.contract.0)?,
            Op::Balance => {
                let a = f.pop()?;
                f.push(self.world.balance(Address(a)))?;
            }
            Op::CallArg => f.push(f.arg)?,
            Op::Selector => f.push(f.selector.0 as Word)?,
            Op::Pop => {
                f.pop()?;
            }
            Op::SLoad => {
                let k = f.pop()?;
                f.push(self.world.load(f.contract, k))?;
            }
            Op::SStore => {
                let k = f.pop()?;
                let v = f.pop()?;
                let old = self.world.store(f.contract, k, v);
                self.tracer.record_store(k, old, v).map_err(internal)?;
            }
            Op::Jump | Op::JumpI => {
                let dest = f.pop()?;
                let taken = op == Op::Jump || f.pop()? != 0;
                if taken {
                    let ok = usize::try_from(dest).ok().and_then(|d| f.dests.get(d).copied()).unwrap_or(false);
                    if !ok {
                        return Err(revert(format!("bad jump destination {dest} at pc {here}")));
                    }
                    f.pc = dest as usize;
                }
            }
            Op::JumpDest => {}
            Op::Push(v) => f.push(v)?,
            Op::Dup(n) => {
                let n = n as usize;
                if f.stack.len() <= n {
                    return Err(revert(format!("stack underflow at pc {here}")));
                }
                let v = f.stack[f.stack.len() - 1 - n];
                f.push(v)?;
            }
            Op::Swap(n) => {
                let n = n as usize;
                let len = f.stack.len();
                if len < n + 2 {
                    return Err(revert(format!("stack underflow at pc {here}")));
                }
                f.stack.swap(len - 1, len - 2 - n);
            }
            Op::Emit(kind) => {
                let amount = f.pop()?;
                self.tracer.record_emit(EventKind::from_code(kind), amount).map_err(internal)?;
            }
            Op::Hook(id) => {
                let arg = f.pop()?;
                self.tracer.record_hook(id, arg).map_err(internal)?;
                let verdict = self.tracer.on_hook(self.registry, self.props, f.contract, id).map_err(internal)?;
                if !verdict.is_pass() {
                    return Err(Abort::Violation(verdict).into());
                }
            }
            Op::Transfer => {
                let to = f.pop()?;
                let amount = f.pop()?;
                let r = self.call(f.contract, Address(to), Selector(0), amount, 0, f.depth + 1)?;
                if !r.success {
                    return Err(revert(format!("transfer of {amount} to {} failed", Address(to))));
                }
            }
            Op::Call => {
                let target = f.pop()?;
                let selector = f.pop()?;
                let value = f.pop()?;
                let arg = f.pop()?;
                let Ok(selector) = u32::try_from(selector) else {
                    return Err(revert(format!("selector {selector} out of range at pc {here}")));
                };
                if f.stack.len() + 2 > MAX_STACK {
                    return Err(revert(format!("stack overflow at pc {here}")));
                }
                let r = self.call(f.contract, Address(target), Selector(selector), value, arg, f.depth + 1)?;
                f.push(r.ret)?;
                f.push(r.success as Word)?;
            }
            Op::Return => {
                let v = f.pop()?;
                return Err(Interrupt::Halt(Halt::Return(v)));
            }
            Op::Revert => return Err(revert(format!("REVERT at pc {here}"))),
        }
        Ok(())
    }
}

/// Runs `tx` against `world`. Any non-success status leaves `world` as it
/// was before the call. The trace is bracketed by a root frame
/// `(origin, 0)` at depth 0; `tracer` should be fresh.
pub fn execute_transaction(
    world: &mut World,
    tx: &Transaction,
    tracer: &mut Tracer,
    registry: &Registry,
    props: &PropertySet,
) -> Receipt {
    let pre = world.snapshot();
    let rejected = |reason: &str| Receipt {
        status: TxStatus::Reverted { reason: reason.to_string() },
        gas_used: 0,
        return_value: None,
    };
    if let Err(e) = tracer.record_call(tx.origin, Selector(0), tx.origin, tx.value, tx.arg) {
        return rejected(&format!("internal error: {e}"));
    }
    let precheck = if tx.gas_limit == 0 {
        Some("gas limit must be positive")
    } else if world.code(tx.target).is_empty() {
        Some("target has no code")
    } else if world.balance(tx.origin) < tx.value {
        Some("origin balance below value")
    } else {
        None
    };
    if let Some(reason) = precheck {
        let _ = tracer.record_return(false, 0);
        return rejected(reason);
    }

    let mut machine = Machine::new(world, tracer, registry, props, tx.gas_limit);
    let outcome = machine.call(tx.origin, tx.target, tx.selector, tx.value, tx.arg, 1);
    let gas_used = tx.gas_limit - machine.gas_left();

    let (status, return_value) = match outcome {
        Ok(CallResult { success: true, ret, .. }) => match tracer.record_return(true, ret) {
            Ok(()) => (TxStatus::Success, Some(ret)),
            Err(e) => (TxStatus::Reverted { reason: format!("internal error: {e}") }, None),
        },
        Ok(CallResult { revert_reason, .. }) => {
            let _ = tracer.record_return(false, 0);
            (TxStatus::Reverted { reason: revert_reason.unwrap_or_else(|| "reverted".into()) }, None)
        }
        Err(Abort::OutOfGas) => (TxStatus::OutOfGas, None),
        Err(Abort::Violation(verdict)) => (TxStatus::PropertyViolation { verdict }, None),
        Err(Abort::Internal(reason)) => (TxStatus::Reverted { reason: format!("internal error: {reason}") }, None),
    };
    if status != TxStatus::Success {
        world.revert_to(pre);
        let _ = tracer.unwind();
    }
    Receipt { status, gas_used, return_value }
}

//! Semantic execution traces.
//!
//! A [`Trace`] is the append-only sequence of semantic steps (calls, returns,
//! event emissions, hooks and storage writes) produced by one transaction.
//! Temporal properties index positions in this sequence; opcode-level
//! activity never occupies a position.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Machine word. All VM arithmetic wraps at 64 bits.
pub type Word = u64;

/// Contract or account address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Address(pub u64);

/// Four-byte function selector. Selector 0 is the fallback / plain transfer entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Selector(pub u32);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Parses `0x`-prefixed hex or plain decimal.
pub fn parse_u64(text: &str) -> Option<u64> {
    let text = text.trim();
    match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) if !hex.is_empty() => u64::from_str_radix(hex, 16).ok(),
        Some(_) => None,
        None => text.parse().ok(),
    }
}

impl std::str::FromStr for Address {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_u64(s).map(Address).ok_or_else(|| format!("invalid address `{s}`"))
    }
}

impl std::str::FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_u64(s)
            .and_then(|v| u32::try_from(v).ok())
            .map(Selector)
            .ok_or_else(|| format!("invalid selector `{s}`"))
    }
}

/// One open frame: the contract executing and the function it was entered through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallStackEntry {
    pub contract: Address,
    pub selector: Selector,
}

impl CallStackEntry {
    pub fn new(contract: Address, selector: Selector) -> Self {
        Self { contract, selector }
    }
}

impl fmt::Display for CallStackEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.contract, self.selector)
    }
}

/// Kind of an emitted event. Codes 0, 1 and 2 are reserved for the named kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    TokenTransfer,
    Deposit,
    Withdrawal,
    Custom(u8),
}

impl EventKind {
    pub fn from_code(code: u8) -> Self {
        match code {
            0 => EventKind::TokenTransfer,
            1 => EventKind::Deposit,
            2 => EventKind::Withdrawal,
            c => EventKind::Custom(c),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            EventKind::TokenTransfer => 0,
            EventKind::Deposit => 1,
            EventKind::Withdrawal => 2,
            EventKind::Custom(c) => c,
        }
    }

    /// Name used by the property language and the assembler.
    pub fn name(self) -> Option<&'static str> {
        match self {
            EventKind::TokenTransfer => Some("token_transfer"),
            EventKind::Deposit => Some("deposit"),
            EventKind::Withdrawal => Some("withdrawal"),
            EventKind::Custom(_) => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "token_transfer" => Some(EventKind::TokenTransfer),
            "deposit" => Some(EventKind::Deposit),
            "withdrawal" => Some(EventKind::Withdrawal),
            _ => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{}", self.code()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Call,
    Return,
    Emit,
    Hook,
    Store,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Call => "call",
            StepKind::Return => "return",
            StepKind::Emit => "emit",
            StepKind::Hook => "hook",
            StepKind::Store => "store",
        }
    }
}

/// Kind-specific data of a step.
///
/// For a `Call` the callee and its selector are the step's own `contract` and
/// `selector`; the payload records who called and with what value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPayload {
    Call { caller: Address, value: Word, arg: Word },
    Return { success: bool, value: Word },
    Emit { event: EventKind, amount: Word },
    Hook { hook_id: u8, arg: Word },
    Store { key: Word, old: Word, new: Word },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub index: usize,
    /// Depth of the frame executing the step; the synthetic root frame is depth 0.
    pub depth: usize,
    pub contract: Address,
    pub selector: Selector,
    pub payload: StepPayload,
}

impl TraceStep {
    pub fn kind(&self) -> StepKind {
        match self.payload {
            StepPayload::Call { .. } => StepKind::Call,
            StepPayload::Return { .. } => StepKind::Return,
            StepPayload::Emit { .. } => StepKind::Emit,
            StepPayload::Hook { .. } => StepKind::Hook,
            StepPayload::Store { .. } => StepKind::Store,
        }
    }

    pub fn entry(&self) -> CallStackEntry {
        CallStackEntry::new(self.contract, self.selector)
    }

    pub fn hook(&self) -> Option<(u8, Word)> {
        match self.payload {
            StepPayload::Hook { hook_id, arg } => Some((hook_id, arg)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("step index {got} does not match trace length {expected}")]
    IndexMismatch { expected: usize, got: usize },
    #[error("position {position} out of range for trace of length {len}")]
    OutOfRange { position: usize, len: usize },
    #[error("malformed trace at step {position}: {reason}")]
    Malformed { position: usize, reason: String },
}

/// Append-only sequence of semantic steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    steps: Vec<TraceStep>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn get(&self, i: usize) -> Option<&TraceStep> {
        self.steps.get(i)
    }

    pub fn step(&self, i: usize) -> Result<&TraceStep, TraceError> {
        self.steps.get(i).ok_or(TraceError::OutOfRange { position: i, len: self.len() })
    }

    /// Appends `step`, which must carry the next dense index.
    pub fn append_step(&mut self, step: TraceStep) -> Result<(), TraceError> {
        if step.index != self.steps.len() {
            return Err(TraceError::IndexMismatch { expected: self.steps.len(), got: step.index });
        }
        self.steps.push(step);
        Ok(())
    }

    /// Positions of every `Hook` step.
    pub fn hook_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().filter(|s| s.kind() == StepKind::Hook).map(|s| s.index)
    }

    /// Frames open while step `i` executes, root first.
    ///
    /// A frame is open at `i` when its `Call` is at or before `i` and its
    /// matching `Return` is at or after `i` (or absent). A `Return` step is
    /// therefore still attributed to the frame it closes.
    pub fn callstack_at(&self, i: usize) -> Result<Vec<CallStackEntry>, TraceError> {
        self.step(i)?;
        let mut stack = Vec::new();
        for step in &self.steps[..=i] {
            match step.kind() {
                StepKind::Call => stack.push(step.entry()),
                StepKind::Return if step.index < i && stack.pop().is_none() => {
                    return Err(TraceError::Malformed {
                        position: step.index,
                        reason: "return without open call".into(),
                    });
                }
                _ => {}
            }
        }
        Ok(stack)
    }

    /// Call stacks for every position in one pass.
    pub fn callstacks(&self) -> Result<Vec<Vec<CallStackEntry>>, TraceError> {
        let mut out = Vec::with_capacity(self.len());
        let mut open: Vec<CallStackEntry> = Vec::new();
        for step in &self.steps {
            match step.kind() {
                StepKind::Call => {
                    open.push(step.entry());
                    out.push(open.clone());
                }
                StepKind::Return => {
                    out.push(open.clone());
                    if open.pop().is_none() {
                        return Err(TraceError::Malformed {
                            position: step.index,
                            reason: "return without open call".into(),
                        });
                    }
                }
                _ => out.push(open.clone()),
            }
        }
        Ok(out)
    }

    /// Sum of `amount` over `Emit` steps at positions `<= i` of the given kind
    /// emitted by `contract`. Saturates at `Word::MAX`.
    pub fn sum_events(&self, i: usize, kind: EventKind, contract: Address) -> Result<Word, TraceError> {
        self.step(i)?;
        Ok(self.steps[..=i]
            .iter()
            .filter(|s| s.contract == contract)
            .filter_map(|s| match s.payload {
                StepPayload::Emit { event, amount } if event == kind => Some(amount),
                _ => None,
            })
            .fold(0, Word::saturating_add))
    }

    /// Checks dense indices and balanced, depth-consistent call nesting.
    /// With `allow_open` the trace may end with frames still open (a live prefix).
    pub fn validate(&self, allow_open: bool) -> Result<(), TraceError> {
        let mut open: Vec<CallStackEntry> = Vec::new();
        for (pos, step) in self.steps.iter().enumerate() {
            let malformed = |reason: String| TraceError::Malformed { position: pos, reason };
            if step.index != pos {
                return Err(malformed(format!("index {} at position {pos}", step.index)));
            }
            match step.kind() {
                StepKind::Call => {
                    if step.depth != open.len() {
                        return Err(malformed(format!(
                            "call at depth {} but {} frames are open",
                            step.depth,
                            open.len()
                        )));
                    }
                    if pos > 0 && open.is_empty() {
                        return Err(malformed("second root call".into()));
                    }
                    open.push(step.entry());
                }
                StepKind::Return => {
                    let Some(top) = open.last().copied() else {
                        return Err(malformed("return without open call".into()));
                    };
                    if step.depth + 1 != open.len() || top != step.entry() {
                        return Err(malformed(format!(
                            "return from {} at depth {} does not match open frame {} at depth {}",
                            step.entry(),
                            step.depth,
                            top,
                            open.len() - 1
                        )));
                    }
                    open.pop();
                }
                _ => {
                    let Some(top) = open.last().copied() else {
                        return Err(malformed(format!("{} step outside any frame", step.kind().as_str())));
                    };
                    if step.depth + 1 != open.len() || top != step.entry() {
                        return Err(malformed(format!(
                            "{} step attributed to {} at depth {}, executing frame is {} at depth {}",
                            step.kind().as_str(),
                            step.entry(),
                            step.depth,
                            top,
                            open.len() - 1
                        )));
                    }
                }
            }
        }
        if !allow_open && !open.is_empty() {
            return Err(TraceError::Malformed {
                position: self.len().saturating_sub(1),
                reason: format!("{} frame(s) never returned", open.len()),
            });
        }
        Ok(())
    }

    /// Nesting of all calls in the trace.
    ///
    /// Offline (`live == false`) every call must have returned. In live mode
    /// open frames are closed implicitly and reported as not yet successful.
    pub fn invocation_tree(&self, live: bool) -> Result<InvocationNode, TraceError> {
        self.validate(live)?;
        let mut open: Vec<InvocationNode> = Vec::new();
        let mut root = None;
        for step in &self.steps {
            match step.payload {
                StepPayload::Call { value, .. } => open.push(InvocationNode {
                    contract: step.contract,
                    selector: step.selector,
                    value,
                    children: Vec::new(),
                    success: false,
                }),
                StepPayload::Return { success, .. } => {
                    let mut node = open.pop().expect("validated nesting");
                    node.success = success;
                    match open.last_mut() {
                        Some(parent) => parent.children.push(node),
                        None => root = Some(node),
                    }
                }
                _ => {}
            }
        }
        while let Some(node) = open.pop() {
            match open.last_mut() {
                Some(parent) => parent.children.push(node),
                None => root = Some(node),
            }
        }
        root.ok_or_else(|| TraceError::Malformed { position: 0, reason: "trace has no calls".into() })
    }
}

/// One call in the completed invocation tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvocationNode {
    pub contract: Address,
    pub selector: Selector,
    pub value: Word,
    pub children: Vec<InvocationNode>,
    pub success: bool,
}

impl InvocationNode {
    pub fn entry(&self) -> CallStackEntry {
        CallStackEntry::new(self.contract, self.selector)
    }

    /// Pre-order list of calls.
    pub fn preorder(&self) -> Vec<CallStackEntry> {
        let mut out = Vec::new();
        fn walk(node: &InvocationNode, out: &mut Vec<CallStackEntry>) {
            out.push(node.entry());
            node.children.iter().for_each(|c| walk(c, out));
        }
        walk(self, &mut out);
        out
    }

    /// Call/Return skeleton of the subtree: `(entry, true)` for a call,
    /// `(entry, false)` for its return.
    pub fn flatten(&self) -> Vec<(CallStackEntry, bool)> {
        let mut out = Vec::new();
        fn walk(node: &InvocationNode, out: &mut Vec<(CallStackEntry, bool)>) {
            out.push((node.entry(), true));
            node.children.iter().for_each(|c| walk(c, out));
            out.push((node.entry(), false));
        }
        walk(self, &mut out);
        out
    }
}

//! Trace documents: `{"version":1,"steps":[...]}`, one step object per line.
//!
//! Every step starts with `i`, `kind`, `depth`, `contract`, `selector`,
//! followed by its kind-specific fields:
//!
//! | kind   | fields                    |
//! |--------|---------------------------|
//! | call   | `caller`, `value`, `arg`  |
//! | return | `success`, `value`        |
//! | emit   | `event`, `amount`         |
//! | hook   | `hook_id`, `arg`          |
//! | store  | `key`, `old`, `new`       |
//!
//! Addresses and selectors are `0x` hex strings; words are JSON integers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Address, EventKind, Selector, StepKind, StepPayload, Trace, TraceError, TraceStep, Word};

pub const VERSION: u32 = 1;

/// Opcode-level record kept when debug tracing is on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub depth: usize,
    pub contract: String,
    pub pc: usize,
    pub op: String,
    pub gas_left: Word,
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("unsupported trace version {0}")]
    Version(u32),
    #[error("step {step}: {message}")]
    Schema { step: usize, message: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

// Field order here is the serialized key order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    i: usize,
    kind: String,
    depth: usize,
    contract: String,
    selector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caller: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    success: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amount: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hook_id: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arg: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    key: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    old: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    new: Option<Word>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    version: u32,
    steps: Vec<StepDoc>,
    #[serde(default)]
    #[allow(dead_code)]
    ops: Option<Vec<OpRecord>>,
}

impl StepDoc {
    fn from_step(step: &TraceStep) -> Self {
        let mut doc = StepDoc {
            i: step.index,
            kind: step.kind().as_str().to_string(),
            depth: step.depth,
            contract: step.contract.to_string(),
            selector: step.selector.to_string(),
            caller: None,
            success: None,
            value: None,
            event: None,
            amount: None,
            hook_id: None,
            arg: None,
            key: None,
            old: None,
            new: None,
        };
        match step.payload {
            StepPayload::Call { caller, value, arg } => {
                doc.caller = Some(caller.to_string());
                doc.value = Some(value);
                doc.arg = Some(arg);
            }
            StepPayload::Return { success, value } => {
                doc.success = Some(success);
                doc.value = Some(value);
            }
            StepPayload::Emit { event, amount } => {
                doc.event = Some(event.code());
                doc.amount = Some(amount);
            }
            StepPayload::Hook { hook_id, arg } => {
                doc.hook_id = Some(hook_id);
                doc.arg = Some(arg);
            }
            StepPayload::Store { key, old, new } => {
                doc.key = Some(key);
                doc.old = Some(old);
                doc.new = Some(new);
            }
        }
        doc
    }

    fn into_step(self, position: usize) -> Result<TraceStep, ImportError> {
        let schema = |message: String| ImportError::Schema { step: position, message };
        let kind = match self.kind.as_str() {
            "call" => StepKind::Call,
            "return" => StepKind::Return,
            "emit" => StepKind::Emit,
            "hook" => StepKind::Hook,
            "store" => StepKind::Store,
            other => return Err(schema(format!("unknown kind `{other}`"))),
        };
        let present = [
            ("caller", self.caller.is_some()),
            ("success", self.success.is_some()),
            ("value", self.value.is_some()),
            ("event", self.event.is_some()),
            ("amount", self.amount.is_some()),
            ("hook_id", self.hook_id.is_some()),
            ("arg", self.arg.is_some()),
            ("key", self.key.is_some()),
            ("old", self.old.is_some()),
            ("new", self.new.is_some()),
        ];
        let wanted: &[&str] = match kind {
            StepKind::Call => &["caller", "value", "arg"],
            StepKind::Return => &["success", "value"],
            StepKind::Emit => &["event", "amount"],
            StepKind::Hook => &["hook_id", "arg"],
            StepKind::Store => &["key", "old", "new"],
        };
        for (field, has) in present {
            match (wanted.contains(&field), has) {
                (true, false) => return Err(schema(format!("{} step missing `{field}`", self.kind))),
                (false, true) => return Err(schema(format!("field `{field}` not allowed on {} step", self.kind))),
                _ => {}
            }
        }
        let contract: Address = self.contract.parse().map_err(schema)?;
        let selector: Selector = self.selector.parse().map_err(schema)?;
        let payload = match kind {
            StepKind::Call => StepPayload::Call {
                caller: self.caller.unwrap_or_default().parse().map_err(schema)?,
                value: self.value.unwrap_or_default(),
                arg: self.arg.unwrap_or_default(),
            },
            StepKind::Return => StepPayload::Return {
                success: self.success.unwrap_or_default(),
                value: self.value.unwrap_or_default(),
            },
            StepKind::Emit => StepPayload::Emit {
                event: EventKind::from_code(self.event.unwrap_or_default()),
                amount: self.amount.unwrap_or_default(),
            },
            StepKind::Hook => {
                StepPayload::Hook { hook_id: self.hook_id.unwrap_or_default(), arg: self.arg.unwrap_or_default() }
            }
            StepKind::Store => StepPayload::Store {
                key: self.key.unwrap_or_default(),
                old: self.old.unwrap_or_default(),
                new: self.new.unwrap_or_default(),
            },
        };
        Ok(TraceStep { index: self.i, depth: self.depth, contract, selector, payload })
    }
}

/// Serializes `trace`. Identical traces give identical bytes.
pub fn export_trace(trace: &Trace) -> String {
    export_with_ops(trace, None)
}

pub(crate) fn export_with_ops(trace: &Trace, ops: Option<&[OpRecord]>) -> String {
    let mut out = format!("{{\"version\":{VERSION},\"steps\":[");
    for (n, step) in trace.steps().iter().enumerate() {
        out.push_str(if n == 0 { "\n" } else { ",\n" });
        out.push_str(&serde_json::to_string(&StepDoc::from_step(step)).expect("plain data serializes"));
    }
    if !trace.is_empty() {
        out.push('\n');
    }
    out.push(']');
    if let Some(ops) = ops {
        out.push_str(",\"ops\":");
        out.push_str(&serde_json::to_string(ops).expect("plain data serializes"));
    }
    out.push('}');
    out
}

/// Parses and validates a trace document. The trace must be balanced.
pub fn import_trace(document: &str) -> Result<Trace, ImportError> {
    let doc: TraceDoc = serde_json::from_str(document).map_err(|e| ImportError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.version != VERSION {
        return Err(ImportError::Version(doc.version));
    }
    let mut trace = Trace::new();
    for (position, step) in doc.steps.into_iter().enumerate() {
        if step.i != position {
            return Err(ImportError::Schema {
                step: position,
                message: format!("index gap: expected i = {position}, found {}", step.i),
            });
        }
        trace.append_step(step.into_step(position)?)?;
    }
    trace.validate(false)?;
    Ok(trace)
}

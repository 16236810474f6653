//! Client-side tracer: records semantic steps as the VM runs, keeps the live
//! call stack, and evaluates the properties bound to each hook.

mod json;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::pltl::{check_each, CheckError, PropertySet, ProviderSet, Verdict};
use crate::trace::{
    Address, CallStackEntry, EventKind, Selector, StepKind, StepPayload, Trace, TraceError, TraceStep, Word,
};

pub use json::{export_trace, import_trace, ImportError, OpRecord};

/// Binds a property to the hook `hook_id` of `contract`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyBinding {
    pub contract: Address,
    pub hook_id: u8,
    pub property: String,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub flashloan_providers: Arc<ProviderSet>,
    pub bindings: Vec<PropertyBinding>,
    /// Per-contract `(num, den)` used when a binding names `builtin.tvl` without arguments.
    pub tvl_thresholds: BTreeMap<Address, (Word, Word)>,
}

impl Registry {
    /// Properties bound to `(contract, hook_id)` in binding order.
    pub fn bound(&self, contract: Address, hook_id: u8) -> Vec<&str> {
        self.bindings
            .iter()
            .filter(|b| b.contract == contract && b.hook_id == hook_id)
            .map(|b| b.property.as_str())
            .collect()
    }

    /// Every binding must name a property in `props` that is evaluable at hooks.
    pub fn validate(&self, props: &PropertySet) -> Result<(), CheckError> {
        let names: Vec<&str> = self.bindings.iter().map(|b| b.property.as_str()).collect();
        crate::pltl::resolve_bound(props, &names).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictRecord {
    pub position: usize,
    pub property: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default)]
pub struct Tracer {
    trace: Trace,
    live_stack: Vec<CallStackEntry>,
    verdict_log: Vec<VerdictRecord>,
    debug: bool,
    ops: Vec<OpRecord>,
}

impl Tracer {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tracer that also keeps an opcode-level log. The log never enters the trace proper.
    pub fn with_debug(debug: bool) -> Self {
        Self { debug, ..Self::default() }
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn live_stack(&self) -> &[CallStackEntry] {
        &self.live_stack
    }

    pub fn verdict_log(&self) -> &[VerdictRecord] {
        &self.verdict_log
    }

    pub fn debug(&self) -> bool {
        self.debug
    }

    pub fn ops(&self) -> &[OpRecord] {
        &self.ops
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn next_index(&self) -> usize {
        self.trace.len()
    }

    /// Appends `step`, pushing or popping the live stack on call and return.
    pub fn record(&mut self, step: TraceStep) -> Result<(), TraceError> {
        let malformed = |reason: String| TraceError::Malformed { position: step.index, reason };
        match step.kind() {
            StepKind::Call => {
                if step.depth != self.live_stack.len() {
                    return Err(malformed(format!(
                        "call at depth {} with {} open frames",
                        step.depth,
                        self.live_stack.len()
                    )));
                }
                if !self.trace.is_empty() && self.live_stack.is_empty() {
                    return Err(malformed("call after the root frame returned".into()));
                }
            }
            _ => {
                let Some(top) = self.live_stack.last() else {
                    return Err(malformed(format!("{} with no open frame", step.kind().as_str())));
                };
                if step.depth + 1 != self.live_stack.len() || *top != step.entry() {
                    return Err(malformed(format!(
                        "{} attributed to {} at depth {}, open frame is {} at depth {}",
                        step.kind().as_str(),
                        step.entry(),
                        step.depth,
                        top,
                        self.live_stack.len() - 1
                    )));
                }
            }
        }
        self.trace.append_step(step)?;
        match step.kind() {
            StepKind::Call => self.live_stack.push(step.entry()),
            StepKind::Return => {
                self.live_stack.pop();
            }
            _ => {}
        }
        debug_assert_eq!(self.live_stack, self.open_after_last(), "live stack diverged from trace");
        Ok(())
    }

    /// Frames still open after the last recorded step, replayed from the trace.
    fn open_after_last(&self) -> Vec<CallStackEntry> {
        let Some(last) = self.trace.steps().last() else {
            return Vec::new();
        };
        let mut stack = self.trace.callstack_at(last.index).unwrap_or_default();
        if last.kind() == StepKind::Return {
            stack.pop();
        }
        stack
    }

    fn frame_step(&mut self, payload: StepPayload) -> Result<(), TraceError> {
        let top = *self.live_stack.last().ok_or(TraceError::Malformed {
            position: self.trace.len(),
            reason: "no open frame".into(),
        })?;
        self.record(TraceStep {
            index: self.trace.len(),
            depth: self.live_stack.len() - 1,
            contract: top.contract,
            selector: top.selector,
            payload,
        })
    }

    pub fn record_call(
        &mut self,
        contract: Address,
        selector: Selector,
        caller: Address,
        value: Word,
        arg: Word,
    ) -> Result<(), TraceError> {
        self.record(TraceStep {
            index: self.trace.len(),
            depth: self.live_stack.len(),
            contract,
            selector,
            payload: StepPayload::Call { caller, value, arg },
        })
    }

    pub fn record_return(&mut self, success: bool, value: Word) -> Result<(), TraceError> {
        self.frame_step(StepPayload::Return { success, value })
    }

    pub fn record_emit(&mut self, event: EventKind, amount: Word) -> Result<(), TraceError> {
        self.frame_step(StepPayload::Emit { event, amount })
    }

    pub fn record_hook(&mut self, hook_id: u8, arg: Word) -> Result<(), TraceError> {
        self.frame_step(StepPayload::Hook { hook_id, arg })
    }

    pub fn record_store(&mut self, key: Word, old: Word, new: Word) -> Result<(), TraceError> {
        self.frame_step(StepPayload::Store { key, old, new })
    }

    pub fn record_op(&mut self, op: OpRecord) {
        if self.debug {
            self.ops.push(op);
        }
    }

    /// Closes every open frame with a failed return, leaving a balanced trace.
    pub fn unwind(&mut self) -> Result<(), TraceError> {
        while !self.live_stack.is_empty() {
            self.record_return(false, 0)?;
        }
        Ok(())
    }

    /// Checks the properties bound to `(contract, hook_id)` at the hook step
    /// just recorded. Only the verdict log changes.
    pub fn on_hook(
        &mut self,
        registry: &Registry,
        props: &PropertySet,
        contract: Address,
        hook_id: u8,
    ) -> Result<Verdict, CheckError> {
        let bound = registry.bound(contract, hook_id);
        if bound.is_empty() {
            return Ok(Verdict::Pass);
        }
        let position = self.trace.len().checked_sub(1).ok_or(CheckError::NotAHook(0))?;
        let results = check_each(props, &bound, &self.trace, position, &registry.flashloan_providers)?;
        let mut outcome = Verdict::Pass;
        for (property, verdict) in results {
            if !verdict.is_pass() {
                outcome = verdict.clone();
            }
            self.verdict_log.push(VerdictRecord { position, property, verdict });
        }
        Ok(outcome)
    }

    pub fn export(&self) -> String {
        json::export_with_ops(&self.trace, self.debug.then_some(self.ops.as_slice()))
    }
}

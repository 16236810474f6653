//! Offline evaluation of formulas over a trace.
//!
//! Each subformula is evaluated to a truth vector over positions
//! `0..horizon`. Past operators only look backwards, so formulas without
//! future operators are evaluated on the prefix ending at the queried
//! position; future operators use finite-trace semantics over the whole
//! trace (`X` is false at the last position, `U` needs a witness inside
//! the trace).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use super::ast::{ArithExpr, Binder, Formula, Predicate};
use crate::trace::{Address, CallStackEntry, EventKind, Selector, StepKind, StepPayload, Trace, TraceError, Word};

/// Registered `(contract, selector)` pairs that provide flash loans.
pub type ProviderSet = BTreeSet<CallStackEntry>;

/// Value bound to a quantified variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Address(Address),
    Selector(Selector),
    Word(Word),
}

impl Value {
    pub fn word(self) -> Word {
        match self {
            Value::Address(a) => a.0,
            Value::Selector(s) => u64::from(s.0),
            Value::Word(w) => w,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Env {
    pub bindings: BTreeMap<String, Value>,
    pub hook_arg: Option<Word>,
    pub hook_contract: Option<Address>,
    pub providers: Arc<ProviderSet>,
}

impl Env {
    pub fn with_providers(providers: Arc<ProviderSet>) -> Self {
        Self { providers, ..Self::default() }
    }

    /// Environment for checking at step `i`: the step's contract scopes the
    /// event sums and, for a hook step, its argument is `arg`.
    pub fn at_step(trace: &Trace, i: usize, providers: Arc<ProviderSet>) -> Result<Self, TraceError> {
        let step = trace.step(i)?;
        Ok(Self {
            bindings: BTreeMap::new(),
            hook_arg: step.hook().map(|(_, arg)| arg),
            hook_contract: Some(step.contract),
            providers,
        })
    }

    fn bind(&self, binder: &Binder, entry: CallStackEntry) -> Env {
        let mut env = self.clone();
        env.bindings.insert(binder.contract.clone(), Value::Address(entry.contract));
        env.bindings.insert(binder.selector.clone(), Value::Selector(entry.selector));
        env
    }

    fn lookup(&self, name: &str) -> Result<Value, EvalError> {
        self.bindings.get(name).copied().ok_or_else(|| EvalError::UnboundVariable(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}` during evaluation")]
    UnboundVariable(String),
    #[error("`arg` evaluated outside a hook context")]
    NoHookArg,
    #[error("event sums need a hook contract")]
    NoHookContract,
    #[error("temporal operator in a state formula: {0}")]
    NotStateFormula(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Truth of `f` at position `i`.
pub fn eval(f: &Formula, trace: &Trace, i: usize, env: &Env) -> Result<bool, EvalError> {
    trace.step(i)?;
    if !f.has_temporal() {
        return eval_state(f, trace, i, env, &trace.callstack_at(i)?);
    }
    let horizon = if f.has_future() { trace.len() } else { i + 1 };
    let mut evaluator = Evaluator::new(trace, horizon);
    Ok(evaluator.vector(f, env)?[i])
}

/// Truth of `f` at every position of the trace.
pub fn eval_all(f: &Formula, trace: &Trace, env: &Env) -> Result<Vec<bool>, EvalError> {
    if trace.is_empty() {
        return Ok(Vec::new());
    }
    Evaluator::new(trace, trace.len()).vector(f, env)
}

/// Value of `e` at position `i`.
pub fn eval_arith(e: &ArithExpr, trace: &Trace, i: usize, env: &Env) -> Result<Word, EvalError> {
    trace.step(i)?;
    arith_at(e, trace, i, env)
}

/// The quantifier domain at `i`: the frames open at that position.
pub fn quantifier_domain(trace: &Trace, i: usize) -> Result<Vec<CallStackEntry>, EvalError> {
    Ok(trace.callstack_at(i)?)
}

fn arith_at(e: &ArithExpr, trace: &Trace, i: usize, env: &Env) -> Result<Word, EvalError> {
    Ok(match e {
        ArithExpr::Const(n) => *n,
        ArithExpr::HookArg => env.hook_arg.ok_or(EvalError::NoHookArg)?,
        ArithExpr::SumDeposits => {
            trace.sum_events(i, EventKind::Deposit, env.hook_contract.ok_or(EvalError::NoHookContract)?)?
        }
        ArithExpr::SumWithdrawals => {
            trace.sum_events(i, EventKind::Withdrawal, env.hook_contract.ok_or(EvalError::NoHookContract)?)?
        }
        ArithExpr::Var(name) => env.lookup(name)?.word(),
        ArithExpr::RatioMul { num, den, expr } => {
            let x = arith_at(expr, trace, i, env)?;
            let scaled = u128::from(*num) * u128::from(x) / u128::from(*den);
            Word::try_from(scaled).unwrap_or(Word::MAX)
        }
        ArithExpr::Add(a, b) => arith_at(a, trace, i, env)?.saturating_add(arith_at(b, trace, i, env)?),
        ArithExpr::Sub(a, b) => arith_at(a, trace, i, env)?.saturating_sub(arith_at(b, trace, i, env)?),
    })
}

fn predicate_at(p: &Predicate, trace: &Trace, i: usize, env: &Env) -> Result<bool, EvalError> {
    let step = trace.step(i)?;
    Ok(match p {
        Predicate::True => true,
        Predicate::False => false,
        Predicate::EventIs(kind) => matches!(step.payload, StepPayload::Emit { event, .. } if event == *kind),
        Predicate::HookId(id) => matches!(step.payload, StepPayload::Hook { hook_id, .. } if hook_id == *id),
        Predicate::InFlashLoanProviders { contract, selector } => {
            let contract = Address(env.lookup(contract)?.word());
            let selector = Selector(env.lookup(selector)?.word() as u32);
            env.providers.contains(&CallStackEntry::new(contract, selector))
        }
        Predicate::VarEq(a, b) => env.lookup(a)?.word() == env.lookup(b)?.word(),
    })
}

/// Truth of a temporal-free formula at `i`, given the call stack open there.
pub(crate) fn eval_state(
    f: &Formula,
    trace: &Trace,
    i: usize,
    env: &Env,
    stack: &[CallStackEntry],
) -> Result<bool, EvalError> {
    use Formula::*;
    Ok(match f {
        Atom(p) => predicate_at(p, trace, i, env)?,
        Compare { op, lhs, rhs } => op.apply(arith_at(lhs, trace, i, env)?, arith_at(rhs, trace, i, env)?),
        Not(g) => !eval_state(g, trace, i, env, stack)?,
        And(a, b) => eval_state(a, trace, i, env, stack)? && eval_state(b, trace, i, env, stack)?,
        Or(a, b) => eval_state(a, trace, i, env, stack)? || eval_state(b, trace, i, env, stack)?,
        Implies(a, b) => !eval_state(a, trace, i, env, stack)? || eval_state(b, trace, i, env, stack)?,
        Forall { binder, body, .. } => {
            for entry in stack {
                if !eval_state(body, trace, i, &env.bind(binder, *entry), stack)? {
                    return Ok(false);
                }
            }
            true
        }
        Exists { binder, body, .. } => {
            for entry in stack {
                if eval_state(body, trace, i, &env.bind(binder, *entry), stack)? {
                    return Ok(true);
                }
            }
            false
        }
        ExistsPair { first, second, body, .. } => {
            for (p, a) in stack.iter().enumerate() {
                for (q, b) in stack.iter().enumerate() {
                    if p != q && eval_state(body, trace, i, &env.bind(first, *a).bind(second, *b), stack)? {
                        return Ok(true);
                    }
                }
            }
            false
        }
        _ => return Err(EvalError::NotStateFormula(super::pretty(f))),
    })
}

struct Evaluator<'t> {
    trace: &'t Trace,
    horizon: usize,
    stacks: Option<Vec<Vec<CallStackEntry>>>,
}

impl<'t> Evaluator<'t> {
    fn new(trace: &'t Trace, horizon: usize) -> Self {
        Self { trace, horizon, stacks: None }
    }

    fn stacks(&mut self) -> Result<&[Vec<CallStackEntry>], EvalError> {
        if self.stacks.is_none() {
            let mut out = Vec::with_capacity(self.horizon);
            let mut open: Vec<CallStackEntry> = Vec::new();
            for step in &self.trace.steps()[..self.horizon] {
                if step.kind() == StepKind::Call {
                    open.push(step.entry());
                }
                out.push(open.clone());
                if step.kind() == StepKind::Return && open.pop().is_none() {
                    return Err(TraceError::Malformed {
                        position: step.index,
                        reason: "return without open call".into(),
                    }
                    .into());
                }
            }
            self.stacks = Some(out);
        }
        Ok(self.stacks.as_deref().expect("just filled"))
    }

    fn pointwise(&self, f: impl Fn(usize) -> Result<bool, EvalError>) -> Result<Vec<bool>, EvalError> {
        (0..self.horizon).map(f).collect()
    }

    fn vector(&mut self, f: &Formula, env: &Env) -> Result<Vec<bool>, EvalError> {
        use Formula::*;
        let n = self.horizon;
        let trace = self.trace;
        Ok(match f {
            Atom(p) => self.pointwise(|k| predicate_at(p, trace, k, env))?,
            Compare { op, lhs, rhs } => {
                self.pointwise(|k| Ok(op.apply(arith_at(lhs, trace, k, env)?, arith_at(rhs, trace, k, env)?)))?
            }
            Not(g) => self.vector(g, env)?.into_iter().map(|b| !b).collect(),
            And(a, b) => zip(self.vector(a, env)?, self.vector(b, env)?, |x, y| x && y),
            Or(a, b) => zip(self.vector(a, env)?, self.vector(b, env)?, |x, y| x || y),
            Implies(a, b) => zip(self.vector(a, env)?, self.vector(b, env)?, |x, y| !x || y),
            Prev(g) => {
                let v = self.vector(g, env)?;
                (0..n).map(|k| k > 0 && v[k - 1]).collect()
            }
            Next(g) => {
                let v = self.vector(g, env)?;
                (0..n).map(|k| k + 1 < n && v[k + 1]).collect()
            }
            Since(a, b) => {
                let (phi, psi) = (self.vector(a, env)?, self.vector(b, env)?);
                let mut out = vec![false; n];
                for k in 0..n {
                    out[k] = psi[k] || (phi[k] && k > 0 && out[k - 1]);
                }
                out
            }
            Until(a, b) => {
                let (phi, psi) = (self.vector(a, env)?, self.vector(b, env)?);
                let mut out = vec![false; n];
                for k in (0..n).rev() {
                    out[k] = psi[k] || (phi[k] && k + 1 < n && out[k + 1]);
                }
                out
            }
            Once(g) => scan(self.vector(g, env)?, false, |acc, x| acc || x),
            Historically(g) => scan(self.vector(g, env)?, true, |acc, x| acc && x),
            Eventually(g) => rscan(self.vector(g, env)?, false, |acc, x| acc || x),
            Always(g) => rscan(self.vector(g, env)?, true, |acc, x| acc && x),
            Forall { .. } | Exists { .. } | ExistsPair { .. } if !f.has_temporal() => {
                let stacks = self.stacks()?;
                (0..n).map(|k| eval_state(f, trace, k, env, &stacks[k])).collect::<Result<_, _>>()?
            }
            Forall { binder, body, .. } => self.quantified(|stack, this, cache| {
                for entry in stack {
                    if !this.instance(body, env, &[(binder, *entry)], cache)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            })?,
            Exists { binder, body, .. } => self.quantified(|stack, this, cache| {
                for entry in stack {
                    if this.instance(body, env, &[(binder, *entry)], cache)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            })?,
            ExistsPair { first, second, body, .. } => self.quantified(|stack, this, cache| {
                for (p, a) in stack.iter().enumerate() {
                    for (q, b) in stack.iter().enumerate() {
                        if p != q && this.instance(body, env, &[(first, *a), (second, *b)], cache)? {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            })?,
        })
    }

    /// Evaluates a quantifier pointwise; `decide` sees the stack at each
    /// position and reads body vectors through a per-binding cache.
    fn quantified(
        &mut self,
        decide: impl Fn(&[CallStackEntry], &mut Self, &mut (usize, BodyCache)) -> Result<bool, EvalError>,
    ) -> Result<Vec<bool>, EvalError> {
        let stacks = self.stacks()?.to_vec();
        let mut cache = (0, BodyCache::new());
        let mut out = Vec::with_capacity(self.horizon);
        for (k, stack) in stacks.iter().enumerate() {
            cache.0 = k;
            out.push(decide(stack, self, &mut cache)?);
        }
        Ok(out)
    }

    fn instance(
        &mut self,
        body: &Formula,
        env: &Env,
        binding: &[(&Binder, CallStackEntry)],
        cache: &mut (usize, BodyCache),
    ) -> Result<bool, EvalError> {
        let key: Vec<CallStackEntry> = binding.iter().map(|(_, e)| *e).collect();
        if let Some(v) = cache.1.get(&key) {
            return Ok(v[cache.0]);
        }
        let mut inner = env.clone();
        for (binder, entry) in binding {
            inner = inner.bind(binder, *entry);
        }
        let v = self.vector(body, &inner)?;
        let result = v[cache.0];
        cache.1.insert(key, v);
        Ok(result)
    }
}

type BodyCache = HashMap<Vec<CallStackEntry>, Vec<bool>>;

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

fn scan(v: Vec<bool>, init: bool, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    let mut acc = init;
    v.into_iter()
        .map(|x| {
            acc = op(acc, x);
            acc
        })
        .collect()
}

fn rscan(v: Vec<bool>, init: bool, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    let mut out = v;
    let mut acc = init;
    for x in out.iter_mut().rev() {
        acc = op(acc, *x);
        *x = acc;
    }
    out
}

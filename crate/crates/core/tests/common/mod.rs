//! Generators and independent reference implementations shared by the
//! integration tests. Nothing here calls into the evaluator, monitor or
//! detectors under test.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tracehook_core::pltl::{ArithExpr, Binder, CmpOp, Domain, Formula, Predicate};
use tracehook_core::{Address, EventKind, Selector, StepPayload, Trace, TraceStep, Word};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const ORIGIN: u64 = 0x1;
pub const CONTRACTS: [u64; 4] = [0xA, 0xB, 0xC, 0xF];
pub const PROVIDER: (u64, u32) = (0xF, 1);

pub fn providers() -> BTreeSet<(u64, u32)> {
    [PROVIDER].into()
}

// ---------------------------------------------------------------- traces

/// Random trace of exactly `len` steps (at least 1). The root frame is
/// `(ORIGIN, 0)`; frames may be left open unless `balanced`, in which case
/// returns are appended after `len` steps to close them.
pub fn gen_trace(rng: &mut impl Rng, len: usize, balanced: bool) -> Trace {
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut stack: Vec<(u64, u32)> = Vec::new();
    let push = |steps: &mut Vec<TraceStep>, depth: usize, (c, s): (u64, u32), payload: StepPayload| {
        steps.push(TraceStep { index: steps.len(), depth, contract: Address(c), selector: Selector(s), payload });
    };
    push(&mut steps, 0, (ORIGIN, 0), StepPayload::Call { caller: Address(ORIGIN), value: 0, arg: 0 });
    stack.push((ORIGIN, 0));

    while steps.len() < len {
        let top = *stack.last().expect("root stays open");
        let depth = stack.len() - 1;
        let roll = rng.gen_range(0..10);
        match roll {
            0..=2 if stack.len() < 6 => {
                let entry = (*CONTRACTS.choose(rng).unwrap(), rng.gen_range(0..3));
                let caller = Address(top.0);
                push(&mut steps, depth + 1, entry, StepPayload::Call { caller, value: rng.gen_range(0..5), arg: 0 });
                stack.push(entry);
            }
            3..=4 if stack.len() > 1 => {
                push(&mut steps, depth, top, StepPayload::Return { success: rng.gen_bool(0.8), value: 0 });
                stack.pop();
            }
            5..=6 => {
                let event = [EventKind::Deposit, EventKind::Withdrawal, EventKind::TokenTransfer]
                    .choose(rng)
                    .copied()
                    .unwrap();
                push(&mut steps, depth, top, StepPayload::Emit { event, amount: rng.gen_range(0..100) });
            }
            7..=8 => {
                push(&mut steps, depth, top, StepPayload::Hook { hook_id: rng.gen_range(0..3), arg: rng.gen_range(0..100) });
            }
            _ => {
                let key = rng.gen_range(0..4);
                push(&mut steps, depth, top, StepPayload::Store { key, old: 0, new: rng.gen_range(0..10) });
            }
        }
    }
    if balanced {
        while let Some(top) = stack.pop() {
            push(&mut steps, stack.len(), top, StepPayload::Return { success: true, value: 0 });
        }
    }
    let mut trace = Trace::new();
    for s in steps {
        trace.append_step(s).expect("generated steps are dense");
    }
    trace
}

/// Frames open at each step, replayed from scratch. A return step still
/// counts the frame it closes.
pub fn replay_stacks(trace: &Trace) -> Vec<Vec<(u64, u32)>> {
    let mut out = Vec::with_capacity(trace.len());
    let mut stack: Vec<(u64, u32)> = Vec::new();
    for step in trace.steps() {
        if matches!(step.payload, StepPayload::Call { .. }) {
            stack.push((step.contract.0, step.selector.0));
        }
        out.push(stack.clone());
        if matches!(step.payload, StepPayload::Return { .. }) {
            stack.pop();
        }
    }
    out
}

// ---------------------------------------------------------------- formulas

#[derive(Clone, Copy, Debug)]
pub struct FormulaOpts {
    pub future: bool,
    pub past: bool,
    pub quantifiers: bool,
    pub arith: bool,
    /// Quantifier bodies stay temporal-free (the monitorable shape).
    pub flat_bodies: bool,
}

impl FormulaOpts {
    pub const PAST: FormulaOpts =
        FormulaOpts { future: false, past: true, quantifiers: true, arith: true, flat_bodies: false };
    pub const FULL: FormulaOpts =
        FormulaOpts { future: true, past: true, quantifiers: true, arith: true, flat_bodies: false };
    pub const MONITOR: FormulaOpts =
        FormulaOpts { future: false, past: true, quantifiers: true, arith: false, flat_bodies: true };
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    opts: FormulaOpts,
    scope: Vec<(String, String)>,
    fresh: usize,
}

/// The three propositional atoms used by the random suites.
pub fn atoms() -> [Formula; 3] {
    [
        Formula::Atom(Predicate::EventIs(EventKind::Deposit)),
        Formula::Atom(Predicate::EventIs(EventKind::Withdrawal)),
        Formula::Atom(Predicate::HookId(1)),
    ]
}

pub fn gen_formula(rng: &mut impl Rng, depth: usize, opts: FormulaOpts) -> Formula {
    let mut g = Gen { rng, opts, scope: Vec::new(), fresh: 0 };
    g.formula(depth)
}

impl<R: Rng> Gen<'_, R> {
    fn leaf(&mut self) -> Formula {
        let mut choices = 5;
        if !self.scope.is_empty() {
            choices += 2;
        }
        match self.rng.gen_range(0..choices) {
            0..=2 => atoms()[self.rng.gen_range(0..3)].clone(),
            3 => {
                if self.opts.arith {
                    self.compare()
                } else if self.rng.gen_bool(0.5) {
                    Formula::tt()
                } else {
                    Formula::ff()
                }
            }
            4 => atoms()[self.rng.gen_range(0..3)].clone(),
            5 => {
                let (c, s) = self.scope.choose(self.rng).unwrap().clone();
                Formula::Atom(Predicate::InFlashLoanProviders { contract: c, selector: s })
            }
            _ => {
                let vars: Vec<String> = self.scope.iter().flat_map(|(c, s)| [c.clone(), s.clone()]).collect();
                let a = vars.choose(self.rng).unwrap().clone();
                let b = vars.choose(self.rng).unwrap().clone();
                Formula::Atom(Predicate::VarEq(a, b))
            }
        }
    }

    fn compare(&mut self) -> Formula {
        let op = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt][self.rng.gen_range(0..6)];
        let lhs = match self.rng.gen_range(0..3) {
            0 => ArithExpr::SumDeposits,
            1 => ArithExpr::Sub(Box::new(ArithExpr::SumDeposits), Box::new(ArithExpr::SumWithdrawals)),
            _ => ArithExpr::RatioMul {
                num: self.rng.gen_range(0..4),
                den: self.rng.gen_range(1..4),
                expr: Box::new(ArithExpr::Add(Box::new(ArithExpr::SumWithdrawals), Box::new(ArithExpr::Const(3)))),
            },
        };
        Formula::Compare { op, lhs, rhs: ArithExpr::Const(self.rng.gen_range(0..150)) }
    }

    fn fresh_binder(&mut self) -> Binder {
        let n = self.fresh;
        self.fresh += 1;
        Binder::new(format!("c{n}"), format!("s{n}"))
    }

    fn formula(&mut self, depth: usize) -> Formula {
        if depth == 0 {
            return self.leaf();
        }
        let d = depth - 1;
        let mut kinds = vec![0, 1, 2, 3, 4];
        if self.opts.past {
            kinds.extend([5, 6, 7, 8]);
        }
        if self.opts.future {
            kinds.extend([9, 10, 11, 12]);
        }
        if self.opts.quantifiers {
            kinds.extend([13, 14, 15]);
        }
        match *kinds.choose(self.rng).unwrap() {
            0 => self.leaf(),
            1 => Formula::not(self.formula(d)),
            2 => Formula::and(self.formula(d), self.formula(d)),
            3 => Formula::or(self.formula(d), self.formula(d)),
            4 => Formula::implies(self.formula(d), self.formula(d)),
            5 => Formula::prev(self.formula(d)),
            6 => Formula::since(self.formula(d), self.formula(d)),
            7 => Formula::once(self.formula(d)),
            8 => Formula::historically(self.formula(d)),
            9 => Formula::next(self.formula(d)),
            10 => Formula::until(self.formula(d), self.formula(d)),
            11 => Formula::eventually(self.formula(d)),
            12 => Formula::always(self.formula(d)),
            k => {
                let first = self.fresh_binder();
                let second = (k == 15).then(|| self.fresh_binder());
                self.scope.push((first.contract.clone(), first.selector.clone()));
                if let Some(b) = &second {
                    self.scope.push((b.contract.clone(), b.selector.clone()));
                }
                let body = if self.opts.flat_bodies {
                    let saved = self.opts;
                    self.opts.past = false;
                    self.opts.future = false;
                    let body = self.formula(d);
                    self.opts = saved;
                    body
                } else {
                    self.formula(d)
                };
                self.scope.truncate(self.scope.len() - if second.is_some() { 2 } else { 1 });
                let body = Box::new(body);
                match (k, second) {
                    (13, _) => Formula::Forall { binder: first, domain: Domain::CallStack, body },
                    (14, _) => Formula::Exists { binder: first, domain: Domain::CallStack, body },
                    (_, Some(second)) => Formula::ExistsPair { first, second, domain: Domain::CallStack, body },
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Any AST the grammar can produce, for printer/parser round trips.
pub fn gen_any_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    let mut g = Gen { rng, opts: FormulaOpts::FULL, scope: Vec::new(), fresh: 0 };
    g.any(depth)
}

impl<R: Rng> Gen<'_, R> {
    fn any_arith(&mut self, depth: usize) -> ArithExpr {
        let vars: Vec<String> = self.scope.iter().flat_map(|(c, s)| [c.clone(), s.clone()]).collect();
        let leaf = depth == 0 || self.rng.gen_bool(0.3);
        if leaf {
            return match self.rng.gen_range(0..5) {
                0 => ArithExpr::Const(if self.rng.gen_bool(0.1) { u64::MAX } else { self.rng.gen_range(0..1000) }),
                1 => ArithExpr::HookArg,
                2 => ArithExpr::SumDeposits,
                3 => ArithExpr::SumWithdrawals,
                _ => match vars.choose(self.rng) {
                    Some(v) => ArithExpr::Var(v.clone()),
                    None => ArithExpr::Const(7),
                },
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..3) {
            0 => ArithExpr::Add(Box::new(self.any_arith(d)), Box::new(self.any_arith(d))),
            1 => ArithExpr::Sub(Box::new(self.any_arith(d)), Box::new(self.any_arith(d))),
            _ => ArithExpr::RatioMul {
                num: self.rng.gen_range(0..10),
                den: self.rng.gen_range(1..10),
                expr: Box::new(self.any_arith(d)),
            },
        }
    }

    fn any_leaf(&mut self) -> Formula {
        let vars: Vec<String> = self.scope.iter().flat_map(|(c, s)| [c.clone(), s.clone()]).collect();
        match self.rng.gen_range(0..7) {
            0 => Formula::tt(),
            1 => Formula::ff(),
            2 => Formula::Atom(Predicate::EventIs(EventKind::from_code(self.rng.gen()))),
            3 => Formula::Atom(Predicate::HookId(self.rng.gen())),
            4 if !self.scope.is_empty() => {
                let (c, s) = self.scope.choose(self.rng).unwrap().clone();
                Formula::Atom(Predicate::InFlashLoanProviders { contract: c, selector: s })
            }
            5 if !vars.is_empty() => {
                let eq = Formula::Atom(Predicate::VarEq(
                    vars.choose(self.rng).unwrap().clone(),
                    vars.choose(self.rng).unwrap().clone(),
                ));
                if self.rng.gen_bool(0.3) {
                    Formula::not(eq)
                } else {
                    eq
                }
            }
            _ => {
                let op = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt][self.rng.gen_range(0..6)];
                let lhs = self.any_arith(2);
                let rhs = self.any_arith(2);
                Formula::Compare { op, lhs, rhs }
            }
        }
    }

    fn any(&mut self, depth: usize) -> Formula {
        if depth == 0 {
            return self.any_leaf();
        }
        let d = depth - 1;
        match self.rng.gen_range(0..16) {
            0 => self.any_leaf(),
            1 => Formula::not(self.any(d)),
            2 => Formula::and(self.any(d), self.any(d)),
            3 => Formula::or(self.any(d), self.any(d)),
            4 => Formula::implies(self.any(d), self.any(d)),
            5 => Formula::prev(self.any(d)),
            6 => Formula::since(self.any(d), self.any(d)),
            7 => Formula::once(self.any(d)),
            8 => Formula::historically(self.any(d)),
            9 => Formula::next(self.any(d)),
            10 => Formula::until(self.any(d), self.any(d)),
            11 => Formula::eventually(self.any(d)),
            12 => Formula::always(self.any(d)),
            k => {
                let first = self.fresh_binder();
                let second = (k == 15).then(|| self.fresh_binder());
                let pushed = 1 + second.is_some() as usize;
                self.scope.push((first.contract.clone(), first.selector.clone()));
                if let Some(b) = &second {
                    self.scope.push((b.contract.clone(), b.selector.clone()));
                }
                let body = Box::new(self.any(d));
                self.scope.truncate(self.scope.len() - pushed);
                match (k, second) {
                    (13, _) => Formula::Forall { binder: first, domain: Domain::CallStack, body },
                    (14, _) => Formula::Exists { binder: first, domain: Domain::CallStack, body },
                    (_, Some(second)) => Formula::ExistsPair { first, second, domain: Domain::CallStack, body },
                    _ => unreachable!(),
                }
            }
        }
    }
}

pub fn formula_depth(f: &Formula) -> usize {
    use Formula::*;
    match f {
        Atom(_) | Compare { .. } => 0,
        Not(a) | Next(a) | Prev(a) | Eventually(a) | Always(a) | Once(a) | Historically(a) => 1 + formula_depth(a),
        And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Since(a, b) => 1 + formula_depth(a).max(formula_depth(b)),
        Forall { body, .. } | Exists { body, .. } | ExistsPair { body, .. } => 1 + formula_depth(body),
    }
}

// ---------------------------------------------------------------- oracle

/// Context for the reference semantics at one query.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub providers: BTreeSet<(u64, u32)>,
    pub hook_arg: Option<Word>,
    pub contract: u64,
}

impl Ctx {
    /// The context used when checking at step `i`.
    pub fn at(trace: &Trace, i: usize, providers: BTreeSet<(u64, u32)>) -> Ctx {
        let step = &trace.steps()[i];
        let hook_arg = match step.payload {
            StepPayload::Hook { arg, .. } => Some(arg),
            _ => None,
        };
        Ctx { providers, hook_arg, contract: step.contract.0 }
    }
}

/// Truth of `f` at `i`, read straight off the definitions: one recursive
/// call per quantified position, no memoization.
pub fn oracle(f: &Formula, trace: &Trace, i: usize, ctx: &Ctx) -> bool {
    let stacks = replay_stacks(trace);
    holds(f, trace, &stacks, i, ctx, &HashMap::new())
}

fn sum(trace: &Trace, i: usize, kind: EventKind, contract: u64) -> Word {
    let total: u128 = trace.steps()[..=i]
        .iter()
        .filter(|s| s.contract.0 == contract)
        .filter_map(|s| match s.payload {
            StepPayload::Emit { event, amount } if event == kind => Some(u128::from(amount)),
            _ => None,
        })
        .sum();
    total.min(u128::from(Word::MAX)) as Word
}

fn arith(e: &ArithExpr, trace: &Trace, i: usize, ctx: &Ctx, vars: &HashMap<String, u64>) -> Word {
    match e {
        ArithExpr::Const(n) => *n,
        ArithExpr::HookArg => ctx.hook_arg.expect("arg only at hooks"),
        ArithExpr::SumDeposits => sum(trace, i, EventKind::Deposit, ctx.contract),
        ArithExpr::SumWithdrawals => sum(trace, i, EventKind::Withdrawal, ctx.contract),
        ArithExpr::Var(v) => vars[v],
        ArithExpr::RatioMul { num, den, expr } => {
            let x = u128::from(arith(expr, trace, i, ctx, vars));
            (u128::from(*num) * x / u128::from(*den)).min(u128::from(Word::MAX)) as Word
        }
        ArithExpr::Add(a, b) => {
            let s = u128::from(arith(a, trace, i, ctx, vars)) + u128::from(arith(b, trace, i, ctx, vars));
            s.min(u128::from(Word::MAX)) as Word
        }
        ArithExpr::Sub(a, b) => {
            let (x, y) = (arith(a, trace, i, ctx, vars), arith(b, trace, i, ctx, vars));
            x.saturating_sub(y)
        }
    }
}

fn holds(
    f: &Formula,
    trace: &Trace,
    stacks: &[Vec<(u64, u32)>],
    i: usize,
    ctx: &Ctx,
    vars: &HashMap<String, u64>,
) -> bool {
    let n = trace.len();
    let at = |g: &Formula, j: usize| holds(g, trace, stacks, j, ctx, vars);
    match f {
        Formula::Atom(p) => {
            let step = &trace.steps()[i];
            match p {
                Predicate::True => true,
                Predicate::False => false,
                Predicate::EventIs(k) => matches!(step.payload, StepPayload::Emit { event, .. } if event == *k),
                Predicate::HookId(id) => matches!(step.payload, StepPayload::Hook { hook_id, .. } if hook_id == *id),
                Predicate::InFlashLoanProviders { contract, selector } => {
                    ctx.providers.contains(&(vars[contract], vars[selector] as u32))
                }
                Predicate::VarEq(a, b) => vars[a] == vars[b],
            }
        }
        Formula::Not(a) => !at(a, i),
        Formula::And(a, b) => at(a, i) && at(b, i),
        Formula::Or(a, b) => at(a, i) || at(b, i),
        Formula::Implies(a, b) => !at(a, i) || at(b, i),
        Formula::Prev(a) => i >= 1 && at(a, i - 1),
        Formula::Since(a, b) => (0..=i).any(|k| at(b, k) && (k + 1..=i).all(|j| at(a, j))),
        Formula::Once(a) => (0..=i).any(|k| at(a, k)),
        Formula::Historically(a) => (0..=i).all(|k| at(a, k)),
        Formula::Next(a) => i + 1 < n && at(a, i + 1),
        Formula::Until(a, b) => (i..n).any(|k| at(b, k) && (i..k).all(|j| at(a, j))),
        Formula::Eventually(a) => (i..n).any(|k| at(a, k)),
        Formula::Always(a) => (i..n).all(|k| at(a, k)),
        Formula::Forall { binder, body, .. } | Formula::Exists { binder, body, .. } => {
            let mut results = stacks[i].iter().map(|&(c, s)| {
                let mut v = vars.clone();
                v.insert(binder.contract.clone(), c);
                v.insert(binder.selector.clone(), u64::from(s));
                holds(body, trace, stacks, i, ctx, &v)
            });
            if matches!(f, Formula::Forall { .. }) {
                results.all(|r| r)
            } else {
                results.any(|r| r)
            }
        }
        Formula::ExistsPair { first, second, body, .. } => {
            let stack = &stacks[i];
            (0..stack.len()).any(|p| {
                (0..stack.len()).filter(|&q| q != p).any(|q| {
                    let mut v = vars.clone();
                    v.insert(first.contract.clone(), stack[p].0);
                    v.insert(first.selector.clone(), u64::from(stack[p].1));
                    v.insert(second.contract.clone(), stack[q].0);
                    v.insert(second.selector.clone(), u64::from(stack[q].1));
                    holds(body, trace, stacks, i, ctx, &v)
                })
            })
        }
        Formula::Compare { op, lhs, rhs } => {
            let (x, y) = (arith(lhs, trace, i, ctx, vars), arith(rhs, trace, i, ctx, vars));
            match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                CmpOp::Ge => x >= y,
                CmpOp::Gt => x > y,
            }
        }
    }
}

// ---------------------------------------------------------------- detector scans

/// Some stack at a step up to `i` holds a registered provider.
pub fn provider_seen(trace: &Trace, i: usize, providers: &BTreeSet<(u64, u32)>) -> bool {
    replay_stacks(trace)[..=i].iter().any(|stack| stack.iter().any(|e| providers.contains(e)))
}

/// Some stack at a step up to `i` holds the same entry twice.
pub fn duplicate_seen(trace: &Trace, i: usize) -> bool {
    replay_stacks(trace)[..=i]
        .iter()
        .any(|stack| (0..stack.len()).any(|a| (a + 1..stack.len()).any(|b| stack[a] == stack[b])))
}

pub mod programs;
pub mod dforce;

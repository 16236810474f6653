//! Incremental monitor for the past-time fragment.
//!
//! The formula is flattened into its subformulas in post-order; each step
//! computes a fresh truth vector from the current step and the previous
//! vector:
//!
//! - `Y f`     : `prev[f]`
//! - `f S g`   : `now[g] || (now[f] && prev[f S g])`
//! - `O f`     : `now[f] || prev[O f]`
//! - `H f`     : `now[f] && (first step || prev[H f])`
//!
//! Temporal-free subtrees, including quantifiers with temporal-free bodies,
//! are leaves evaluated directly against the current call stack.

use thiserror::Error;

use super::ast::Formula;
use super::eval::{eval_state, Env, EvalError};
use super::pretty;
use crate::trace::{CallStackEntry, StepKind, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("formula outside the monitorable fragment: {subformula}")]
    UnsupportedFragment { subformula: String },
    #[error("monitor at position {expected:?} cannot step to {got}")]
    PositionSkew { expected: usize, got: usize },
    #[error("return without open frame at step {0}")]
    Nesting(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Formula),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Prev(usize),
    Since(usize, usize),
    Once(usize),
    Historically(usize),
}

#[derive(Debug, Clone)]
pub struct MonitorState {
    formula: Formula,
    env: Env,
    nodes: Vec<Node>,
    prev: Vec<bool>,
    position: Option<usize>,
    stack: Vec<CallStackEntry>,
}

/// Builds a monitor for `f` with an empty environment.
pub fn monitor_new(f: &Formula) -> Result<MonitorState, MonitorError> {
    MonitorState::new(f, Env::default())
}

/// Advances `m` over step `i`, returning the verdict at `i`.
pub fn monitor_step(m: MonitorState, trace: &Trace, i: usize) -> Result<(MonitorState, bool), MonitorError> {
    let mut m = m;
    let verdict = m.step(trace, i)?;
    Ok((m, verdict))
}

impl MonitorState {
    pub fn new(f: &Formula, env: Env) -> Result<Self, MonitorError> {
        let mut nodes = Vec::new();
        flatten(f, &mut nodes)?;
        let prev = vec![false; nodes.len()];
        Ok(Self { formula: f.clone(), env, nodes, prev, position: None, stack: Vec::new() })
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    /// Last evaluated position, if any.
    pub fn position(&self) -> Option<usize> {
        self.position
    }

    /// Number of subformula slots in the truth vector.
    pub fn width(&self) -> usize {
        self.nodes.len()
    }

    pub fn step(&mut self, trace: &Trace, i: usize) -> Result<bool, MonitorError> {
        let expected = self.position.map_or(0, |p| p + 1);
        if i != expected {
            return Err(MonitorError::PositionSkew { expected, got: i });
        }
        let step = trace.step(i).map_err(EvalError::from)?;
        if step.kind() == StepKind::Call {
            self.stack.push(step.entry());
        }

        let first = self.position.is_none();
        let mut now = vec![false; self.nodes.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            now[idx] = match node {
                Node::Leaf(f) => eval_state(f, trace, i, &self.env, &self.stack)?,
                Node::Not(a) => !now[*a],
                Node::And(a, b) => now[*a] && now[*b],
                Node::Or(a, b) => now[*a] || now[*b],
                Node::Implies(a, b) => !now[*a] || now[*b],
                Node::Prev(a) => !first && self.prev[*a],
                Node::Since(a, b) => now[*b] || (now[*a] && !first && self.prev[idx]),
                Node::Once(a) => now[*a] || (!first && self.prev[idx]),
                Node::Historically(a) => now[*a] && (first || self.prev[idx]),
            };
        }

        if step.kind() == StepKind::Return && self.stack.pop().is_none() {
            return Err(MonitorError::Nesting(i));
        }
        let verdict = *now.last().expect("at least one node");
        self.prev = now;
        self.position = Some(i);
        Ok(verdict)
    }
}

/// Pushes `f`'s nodes in post-order and returns the index of its root.
fn flatten(f: &Formula, nodes: &mut Vec<Node>) -> Result<usize, MonitorError> {
    use Formula::*;
    if f.is_future_op() {
        return Err(MonitorError::UnsupportedFragment { subformula: pretty(f) });
    }
    if !f.has_temporal() {
        nodes.push(Node::Leaf(f.clone()));
        return Ok(nodes.len() - 1);
    }
    let node = match f {
        Not(a) => Node::Not(flatten(a, nodes)?),
        And(a, b) => {
            let (a, b) = (flatten(a, nodes)?, flatten(b, nodes)?);
            Node::And(a, b)
        }
        Or(a, b) => {
            let (a, b) = (flatten(a, nodes)?, flatten(b, nodes)?);
            Node::Or(a, b)
        }
        Implies(a, b) => {
            let (a, b) = (flatten(a, nodes)?, flatten(b, nodes)?);
            Node::Implies(a, b)
        }
        Since(a, b) => {
            let (a, b) = (flatten(a, nodes)?, flatten(b, nodes)?);
            Node::Since(a, b)
        }
        Prev(a) => Node::Prev(flatten(a, nodes)?),
        Once(a) => Node::Once(flatten(a, nodes)?),
        Historically(a) => Node::Historically(flatten(a, nodes)?),
        // quantifier over a temporal body, or a future operator further down
        _ => {
            let culprit = f.find(&|g| g.is_future_op()).unwrap_or(f);
            return Err(MonitorError::UnsupportedFragment { subformula: pretty(culprit) });
        }
    };
    nodes.push(node);
    Ok(nodes.len() - 1)
}

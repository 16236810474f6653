use std::sync::Arc;

use thiserror::Error;

use super::ast::{Formula, PropertySet};
use super::eval::{eval, Env, EvalError, ProviderSet};
use super::pretty;
use crate::trace::{StepKind, Trace, TraceError};

/// Outcome of checking the properties bound to one hook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Violation { property: String, position: usize, formula_text: String },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("property `{0}` uses future operators, which are not evaluable at hooks")]
    FutureOperatorAtHook(String),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("step {0} is not a hook")]
    NotAHook(usize),
    #[error("property `{property}`: {source}")]
    Eval { property: String, source: EvalError },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Resolves and vets `bound` against `props`: every name must exist and be free of future operators.
pub fn resolve_bound<'p, S: AsRef<str>>(
    props: &'p PropertySet,
    bound: &[S],
) -> Result<Vec<(&'p str, &'p Formula)>, CheckError> {
    let mut out = Vec::with_capacity(bound.len());
    for name in bound {
        let name = name.as_ref();
        let (key, formula) = props
            .iter()
            .find(|(k, _)| *k == name)
            .ok_or_else(|| CheckError::UnknownProperty(name.to_string()))?;
        if formula.has_future() {
            return Err(CheckError::FutureOperatorAtHook(name.to_string()));
        }
        out.push((key, formula));
    }
    Ok(out)
}

/// Evaluates the bound properties in order at `hook_step`, stopping after
/// the first violation. Returns the verdict of every property evaluated.
pub fn check_each<S: AsRef<str>>(
    props: &PropertySet,
    bound: &[S],
    trace: &Trace,
    hook_step: usize,
    providers: &Arc<ProviderSet>,
) -> Result<Vec<(String, Verdict)>, CheckError> {
    if trace.step(hook_step)?.kind() != StepKind::Hook {
        return Err(CheckError::NotAHook(hook_step));
    }
    let resolved = resolve_bound(props, bound)?;
    let env = Env::at_step(trace, hook_step, providers.clone())?;
    let mut out = Vec::with_capacity(resolved.len());
    for (name, formula) in resolved {
        let holds = eval(formula, trace, hook_step, &env)
            .map_err(|source| CheckError::Eval { property: name.to_string(), source })?;
        let verdict = if holds {
            Verdict::Pass
        } else {
            Verdict::Violation { property: name.to_string(), position: hook_step, formula_text: pretty(formula) }
        };
        let stop = !verdict.is_pass();
        out.push((name.to_string(), verdict));
        if stop {
            break;
        }
    }
    Ok(out)
}

/// First violation among the bound properties at `hook_step`, else `Pass`.
pub fn check_at_hook<S: AsRef<str>>(
    props: &PropertySet,
    bound: &[S],
    trace: &Trace,
    hook_step: usize,
    providers: &Arc<ProviderSet>,
) -> Result<Verdict, CheckError> {
    Ok(check_each(props, bound, trace, hook_step, providers)?
        .into_iter()
        .map(|(_, v)| v)
        .find(|v| !v.is_pass())
        .unwrap_or(Verdict::Pass))
}

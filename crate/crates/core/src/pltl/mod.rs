//! Quantified past-time temporal logic over transaction traces.
//!
//! Property files contain `property <name> { <formula> }` blocks; see
//! `docs/grammar.md` for the full grammar.

mod ast;
mod check;
mod error;
mod eval;
mod lexer;
mod monitor;
mod parser;
mod pretty;

pub use ast::{ArithExpr, Binder, CmpOp, Domain, Formula, Predicate, PropertySet};
pub use check::{check_at_hook, check_each, resolve_bound, CheckError, Verdict};
pub use error::{ParseError, ParseErrorKind, Pos};
pub use eval::{eval, eval_all, eval_arith, quantifier_domain, Env, EvalError, ProviderSet, Value};
pub use lexer::{tokenize, Tok, Token};
pub use monitor::{monitor_new, monitor_step, MonitorError, MonitorState};
pub use parser::{parse_formula, parse_properties, MAX_NESTING};
pub use pretty::{pretty, pretty_arith};

use std::fmt::Write;

use super::ast::{ArithExpr, Binder, CmpOp, Formula, Predicate};

/// Canonical, fully parenthesised text for `f`. Parsing the result yields `f` again.
pub fn pretty(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f);
    out
}

pub fn pretty_arith(e: &ArithExpr) -> String {
    let mut out = String::new();
    write_arith(&mut out, e);
    out
}

fn binder(b: &Binder) -> String {
    format!("({},{})", b.contract, b.selector)
}

fn write_formula(out: &mut String, f: &Formula) {
    use Formula::*;
    let unary = |out: &mut String, op: &str, g: &Formula| {
        write!(out, "({op} ").unwrap();
        write_formula(out, g);
        out.push(')');
    };
    let binary = |out: &mut String, op: &str, a: &Formula, b: &Formula| {
        out.push('(');
        write_formula(out, a);
        write!(out, " {op} ").unwrap();
        write_formula(out, b);
        out.push(')');
    };
    match f {
        Atom(p) => write_predicate(out, p),
        Not(g) => unary(out, "not", g),
        Next(g) => unary(out, "X", g),
        Prev(g) => unary(out, "Y", g),
        Eventually(g) => unary(out, "F", g),
        Always(g) => unary(out, "G", g),
        Once(g) => unary(out, "O", g),
        Historically(g) => unary(out, "H", g),
        And(a, b) => binary(out, "and", a, b),
        Or(a, b) => binary(out, "or", a, b),
        Implies(a, b) => binary(out, "->", a, b),
        Until(a, b) => binary(out, "U", a, b),
        Since(a, b) => binary(out, "S", a, b),
        Forall { binder: b, body, .. } => {
            write!(out, "(forall {} in callstack : ", binder(b)).unwrap();
            write_formula(out, body);
            out.push(')');
        }
        Exists { binder: b, body, .. } => {
            write!(out, "(exists {} in callstack : ", binder(b)).unwrap();
            write_formula(out, body);
            out.push(')');
        }
        ExistsPair { first, second, body, .. } => {
            write!(out, "(exists_pair ({},{}) in callstack : ", binder(first), binder(second)).unwrap();
            write_formula(out, body);
            out.push(')');
        }
        Compare { op, lhs, rhs } => {
            out.push('(');
            // `a == b` on two bare variables reads back as a variable equality atom
            let bare_vars = matches!((lhs, rhs), (ArithExpr::Var(_), ArithExpr::Var(_)));
            if bare_vars && matches!(op, CmpOp::Eq | CmpOp::Ne) {
                out.push('(');
                write_arith(out, lhs);
                out.push(')');
            } else {
                write_arith(out, lhs);
            }
            write!(out, " {} ", op.symbol()).unwrap();
            write_arith(out, rhs);
            out.push(')');
        }
    }
}

fn write_predicate(out: &mut String, p: &Predicate) {
    match p {
        Predicate::True => out.push_str("true"),
        Predicate::False => out.push_str("false"),
        Predicate::EventIs(kind) => write!(out, "event({kind})").unwrap(),
        Predicate::InFlashLoanProviders { contract, selector } => {
            write!(out, "inflashloan({contract},{selector})").unwrap()
        }
        Predicate::VarEq(a, b) => write!(out, "({a} == {b})").unwrap(),
        Predicate::HookId(id) => write!(out, "hookid({id})").unwrap(),
    }
}

fn write_arith(out: &mut String, e: &ArithExpr) {
    match e {
        ArithExpr::Const(n) => write!(out, "{n}").unwrap(),
        ArithExpr::HookArg => out.push_str("arg"),
        ArithExpr::SumDeposits => out.push_str("sum(deposits)"),
        ArithExpr::SumWithdrawals => out.push_str("sum(withdrawals)"),
        ArithExpr::Var(v) => out.push_str(v),
        ArithExpr::RatioMul { num, den, expr } => {
            write!(out, "ratio({num}, {den}, ").unwrap();
            write_arith(out, expr);
            out.push(')');
        }
        ArithExpr::Add(a, b) | ArithExpr::Sub(a, b) => {
            let op = if matches!(e, ArithExpr::Add(..)) { '+' } else { '-' };
            out.push('(');
            write_arith(out, a);
            write!(out, " {op} ").unwrap();
            write_arith(out, b);
            out.push(')');
        }
    }
}

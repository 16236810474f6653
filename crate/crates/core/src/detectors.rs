//! Built-in trace properties: flash-loan use, re-entrancy and abrupt TVL change.
//!
//! The flash-loan and re-entrancy built-ins forbid the bad situation having
//! *ever* held on the call stack (`not O (exists ... bad)`). The
//! `*_literal` constructors give the alternative `not O (forall ... not bad)`
//! reading for comparison; they are not used for enforcement.

use thiserror::Error;

use crate::pltl::{ArithExpr, Binder, CmpOp, Domain, Formula, Predicate};
use crate::trace::Word;

pub const FLASHLOAN: &str = "builtin.flashloan";
pub const REENTRANCY: &str = "builtin.reentrancy";
pub const TVL: &str = "builtin.tvl";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectorError {
    #[error("tvl threshold denominator must be positive")]
    ZeroDenominator,
    #[error("malformed built-in reference `{0}`")]
    Malformed(String),
}

fn flashloan_atom() -> Formula {
    Formula::Atom(Predicate::InFlashLoanProviders { contract: "c".into(), selector: "s".into() })
}

fn duplicate_entry() -> Formula {
    Formula::and(
        Formula::Atom(Predicate::VarEq("c1".into(), "c2".into())),
        Formula::Atom(Predicate::VarEq("s1".into(), "s2".into())),
    )
}

fn some_pair(body: Formula) -> Formula {
    Formula::ExistsPair {
        first: Binder::new("c1", "s1"),
        second: Binder::new("c2", "s2"),
        domain: Domain::CallStack,
        body: Box::new(body),
    }
}

/// No registered flash-loan provider has been on the call stack so far.
pub fn builtin_flashloan() -> Formula {
    Formula::not(Formula::once(Formula::Exists {
        binder: Binder::new("c", "s"),
        domain: Domain::CallStack,
        body: Box::new(flashloan_atom()),
    }))
}

/// No `(contract, selector)` pair has been open twice at once so far.
pub fn builtin_reentrancy() -> Formula {
    Formula::not(Formula::once(some_pair(duplicate_entry())))
}

/// The hook argument stays below `num/den` of the hook contract's net deposits.
pub fn builtin_tvl(num: Word, den: Word) -> Result<Formula, DetectorError> {
    if den == 0 {
        return Err(DetectorError::ZeroDenominator);
    }
    Ok(Formula::Compare {
        op: CmpOp::Lt,
        lhs: ArithExpr::HookArg,
        rhs: ArithExpr::RatioMul {
            num,
            den,
            expr: Box::new(ArithExpr::Sub(Box::new(ArithExpr::SumDeposits), Box::new(ArithExpr::SumWithdrawals))),
        },
    })
}

/// `not O (forall (c,s) in callstack : not inflashloan(c,s))`.
pub fn flashloan_literal() -> Formula {
    Formula::not(Formula::once(Formula::Forall {
        binder: Binder::new("c", "s"),
        domain: Domain::CallStack,
        body: Box::new(Formula::not(flashloan_atom())),
    }))
}

/// Every distinct pair differs, negated under `O`; the pair-universal is
/// written through `exists_pair` since the language has no `forall_pair`.
pub fn reentrancy_literal() -> Formula {
    Formula::not(Formula::once(Formula::not(some_pair(duplicate_entry()))))
}

/// Canonical name of a binding to `builtin.tvl` with the given threshold.
pub fn tvl_name(num: Word, den: Word) -> String {
    format!("{TVL}({num},{den})")
}

/// Resolves a `builtin.*` reference to its canonical name and formula.
/// Returns `None` for names outside the `builtin.` namespace.
pub fn resolve_builtin(reference: &str) -> Option<Result<(String, Formula), DetectorError>> {
    let reference = reference.trim();
    if !reference.starts_with("builtin.") {
        return None;
    }
    Some(match reference {
        FLASHLOAN => Ok((FLASHLOAN.to_string(), builtin_flashloan())),
        REENTRANCY => Ok((REENTRANCY.to_string(), builtin_reentrancy())),
        other => parse_tvl(other).and_then(|(num, den)| Ok((tvl_name(num, den), builtin_tvl(num, den)?))),
    })
}

fn parse_tvl(reference: &str) -> Result<(Word, Word), DetectorError> {
    let malformed = || DetectorError::Malformed(reference.to_string());
    let args = reference
        .strip_prefix(TVL)
        .map(str::trim)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(malformed)?;
    let (num, den) = args.split_once(',').ok_or_else(malformed)?;
    let num = crate::trace::parse_u64(num).ok_or_else(malformed)?;
    let den = crate::trace::parse_u64(den).ok_or_else(malformed)?;
    Ok((num, den))
}

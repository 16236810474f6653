use indexmap::IndexMap;

use crate::trace::{EventKind, Word};

/// A `(contract, selector)` binder over call-stack entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binder {
    pub contract: String,
    pub selector: String,
}

impl Binder {
    pub fn new(contract: impl Into<String>, selector: impl Into<String>) -> Self {
        Self { contract: contract.into(), selector: selector.into() }
    }
}

/// Quantifier domain. Only the live call stack exists today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    CallStack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn apply(self, lhs: Word, rhs: Word) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArithExpr {
    Const(Word),
    /// Argument popped by the hook being checked.
    HookArg,
    SumDeposits,
    SumWithdrawals,
    Var(String),
    /// `floor(num * e / den)` computed without intermediate overflow.
    RatioMul { num: Word, den: Word, expr: Box<ArithExpr> },
    Add(Box<ArithExpr>, Box<ArithExpr>),
    /// Saturates at zero.
    Sub(Box<ArithExpr>, Box<ArithExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    True,
    False,
    /// The current step emits an event of this kind.
    EventIs(EventKind),
    InFlashLoanProviders { contract: String, selector: String },
    VarEq(String, String),
    /// The current step is a hook with this id.
    HookId(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Since(Box<Formula>, Box<Formula>),
    Prev(Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    Once(Box<Formula>),
    Historically(Box<Formula>),
    Forall { binder: Binder, domain: Domain, body: Box<Formula> },
    Exists { binder: Binder, domain: Domain, body: Box<Formula> },
    /// Ordered pairs of entries at distinct stack positions.
    ExistsPair { first: Binder, second: Binder, domain: Domain, body: Box<Formula> },
    Compare { op: CmpOp, lhs: ArithExpr, rhs: ArithExpr },
}

/// Shorthand constructors, mostly for tests and built-ins.
impl Formula {
    pub fn tt() -> Self {
        Formula::Atom(Predicate::True)
    }

    pub fn ff() -> Self {
        Formula::Atom(Predicate::False)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn since(a: Formula, b: Formula) -> Self {
        Formula::Since(Box::new(a), Box::new(b))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn once(f: Formula) -> Self {
        Formula::Once(Box::new(f))
    }

    pub fn historically(f: Formula) -> Self {
        Formula::Historically(Box::new(f))
    }

    pub fn prev(f: Formula) -> Self {
        Formula::Prev(Box::new(f))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    /// Direct subformulas, left to right. Quantifier bodies are included.
    pub fn children(&self) -> Vec<&Formula> {
        use Formula::*;
        match self {
            Atom(_) | Compare { .. } => vec![],
            Not(f) | Next(f) | Prev(f) | Eventually(f) | Always(f) | Once(f) | Historically(f) => vec![f],
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Since(a, b) => vec![a, b],
            Forall { body, .. } | Exists { body, .. } | ExistsPair { body, .. } => vec![body],
        }
    }

    pub fn is_future_op(&self) -> bool {
        matches!(self, Formula::Next(_) | Formula::Until(..) | Formula::Eventually(_) | Formula::Always(_))
    }

    pub fn is_temporal_op(&self) -> bool {
        self.is_future_op()
            || matches!(self, Formula::Since(..) | Formula::Prev(_) | Formula::Once(_) | Formula::Historically(_))
    }

    pub fn is_quantifier(&self) -> bool {
        matches!(self, Formula::Forall { .. } | Formula::Exists { .. } | Formula::ExistsPair { .. })
    }

    /// First subformula (pre-order) satisfying `pred`.
    pub fn find(&self, pred: &impl Fn(&Formula) -> bool) -> Option<&Formula> {
        if pred(self) {
            return Some(self);
        }
        self.children().into_iter().find_map(|c| c.find(pred))
    }

    pub fn has_future(&self) -> bool {
        self.find(&Formula::is_future_op).is_some()
    }

    pub fn has_temporal(&self) -> bool {
        self.find(&Formula::is_temporal_op).is_some()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().into_iter().map(Formula::depth).max().unwrap_or(0)
    }
}

/// Named properties in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertySet {
    properties: IndexMap<String, Formula>,
}

impl PropertySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a property; returns `false` (leaving the set unchanged) on a duplicate name.
    pub fn insert(&mut self, name: impl Into<String>, formula: Formula) -> bool {
        let name = name.into();
        if self.properties.contains_key(&name) {
            return false;
        }
        self.properties.insert(name, formula);
        true
    }

    pub fn get(&self, name: &str) -> Option<&Formula> {
        self.properties.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.properties.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.properties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.properties.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Formula)> {
        self.properties.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.properties.keys().map(String::as_str)
    }
}

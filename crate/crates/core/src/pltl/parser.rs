//! Recursive-descent parser for `.pltl` property files.
//!
//! Precedence, tightest first: unary (`not X Y F G O H`), then `S`/`U`
//! (right-associative), `and`, `or`, `->` (right-associative). A quantifier
//! body runs to the end of the enclosing parenthesis or property.

use super::ast::{ArithExpr, Binder, CmpOp, Domain, Formula, Predicate, PropertySet};
use super::error::{ParseError, ParseErrorKind, Pos};
use super::lexer::{tokenize, Tok, Token};
use crate::trace::EventKind;

type PResult<T> = Result<T, ParseError>;

/// Deepest nesting the parser accepts before reporting an error.
pub const MAX_NESTING: usize = 100;

/// Parses a whole property file.
pub fn parse_properties(text: &str) -> PResult<PropertySet> {
    let tokens = tokenize(text)?;
    let mut parser = Parser::new(tokens, end_pos(text));
    let mut set = PropertySet::new();
    while !parser.at_end() {
        let (name, pos, formula) = parser.property()?;
        if !set.insert(name.clone(), formula) {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateProperty,
                pos,
                format!("duplicate property `{name}`"),
            ));
        }
    }
    Ok(set)
}

/// Parses a single closed formula (no `property` wrapper).
pub fn parse_formula(text: &str) -> PResult<Formula> {
    let tokens = tokenize(text)?;
    let mut parser = Parser::new(tokens, end_pos(text));
    let f = parser.formula()?;
    if !parser.at_end() {
        let t = parser.peek_token().expect("not at end");
        return Err(ParseError::syntax(t.pos, format!("unexpected {} after formula", t.tok)));
    }
    Ok(f)
}

fn end_pos(text: &str) -> Pos {
    let line = text.matches('\n').count() + 1;
    let col = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Pos { line, col }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    eof: Pos,
    scope: Vec<String>,
    nesting: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>, eof: Pos) -> Self {
        Self { tokens, at: 0, eof, scope: Vec::new(), nesting: 0 }
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        if self.nesting >= MAX_NESTING {
            return Err(ParseError::syntax(self.pos(), format!("nesting deeper than {MAX_NESTING}")));
        }
        self.nesting += 1;
        let r = f(self);
        self.nesting -= 1;
        r
    }

    fn at_end(&self) -> bool {
        self.at >= self.tokens.len()
    }

    fn peek_token(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.at + offset).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.peek_token().map_or(self.eof, |t| t.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek_token() {
            Some(t) => ParseError::syntax(t.pos, format!("expected {wanted}, found {}", t.tok)),
            None => ParseError::syntax(self.eof, format!("expected {wanted}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                let pos = self.pos();
                self.at += 1;
                Ok((name, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn number(&mut self) -> PResult<(u64, Pos)> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                let pos = self.pos();
                self.at += 1;
                Ok((n, pos))
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn bound_var(&mut self) -> PResult<String> {
        let (name, pos) = self.ident()?;
        self.check_bound(&name, pos)?;
        Ok(name)
    }

    fn check_bound(&self, name: &str, pos: Pos) -> PResult<()> {
        if self.scope.iter().any(|v| v == name) {
            Ok(())
        } else {
            Err(ParseError::new(ParseErrorKind::UnboundVariable, pos, format!("unbound variable `{name}`")))
        }
    }

    fn property(&mut self) -> PResult<(String, Pos, Formula)> {
        self.expect(Tok::Property)?;
        let (name, pos) = self.ident()?;
        self.expect(Tok::LBrace)?;
        let f = self.formula()?;
        self.expect(Tok::RBrace)?;
        Ok((name, pos, f))
    }

    fn formula(&mut self) -> PResult<Formula> {
        self.nested(|p| match p.peek() {
            Some(Tok::Forall | Tok::Exists | Tok::ExistsPair) => p.quantifier(),
            _ => p.implication(),
        })
    }

    /// Reads `(c, s)` and pushes both names into scope.
    fn binder(&mut self, fresh: &mut Vec<(String, Pos)>) -> PResult<Binder> {
        self.expect(Tok::LParen)?;
        let c = self.ident()?;
        self.expect(Tok::Comma)?;
        let s = self.ident()?;
        self.expect(Tok::RParen)?;
        let binder = Binder::new(c.0.clone(), s.0.clone());
        fresh.push(c);
        fresh.push(s);
        Ok(binder)
    }

    fn quantifier(&mut self) -> PResult<Formula> {
        let head = self.bump().expect("peeked").tok;
        let mut fresh = Vec::new();
        let binders = if head == Tok::ExistsPair {
            self.expect(Tok::LParen)?;
            let first = self.binder(&mut fresh)?;
            self.expect(Tok::Comma)?;
            let second = self.binder(&mut fresh)?;
            self.expect(Tok::RParen)?;
            vec![first, second]
        } else {
            vec![self.binder(&mut fresh)?]
        };
        self.expect(Tok::In)?;
        self.expect(Tok::CallStack)?;
        self.expect(Tok::Colon)?;

        for (i, (name, pos)) in fresh.iter().enumerate() {
            if self.scope.contains(name) || fresh[..i].iter().any(|(n, _)| n == name) {
                return Err(ParseError::new(
                    ParseErrorKind::Shadowing,
                    *pos,
                    format!("variable `{name}` is already bound"),
                ));
            }
        }
        let depth = self.scope.len();
        self.scope.extend(fresh.into_iter().map(|(n, _)| n));
        let body = self.formula();
        self.scope.truncate(depth);
        let body = Box::new(body?);

        let mut binders = binders.into_iter();
        let first = binders.next().expect("one binder");
        Ok(match head {
            Tok::Forall => Formula::Forall { binder: first, domain: Domain::CallStack, body },
            Tok::Exists => Formula::Exists { binder: first, domain: Domain::CallStack, body },
            _ => Formula::ExistsPair {
                first,
                second: binders.next().expect("two binders"),
                domain: Domain::CallStack,
                body,
            },
        })
    }

    fn implication(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.nested(Self::implication)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.temporal()?;
        while self.eat(&Tok::And) {
            lhs = Formula::and(lhs, self.temporal()?);
        }
        Ok(lhs)
    }

    fn temporal(&mut self) -> PResult<Formula> {
        let lhs = self.unary()?;
        if self.eat(&Tok::S) {
            return Ok(Formula::since(lhs, self.nested(Self::temporal)?));
        }
        if self.eat(&Tok::U) {
            return Ok(Formula::until(lhs, self.nested(Self::temporal)?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        let wrap: fn(Formula) -> Formula = match self.peek() {
            Some(Tok::Not) => Formula::not,
            Some(Tok::X) => Formula::next,
            Some(Tok::Y) => Formula::prev,
            Some(Tok::F) => Formula::eventually,
            Some(Tok::G) => Formula::always,
            Some(Tok::O) => Formula::once,
            Some(Tok::H) => Formula::historically,
            _ => return self.atom(),
        };
        self.at += 1;
        Ok(wrap(self.nested(Self::unary)?))
    }

    fn atom(&mut self) -> PResult<Formula> {
        match self.peek() {
            Some(Tok::True) => {
                self.at += 1;
                Ok(Formula::tt())
            }
            Some(Tok::False) => {
                self.at += 1;
                Ok(Formula::ff())
            }
            Some(Tok::InFlashLoan) => {
                self.at += 1;
                self.expect(Tok::LParen)?;
                let contract = self.bound_var()?;
                self.expect(Tok::Comma)?;
                let selector = self.bound_var()?;
                self.expect(Tok::RParen)?;
                Ok(Formula::Atom(Predicate::InFlashLoanProviders { contract, selector }))
            }
            Some(Tok::Event) => {
                self.at += 1;
                self.expect(Tok::LParen)?;
                let kind = self.event_kind()?;
                self.expect(Tok::RParen)?;
                Ok(Formula::Atom(Predicate::EventIs(kind)))
            }
            Some(Tok::HookId) => {
                self.at += 1;
                self.expect(Tok::LParen)?;
                let (n, pos) = self.number()?;
                let id = u8::try_from(n).map_err(|_| ParseError::syntax(pos, format!("hook id {n} exceeds 255")))?;
                self.expect(Tok::RParen)?;
                Ok(Formula::Atom(Predicate::HookId(id)))
            }
            Some(Tok::LParen) => {
                let save = self.at;
                if let Ok(cmp) = self.comparison() {
                    return Ok(cmp);
                }
                self.at = save;
                self.at += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.check_bound(&name, self.pos())?;
                let var_eq = matches!(self.peek_at(1), Some(Tok::EqEq | Tok::Ne))
                    && matches!(self.peek_at(2), Some(Tok::Ident(_)))
                    && !matches!(self.peek_at(3), Some(Tok::Plus | Tok::Minus));
                if var_eq {
                    self.at += 1;
                    let negate = self.bump().expect("peeked").tok == Tok::Ne;
                    let rhs = self.bound_var()?;
                    let atom = Formula::Atom(Predicate::VarEq(name, rhs));
                    return Ok(if negate { Formula::not(atom) } else { atom });
                }
                self.comparison()
            }
            Some(Tok::Num(_) | Tok::Arg | Tok::Sum | Tok::Ratio) => self.comparison(),
            _ => Err(self.unexpected("formula")),
        }
    }

    fn event_kind(&mut self) -> PResult<EventKind> {
        let pos = self.pos();
        match self.bump().map(|t| t.tok) {
            Some(Tok::Num(n)) => u8::try_from(n)
                .map(EventKind::from_code)
                .map_err(|_| ParseError::syntax(pos, format!("event code {n} exceeds 255"))),
            Some(Tok::Ident(name)) => EventKind::from_name(&name)
                .ok_or_else(|| ParseError::syntax(pos, format!("unknown event kind `{name}`"))),
            _ => {
                self.at -= 1;
                Err(self.unexpected("event kind"))
            }
        }
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let lhs = self.arith()?;
        let op = match self.peek() {
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::EqEq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Ge) => CmpOp::Ge,
            Some(Tok::Gt) => CmpOp::Gt,
            _ => return Err(self.unexpected("comparison operator")),
        };
        self.at += 1;
        let rhs = self.arith()?;
        Ok(Formula::Compare { op, lhs, rhs })
    }

    fn arith(&mut self) -> PResult<ArithExpr> {
        let mut lhs = self.arith_term()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = ArithExpr::Add(Box::new(lhs), Box::new(self.arith_term()?));
            } else if self.eat(&Tok::Minus) {
                lhs = ArithExpr::Sub(Box::new(lhs), Box::new(self.arith_term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn arith_term(&mut self) -> PResult<ArithExpr> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.at += 1;
                Ok(ArithExpr::Const(n))
            }
            Some(Tok::Arg) => {
                self.at += 1;
                Ok(ArithExpr::HookArg)
            }
            Some(Tok::Sum) => {
                self.at += 1;
                self.expect(Tok::LParen)?;
                let e = match self.peek() {
                    Some(Tok::Deposits) => ArithExpr::SumDeposits,
                    Some(Tok::Withdrawals) => ArithExpr::SumWithdrawals,
                    _ => return Err(self.unexpected("`deposits` or `withdrawals`")),
                };
                self.at += 1;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ratio) => {
                self.at += 1;
                self.expect(Tok::LParen)?;
                let (num, _) = self.number()?;
                self.expect(Tok::Comma)?;
                let (den, den_pos) = self.number()?;
                if den == 0 {
                    return Err(ParseError::syntax(den_pos, "ratio denominator must be positive"));
                }
                self.expect(Tok::Comma)?;
                let expr = Box::new(self.nested(Self::arith)?);
                self.expect(Tok::RParen)?;
                Ok(ArithExpr::RatioMul { num, den, expr })
            }
            Some(Tok::Ident(_)) => Ok(ArithExpr::Var(self.bound_var()?)),
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.nested(Self::arith)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected("arithmetic expression")),
        }
    }
}

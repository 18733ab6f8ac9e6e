//! Expressions and temporal formulas share one precedence grammar. Temporal
//! operators are only recognised in query mode; any subtree free of them is
//! folded back into a plain expression.

use super::lexer::Tok;
use super::{Cursor, InstanceRef, Name, ParseError, SExpr};
use crate::model::{BinOp, UnOp};

/// A formula as written, before bounds are checked or derived operators
/// are expanded.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Atom(SExpr),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until {
        bound: Option<(Name, f64)>,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Eventually {
        bound: Option<(Name, f64)>,
        body: Box<Formula>,
    },
    Globally {
        bound: Option<(Name, f64)>,
        body: Box<Formula>,
    },
}

impl Formula {
    fn not(f: Formula) -> Formula {
        match f {
            Formula::Atom(e) => Formula::Atom(SExpr::Unary(UnOp::Not, Box::new(e))),
            f => Formula::Not(Box::new(f)),
        }
    }

    fn logical(op: BinOp, a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::Atom(x), Formula::Atom(y)) => Formula::Atom(SExpr::binary(op, x, y)),
            (a, b) => match op {
                BinOp::And => Formula::And(Box::new(a), Box::new(b)),
                BinOp::Or => Formula::Or(Box::new(a), Box::new(b)),
                BinOp::Imply => Formula::Or(Box::new(Formula::not(a)), Box::new(b)),
                _ => unreachable!(),
            },
        }
    }
}

impl Cursor {
    pub(crate) fn expr(&mut self) -> Result<SExpr, ParseError> {
        let start = self.pos();
        match self.formula()? {
            Formula::Atom(e) => Ok(e),
            _ => Err(ParseError::at(start, "temporal operator not allowed here")),
        }
    }

    fn atom(&mut self, f: Formula) -> Result<SExpr, ParseError> {
        match f {
            Formula::Atom(e) => Ok(e),
            _ => Err(self.error("temporal formula used as a value")),
        }
    }

    pub(crate) fn formula(&mut self) -> Result<Formula, ParseError> {
        if let Some(f) = self.temporal_prefix()? {
            return Ok(f);
        }
        let lhs = self.cond()?;
        if self.temporal && self.eat_kw("U") {
            let bound = self.opt_bound()?;
            let rhs = self.formula()?;
            return Ok(Formula::Until {
                bound,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            });
        }
        Ok(lhs)
    }

    fn temporal_prefix(&mut self) -> Result<Option<Formula>, ParseError> {
        if !self.temporal {
            return Ok(None);
        }
        if self.eat(&Tok::Diamond) {
            let bound = self.opt_bound()?;
            let body = Box::new(self.formula()?);
            return Ok(Some(Formula::Eventually { bound, body }));
        }
        if *self.peek() == Tok::LBracket && *self.peek_at(1) == Tok::RBracket {
            self.next();
            self.next();
            let bound = self.opt_bound()?;
            let body = Box::new(self.formula()?);
            return Ok(Some(Formula::Globally { bound, body }));
        }
        if self.eat_kw("X") {
            return Ok(Some(Formula::Next(Box::new(self.formula()?))));
        }
        Ok(None)
    }

    /// `[clock<=d]`
    fn opt_bound(&mut self) -> Result<Option<(Name, f64)>, ParseError> {
        if !self.eat(&Tok::LBracket) {
            return Ok(None);
        }
        let clock = self.name()?;
        self.expect(&Tok::Le)?;
        let d = self.number()?;
        self.expect(&Tok::RBracket)?;
        Ok(Some((clock, d)))
    }

    fn cond(&mut self) -> Result<Formula, ParseError> {
        let c = self.imply()?;
        if self.eat(&Tok::Question) {
            let c = self.atom(c)?;
            let a = self.expr()?;
            self.expect(&Tok::Colon)?;
            let b = self.expr()?;
            return Ok(Formula::Atom(SExpr::Cond(Box::new(c), Box::new(a), Box::new(b))));
        }
        Ok(c)
    }

    fn imply(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.or()?;
        while self.eat_kw("imply") {
            let r = self.or()?;
            l = Formula::logical(BinOp::Imply, l, r);
        }
        Ok(l)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.and()?;
        while self.eat(&Tok::OrOr) || self.eat_kw("or") {
            let r = self.and()?;
            l = Formula::logical(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.comparison()?;
        while self.eat(&Tok::AndAnd) || self.eat_kw("and") {
            let r = self.comparison()?;
            l = Formula::logical(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn comparison(&mut self) -> Result<Formula, ParseError> {
        let l = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(l),
        };
        let l = self.atom(l)?;
        self.next();
        let r = self.additive()?;
        let r = self.atom(r)?;
        Ok(Formula::Atom(SExpr::binary(op, l, r)))
    }

    fn additive(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(l),
            };
            let a = self.atom(l)?;
            self.next();
            let r = self.multiplicative()?;
            let b = self.atom(r)?;
            l = Formula::Atom(SExpr::binary(op, a, b));
        }
    }

    fn multiplicative(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(l),
            };
            let a = self.atom(l)?;
            self.next();
            let r = self.unary()?;
            let b = self.atom(r)?;
            l = Formula::Atom(SExpr::binary(op, a, b));
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat(&Tok::Minus) {
            let f = self.unary()?;
            let e = self.atom(f)?;
            return Ok(Formula::Atom(match e {
                SExpr::Int(i) => SExpr::Int(-i),
                SExpr::Real(r) => SExpr::Real(-r),
                e => SExpr::Unary(UnOp::Neg, Box::new(e)),
            }));
        }
        if self.eat(&Tok::Bang) || self.eat_kw("not") {
            return Ok(Formula::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        if let Some(f) = self.temporal_prefix()? {
            return Ok(f);
        }
        let e = match self.peek().clone() {
            Tok::Int(i) => {
                self.next();
                SExpr::Int(i)
            }
            Tok::Real(r) => {
                self.next();
                SExpr::Real(r)
            }
            Tok::LParen => {
                self.next();
                let f = self.formula()?;
                self.expect(&Tok::RParen)?;
                return Ok(f);
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                SExpr::Bool(true)
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                SExpr::Bool(false)
            }
            _ if self.at_ident() => SExpr::Name(self.name()?),
            _ => return Err(self.unexpected("an expression")),
        };
        Ok(Formula::Atom(e))
    }

    /// `x`, `P.x` or `P(args).x`. A bare name followed by an argument list
    /// must be qualified.
    pub(crate) fn name(&mut self) -> Result<Name, ParseError> {
        let first = self.ident("a name")?;
        let args = if *self.peek() == Tok::LParen {
            self.next();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                loop {
                    args.push(self.expr()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            self.expect(&Tok::RParen)?;
            if *self.peek() != Tok::Dot {
                return Err(self.unexpected("`.` after an instance"));
            }
            Some(args)
        } else {
            None
        };
        if self.eat(&Tok::Dot) {
            let ident = self.ident("a member name")?;
            return Ok(Name {
                instance: Some(InstanceRef { template: first, args }),
                ident,
            });
        }
        Ok(Name {
            instance: None,
            ident: first,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(s: &str) -> SExpr {
        let mut c = Cursor::new(s, false).unwrap();
        let e = c.expr().unwrap();
        c.expect_eof().unwrap();
        e
    }

    fn formula(s: &str) -> Formula {
        let mut c = Cursor::new(s, true).unwrap();
        let f = c.formula().unwrap();
        c.expect_eof().unwrap();
        f
    }

    #[test]
    fn precedence() {
        assert_eq!(expr("1 + 2 * 3"), expr("1 + (2 * 3)"));
        assert_eq!(expr("a && b || c"), expr("(a && b) || c"));
        assert_eq!(expr("x >= 2 and x <= 3"), expr("(x >= 2) && (x <= 3)"));
        assert_eq!(expr("a - b - c"), expr("(a - b) - c"));
    }

    #[test]
    fn temporal_free_subtrees_become_atoms() {
        match formula("(p && q) U[tau<=10] goal") {
            Formula::Until { lhs, rhs, bound } => {
                assert!(matches!(*lhs, Formula::Atom(_)));
                assert!(matches!(*rhs, Formula::Atom(_)));
                assert_eq!(bound.unwrap().1, 10.0);
            }
            f => panic!("{f:?}"),
        }
    }

    #[test]
    fn prefix_operators_extend_right() {
        match formula("<> T.T3 && x > 2") {
            Formula::Eventually { body, bound: None } => {
                assert!(matches!(*body, Formula::Atom(_)))
            }
            f => panic!("{f:?}"),
        }
    }

    #[test]
    fn temporal_words_are_names_in_models() {
        assert_eq!(expr("U + X"), SExpr::binary(BinOp::Add, expr("U"), expr("X")));
    }

    #[test]
    fn arithmetic_on_a_formula_is_rejected() {
        let mut c = Cursor::new("(<> p) + 1", true).unwrap();
        assert!(c.formula().is_err());
    }
}

use super::expr::Formula;
use super::lexer::Tok;
use super::*;
use crate::query::*;

pub type SurfaceQuery = Query<SExpr, Name>;

pub fn parse_query(src: &str) -> Result<SurfaceQuery, ParseError> {
    let mut c = Cursor::new(src, true)?;
    let q = if c.is_kw("Pr") {
        let left = experiment(&mut c)?;
        if c.eat(&Tok::Ge) {
            if c.is_kw("Pr") {
                Query::Compare(left, experiment(&mut c)?)
            } else {
                let pos = c.pos();
                let p = c.number()?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(ParseError::at(pos, "probability threshold must lie in [0,1]"));
                }
                Query::HypTest(left, p)
            }
        } else {
            Query::Estimate(left)
        }
    } else if c.eat_kw("E") {
        c.expect(&Tok::LBracket)?;
        let bound = bound(&mut c)?;
        c.expect(&Tok::Semi)?;
        let pos = c.pos();
        let runs = c.integer()?;
        if runs < 1 {
            return Err(ParseError::at(pos, "run count must be at least 1"));
        }
        c.expect(&Tok::RBracket)?;
        c.expect(&Tok::LParen)?;
        let mode = if c.eat_kw("min") {
            Extremum::Min
        } else if c.eat_kw("max") {
            Extremum::Max
        } else {
            return Err(c.unexpected("`min` or `max`"));
        };
        c.expect(&Tok::Colon)?;
        let expr = c.expr()?;
        c.expect(&Tok::RParen)?;
        Query::Expect {
            bound,
            runs: runs as u64,
            mode,
            expr,
        }
    } else if c.eat_kw("simulate") {
        let pos = c.pos();
        let count = c.integer()?;
        if count < 1 {
            return Err(ParseError::at(pos, "simulation count must be at least 1"));
        }
        c.expect(&Tok::LBracket)?;
        let bound = bound(&mut c)?;
        c.expect(&Tok::RBracket)?;
        c.expect(&Tok::LBrace)?;
        let mut exprs = vec![c.expr()?];
        while c.eat(&Tok::Comma) {
            exprs.push(c.expr()?);
        }
        c.expect(&Tok::RBrace)?;
        Query::Simulate {
            count: count as u64,
            bound,
            exprs,
        }
    } else {
        return Err(c.unexpected("`Pr`, `E` or `simulate`"));
    };
    c.expect_eof()?;
    Ok(q)
}

fn experiment(c: &mut Cursor) -> Result<Experiment<SExpr, Name>, ParseError> {
    c.expect_kw("Pr")?;
    c.expect(&Tok::LBracket)?;
    let bound = bound(c)?;
    c.expect(&Tok::RBracket)?;
    c.expect(&Tok::LParen)?;
    let f = c.formula()?;
    c.expect(&Tok::RParen)?;
    Ok(Experiment {
        bound,
        prop: property(f),
    })
}

/// `<=M`, `clock<=M` or `#<=M`, without the brackets.
fn bound(c: &mut Cursor) -> Result<RunBound<Name>, ParseError> {
    let b = if c.eat(&Tok::Hash) {
        c.expect(&Tok::Le)?;
        let pos = c.pos();
        let n = c.integer()?;
        if n < 1 {
            return Err(ParseError::at(pos, "step bound must be positive"));
        }
        RunBound::Steps(n as u64)
    } else if c.eat(&Tok::Le) {
        RunBound::Time(positive(c)?)
    } else {
        let clock = c.name()?;
        c.expect(&Tok::Le)?;
        RunBound::Cost {
            clock,
            limit: positive(c)?,
        }
    };
    Ok(b)
}

fn positive(c: &mut Cursor) -> Result<f64, ParseError> {
    let pos = c.pos();
    let m = c.number()?;
    if m > 0.0 {
        Ok(m)
    } else {
        Err(ParseError::at(pos, "bound must be positive"))
    }
}

fn property(f: Formula) -> Property<SExpr, Name> {
    match f {
        Formula::Eventually { bound: None, body } if matches!(*body, Formula::Atom(_)) => {
            let Formula::Atom(p) = *body else { unreachable!() };
            Property::Path(PathFormula::Eventually(p))
        }
        Formula::Globally { bound: None, body } if matches!(*body, Formula::Atom(_)) => {
            let Formula::Atom(p) = *body else { unreachable!() };
            Property::Path(PathFormula::Globally(p))
        }
        Formula::Until { bound: None, lhs, rhs } if matches!((&*lhs, &*rhs), (Formula::Atom(_), Formula::Atom(_))) => {
            let (Formula::Atom(p), Formula::Atom(q)) = (*lhs, *rhs) else {
                unreachable!()
            };
            Property::Path(PathFormula::Until(p, q))
        }
        f => Property::Wmtl(wmtl(f)),
    }
}

pub(crate) type SWmtl = Wmtl<SExpr, Name>;

pub(crate) fn wmtl_not(w: SWmtl) -> SWmtl {
    match w {
        Wmtl::Atom(e) => Wmtl::Atom(SExpr::Unary(crate::model::UnOp::Not, Box::new(e))),
        Wmtl::Not(w) => *w,
        w => Wmtl::Not(Box::new(w)),
    }
}

fn until(bound: Option<(Name, f64)>, lhs: SWmtl, rhs: SWmtl) -> SWmtl {
    let (clock, bound) = bound.unwrap_or_else(|| {
        (
            Name {
                instance: None,
                ident: Ident {
                    name: "tau".into(),
                    pos: Pos::default(),
                },
            },
            f64::INFINITY,
        )
    });
    Wmtl::Until {
        clock,
        bound,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
    }
}

fn wmtl(f: Formula) -> SWmtl {
    match f {
        Formula::Atom(e) => Wmtl::Atom(e),
        Formula::Not(f) => wmtl_not(wmtl(*f)),
        Formula::And(a, b) => Wmtl::And(Box::new(wmtl(*a)), Box::new(wmtl(*b))),
        Formula::Or(a, b) => Wmtl::Or(Box::new(wmtl(*a)), Box::new(wmtl(*b))),
        Formula::Next(f) => Wmtl::Next(Box::new(wmtl(*f))),
        Formula::Until { bound, lhs, rhs } => until(bound, wmtl(*lhs), wmtl(*rhs)),
        Formula::Eventually { bound, body } => until(bound, Wmtl::Atom(SExpr::Bool(true)), wmtl(*body)),
        Formula::Globally { bound, body } => {
            wmtl_not(until(bound, Wmtl::Atom(SExpr::Bool(true)), wmtl_not(wmtl(*body))))
        }
    }
}

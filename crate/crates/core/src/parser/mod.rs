//! Text formats: `.npta` models and the query language.

mod ast;
mod expr;
mod lexer;
mod model_parser;
mod print;
mod query_parser;

pub use ast::*;
pub use expr::Formula;
pub use model_parser::parse_model;
pub use print::{print_expr, print_model, print_query};
pub use query_parser::{parse_query, SurfaceQuery};

use std::fmt;

use lexer::{Tok, Token};

/// A syntax error. `after` is the end of the last token that was accepted,
/// `pos` the start of the token that could not be. A missing closing
/// delimiter also records where the unclosed one was opened.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub pos: Pos,
    pub after: Pos,
    pub open: Option<Pos>,
    pub message: String,
}

impl ParseError {
    pub fn at(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            after: pos,
            open: None,
            message: message.into(),
        }
    }

    /// Lines the error may point at, inclusive.
    pub fn lines(&self) -> (usize, usize) {
        let lo = self.after.line.min(self.pos.line);
        let lo = self.open.map_or(lo, |o| lo.min(o.line));
        (lo, self.pos.line.max(self.after.line))
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

const KEYWORDS: &[&str] = &[
    "clock",
    "int",
    "double",
    "bool",
    "const",
    "broadcast",
    "chan",
    "template",
    "location",
    "invariant",
    "rate",
    "exprate",
    "init",
    "guard",
    "sync",
    "weight",
    "update",
    "system",
    "true",
    "false",
    "and",
    "or",
    "not",
    "imply",
];

const TEMPORAL_KEYWORDS: &[&str] = &["U", "X"];

pub(crate) struct Cursor {
    toks: Vec<Token>,
    i: usize,
    /// Positions of the brackets opened and not yet closed.
    open: Vec<(Tok, Pos)>,
    /// Query mode: `<>`, `[]`, `U` and `X` are temporal operators.
    temporal: bool,
}

impl Cursor {
    pub(crate) fn new(src: &str, temporal: bool) -> Result<Self, ParseError> {
        Ok(Cursor {
            toks: lexer::tokenize(src)?,
            i: 0,
            open: Vec::new(),
            temporal,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        match t.tok {
            Tok::LParen => self.open.push((Tok::RParen, t.pos)),
            Tok::LBrace => self.open.push((Tok::RBrace, t.pos)),
            Tok::LBracket => self.open.push((Tok::RBracket, t.pos)),
            Tok::RParen | Tok::RBrace | Tok::RBracket => {
                if let Some(k) = self.open.iter().rposition(|(c, _)| *c == t.tok) {
                    self.open.truncate(k);
                }
            }
            _ => {}
        }
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let after = if self.i == 0 {
            self.pos()
        } else {
            self.toks[self.i - 1].end
        };
        ParseError {
            pos: self.pos(),
            after,
            open: None,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error(format!("expected {expected}, found {}", self.peek().describe()))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<Token, ParseError> {
        if self.peek() == t {
            return Ok(self.next());
        }
        Err(self.unclosed(self.unexpected(&format!("`{}`", t.text())), t))
    }

    /// Point `e` also at the innermost open bracket if `closer` would
    /// have closed it.
    fn unclosed(&self, mut e: ParseError, closer: &Tok) -> ParseError {
        if let Some((_, at)) = self.open.last().filter(|(c, _)| c == closer) {
            e.open = Some(*at);
            e.message = format!("{} (unclosed since {at})", e.message);
        }
        e
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn is_reserved(&self, s: &str) -> bool {
        KEYWORDS.contains(&s) || (self.temporal && TEMPORAL_KEYWORDS.contains(&s))
    }

    fn at_ident(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if !self.is_reserved(s))
    }

    fn ident(&mut self, what: &str) -> Result<Ident, ParseError> {
        if self.at_ident() {
            let t = self.next();
            let Tok::Ident(name) = t.tok else { unreachable!() };
            Ok(Ident { name, pos: t.pos })
        } else {
            Err(self.unexpected(what))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match *self.peek() {
            Tok::Int(i) => {
                self.next();
                Ok(i as f64)
            }
            Tok::Real(r) => {
                self.next();
                Ok(r)
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        match *self.peek() {
            Tok::Int(i) => {
                self.next();
                Ok(i)
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }
}

/// Parse a standalone expression such as a `simulate` column.
pub fn parse_expr(src: &str) -> Result<SExpr, ParseError> {
    let mut c = Cursor::new(src, false)?;
    let e = c.expr()?;
    c.expect_eof()?;
    Ok(e)
}

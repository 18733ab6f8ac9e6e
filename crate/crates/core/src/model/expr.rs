//! Resolved expressions and their evaluation.
//!
//! Expressions reach this module with every name already bound to a slot in
//! the [`Network`](super::Network): variables, clocks and location tests are
//! plain indices, constants and template parameters are literals.

use std::fmt;

use thiserror::Error;

pub type VarId = usize;
pub type ClockId = usize;

/// The global clock that grows with rate 1 and is never reset.
pub const TAU: ClockId = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> Result<f64, EvalError> {
        match self {
            Value::Int(i) => Ok(i as f64),
            Value::Real(r) => Ok(r),
            Value::Bool(_) => Err(EvalError::Type("expected a number, found a boolean")),
        }
    }

    pub fn as_bool(self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(b),
            _ => Err(EvalError::Type("expected a boolean, found a number")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Imply,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Imply)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Imply => "imply",
        }
    }

    fn compare<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            BinOp::Lt => a < b,
            BinOp::Le => a <= b,
            BinOp::Gt => a > b,
            BinOp::Ge => a >= b,
            BinOp::Eq => a == b,
            BinOp::Ne => a != b,
            _ => unreachable!("not a comparison"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Var(VarId),
    Clock(ClockId),
    /// True iff `process` currently sits in `location`.
    At {
        process: usize,
        location: usize,
    },
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("type error: {0}")]
    Type(&'static str),
    #[error("expression is not linear in the clocks")]
    NonLinear,
}

/// Read access to a valuation.
pub trait Env {
    fn var(&self, id: VarId) -> Value;
    fn clock(&self, id: ClockId) -> f64;
    fn location(&self, process: usize) -> usize;
}

/// Something an expression can read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Var(VarId),
    Clock(ClockId),
    Location(usize),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn eval(&self, env: &impl Env) -> Result<Value, EvalError> {
        Ok(match self {
            Expr::Int(i) => Value::Int(*i),
            Expr::Real(r) => Value::Real(*r),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(v) => env.var(*v),
            Expr::Clock(c) => Value::Real(env.clock(*c)),
            Expr::At { process, location } => Value::Bool(env.location(*process) == *location),
            Expr::Unary(UnOp::Neg, e) => match e.eval(env)? {
                Value::Int(i) => Value::Int(i.wrapping_neg()),
                Value::Real(r) => Value::Real(-r),
                Value::Bool(_) => return Err(EvalError::Type("cannot negate a boolean")),
            },
            Expr::Unary(UnOp::Not, e) => Value::Bool(!e.eval(env)?.as_bool()?),
            Expr::Binary(op, l, r) => eval_binary(*op, l, r, env)?,
            Expr::Cond(c, a, b) => {
                if c.eval(env)?.as_bool()? {
                    a.eval(env)?
                } else {
                    b.eval(env)?
                }
            }
        })
    }

    pub fn eval_f64(&self, env: &impl Env) -> Result<f64, EvalError> {
        self.eval(env)?.as_f64()
    }

    pub fn eval_bool(&self, env: &impl Env) -> Result<bool, EvalError> {
        self.eval(env)?.as_bool()
    }

    /// Every symbol the expression reads.
    pub fn reads(&self, out: &mut Vec<Symbol>) {
        match self {
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) => {}
            Expr::Var(v) => out.push(Symbol::Var(*v)),
            Expr::Clock(c) => out.push(Symbol::Clock(*c)),
            Expr::At { process, .. } => out.push(Symbol::Location(*process)),
            Expr::Unary(_, e) => e.reads(out),
            Expr::Binary(_, l, r) => {
                l.reads(out);
                r.reads(out);
            }
            Expr::Cond(c, a, b) => {
                c.reads(out);
                a.reads(out);
                b.reads(out);
            }
        }
    }

    pub fn mentions_clock(&self) -> bool {
        match self {
            Expr::Clock(_) => true,
            Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) | Expr::Var(_) | Expr::At { .. } => false,
            Expr::Unary(_, e) => e.mentions_clock(),
            Expr::Binary(_, l, r) => l.mentions_clock() || r.mentions_clock(),
            Expr::Cond(c, a, b) => c.mentions_clock() || a.mentions_clock() || b.mentions_clock(),
        }
    }

    /// Constant value if the expression reads nothing.
    pub fn constant(&self) -> Option<Value> {
        struct NoEnv;
        impl Env for NoEnv {
            fn var(&self, _: VarId) -> Value {
                unreachable!()
            }
            fn clock(&self, _: ClockId) -> f64 {
                unreachable!()
            }
            fn location(&self, _: usize) -> usize {
                unreachable!()
            }
        }
        let mut syms = Vec::new();
        self.reads(&mut syms);
        if syms.is_empty() {
            self.eval(&NoEnv).ok()
        } else {
            None
        }
    }

    /// Comparison sub-expressions whose operands depend on clocks. These are
    /// the only places where truth can change while time passes.
    pub fn clock_atoms<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Binary(op, l, r) if op.is_comparison() => {
                if l.mentions_clock() || r.mentions_clock() {
                    out.push(self);
                }
            }
            Expr::Binary(_, l, r) => {
                l.clock_atoms(out);
                r.clock_atoms(out);
            }
            Expr::Unary(_, e) => e.clock_atoms(out),
            Expr::Cond(c, a, b) => {
                c.clock_atoms(out);
                a.clock_atoms(out);
                b.clock_atoms(out);
            }
            _ => {}
        }
    }

    /// Checks that every clock-dependent comparison is affine in the clocks.
    /// Returns the first offending sub-expression.
    pub fn check_linear(&self) -> Result<(), &Expr> {
        let mut atoms = Vec::new();
        self.clock_atoms(&mut atoms);
        for atom in atoms {
            if let Expr::Binary(_, l, r) = atom {
                if !is_affine_shape(l) || !is_affine_shape(r) {
                    return Err(atom);
                }
            }
        }
        Ok(())
    }

    /// The expression as `c0 + c1 * t` where `t` is the delay from the
    /// current valuation and clock `c` moves with `rates[c]`.
    pub fn affine(&self, env: &impl Env, rates: &[f64]) -> Result<Affine, EvalError> {
        Ok(match self {
            Expr::Clock(c) => Affine {
                c0: env.clock(*c),
                c1: rates[*c],
            },
            Expr::Unary(UnOp::Neg, e) => e.affine(env, rates)?.scale(-1.0),
            Expr::Binary(op, l, r) if !op.is_comparison() && !op.is_logical() => {
                if !self.mentions_clock() {
                    return Ok(Affine::constant(self.eval_f64(env)?));
                }
                let a = l.affine(env, rates)?;
                let b = r.affine(env, rates)?;
                match op {
                    BinOp::Add => Affine {
                        c0: a.c0 + b.c0,
                        c1: a.c1 + b.c1,
                    },
                    BinOp::Sub => Affine {
                        c0: a.c0 - b.c0,
                        c1: a.c1 - b.c1,
                    },
                    BinOp::Mul if a.c1 == 0.0 => b.scale(a.c0),
                    BinOp::Mul if b.c1 == 0.0 => a.scale(b.c0),
                    BinOp::Div if b.c1 == 0.0 => {
                        if b.c0 == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.scale(1.0 / b.c0)
                    }
                    _ => return Err(EvalError::NonLinear),
                }
            }
            Expr::Cond(c, a, b) => {
                if c.mentions_clock() {
                    return Err(EvalError::NonLinear);
                }
                if c.eval_bool(env)? {
                    a.affine(env, rates)?
                } else {
                    b.affine(env, rates)?
                }
            }
            _ => Affine::constant(self.eval_f64(env)?),
        })
    }

    /// Truth of a boolean expression after delaying `t` time units.
    /// Clock comparisons that sit within rounding distance of their
    /// crossing are decided as if exactly on it.
    pub fn holds_after(&self, env: &impl Env, rates: &[f64], t: f64) -> Result<bool, EvalError> {
        match self {
            Expr::Binary(op, l, r) if op.is_comparison() && self.mentions_clock() => {
                let diff = l.affine(env, rates)?.sub(r.affine(env, rates)?);
                let v = snap(diff.c0, diff.c1 * t);
                Ok(op.compare(v, 0.0))
            }
            Expr::Binary(BinOp::And, l, r) => Ok(l.holds_after(env, rates, t)? && r.holds_after(env, rates, t)?),
            Expr::Binary(BinOp::Or, l, r) => Ok(l.holds_after(env, rates, t)? || r.holds_after(env, rates, t)?),
            Expr::Binary(BinOp::Imply, l, r) => Ok(!l.holds_after(env, rates, t)? || r.holds_after(env, rates, t)?),
            Expr::Unary(UnOp::Not, e) => Ok(!e.holds_after(env, rates, t)?),
            Expr::Cond(c, a, b) if !c.mentions_clock() => {
                if c.eval_bool(env)? {
                    a.holds_after(env, rates, t)
                } else {
                    b.holds_after(env, rates, t)
                }
            }
            _ if self.mentions_clock() => Err(EvalError::NonLinear),
            _ => self.eval_bool(env),
        }
    }

    /// Delay at which a clock comparison changes truth value, if it does so
    /// strictly in the future.
    pub fn crossing(&self, env: &impl Env, rates: &[f64]) -> Result<Option<f64>, EvalError> {
        let Expr::Binary(_, l, r) = self else {
            return Ok(None);
        };
        let diff = l.affine(env, rates)?.sub(r.affine(env, rates)?);
        if diff.c1 == 0.0 {
            return Ok(None);
        }
        let t = -diff.c0 / diff.c1;
        Ok((t > 0.0 && t.is_finite()).then_some(t))
    }
}

fn is_affine_shape(e: &Expr) -> bool {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, l, r) => is_affine_shape(l) && is_affine_shape(r),
        Expr::Binary(BinOp::Mul, l, r) => {
            (!l.mentions_clock() && is_affine_shape(r)) || (!r.mentions_clock() && is_affine_shape(l))
        }
        Expr::Binary(BinOp::Div, l, r) => !r.mentions_clock() && is_affine_shape(l),
        Expr::Binary(..) => !e.mentions_clock(),
        Expr::Unary(UnOp::Neg, e) => is_affine_shape(e),
        Expr::Cond(c, a, b) => !c.mentions_clock() && is_affine_shape(a) && is_affine_shape(b),
        _ => true,
    }
}

fn snap(c0: f64, c1t: f64) -> f64 {
    let v = c0 + c1t;
    if v.abs() <= 1e-9 * (1.0 + c0.abs() + c1t.abs()) {
        0.0
    } else {
        v
    }
}

fn eval_binary(op: BinOp, l: &Expr, r: &Expr, env: &impl Env) -> Result<Value, EvalError> {
    match op {
        BinOp::And => {
            return Ok(Value::Bool(l.eval_bool(env)? && r.eval_bool(env)?));
        }
        BinOp::Or => {
            return Ok(Value::Bool(l.eval_bool(env)? || r.eval_bool(env)?));
        }
        BinOp::Imply => {
            return Ok(Value::Bool(!l.eval_bool(env)? || r.eval_bool(env)?));
        }
        _ => {}
    }
    let a = l.eval(env)?;
    let b = r.eval(env)?;
    if op.is_comparison() {
        return Ok(Value::Bool(match (a, b) {
            (Value::Int(x), Value::Int(y)) => op.compare(x, y),
            (Value::Bool(x), Value::Bool(y)) if matches!(op, BinOp::Eq | BinOp::Ne) => op.compare(x, y),
            (Value::Bool(_), _) | (_, Value::Bool(_)) => return Err(EvalError::Type("cannot order booleans")),
            _ => op.compare(a.as_f64()?, b.as_f64()?),
        }));
    }
    Ok(match (op, a, b) {
        (BinOp::Div, _, _) => {
            let d = b.as_f64()?;
            if d == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Value::Real(a.as_f64()? / d)
        }
        (BinOp::Mod, Value::Int(x), Value::Int(y)) => {
            if y == 0 {
                return Err(EvalError::DivisionByZero);
            }
            Value::Int(x.rem_euclid(y))
        }
        (BinOp::Mod, _, _) => return Err(EvalError::Type("% needs integer operands")),
        (_, Value::Int(x), Value::Int(y)) => Value::Int(match op {
            BinOp::Add => x.wrapping_add(y),
            BinOp::Sub => x.wrapping_sub(y),
            BinOp::Mul => x.wrapping_mul(y),
            _ => unreachable!(),
        }),
        _ => {
            let (x, y) = (a.as_f64()?, b.as_f64()?);
            Value::Real(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                _ => unreachable!(),
            })
        }
    })
}

/// `c0 + c1 * t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub c0: f64,
    pub c1: f64,
}

impl Affine {
    pub fn constant(c0: f64) -> Self {
        Affine { c0, c1: 0.0 }
    }

    fn scale(self, k: f64) -> Self {
        Affine {
            c0: self.c0 * k,
            c1: self.c1 * k,
        }
    }

    fn sub(self, o: Affine) -> Self {
        Affine {
            c0: self.c0 - o.c0,
            c1: self.c1 - o.c1,
        }
    }

    pub fn at(self, t: f64) -> f64 {
        self.c0 + self.c1 * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Vals {
        vars: Vec<Value>,
        clocks: Vec<f64>,
    }

    impl Env for Vals {
        fn var(&self, id: VarId) -> Value {
            self.vars[id]
        }
        fn clock(&self, id: ClockId) -> f64 {
            self.clocks[id]
        }
        fn location(&self, _: usize) -> usize {
            0
        }
    }

    fn b(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::binary(op, l, r)
    }

    #[test]
    fn train_rate_is_real_division() {
        // (1 + id) / (N * N) with id = 5, N = 6
        let env = Vals {
            vars: vec![Value::Int(5), Value::Int(6)],
            clocks: vec![0.0],
        };
        let e = b(
            BinOp::Div,
            b(BinOp::Add, Expr::Int(1), Expr::Var(0)),
            b(BinOp::Mul, Expr::Var(1), Expr::Var(1)),
        );
        let v = e.eval_f64(&env).unwrap();
        assert!((v - 6.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn zero_times_clock_folds() {
        let env = Vals {
            vars: vec![],
            clocks: vec![0.0, 7.5],
        };
        let e = b(BinOp::Add, b(BinOp::Mul, Expr::Int(0), Expr::Clock(1)), Expr::Int(3));
        assert_eq!(e.eval_f64(&env).unwrap(), 3.0);
    }

    #[test]
    fn interval_membership() {
        let env = Vals {
            vars: vec![],
            clocks: vec![0.0, 2.5],
        };
        let e = b(
            BinOp::And,
            b(BinOp::Ge, Expr::Clock(1), Expr::Int(2)),
            b(BinOp::Le, Expr::Clock(1), Expr::Int(3)),
        );
        assert!(e.eval_bool(&env).unwrap());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let env = Vals {
            vars: vec![Value::Int(0)],
            clocks: vec![0.0],
        };
        let e = b(BinOp::Div, Expr::Int(1), Expr::Var(0));
        assert_eq!(e.eval(&env), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn crossing_respects_rate() {
        // rate 2, x = 1, x >= 3 crosses after (3 - 1) / 2
        let env = Vals {
            vars: vec![],
            clocks: vec![0.0, 1.0],
        };
        let e = b(BinOp::Ge, Expr::Clock(1), Expr::Int(3));
        let t = e.crossing(&env, &[1.0, 2.0]).unwrap().unwrap();
        assert_eq!(t, 1.0);
        assert!(!e.holds_after(&env, &[1.0, 2.0], 0.999).unwrap());
        assert!(e.holds_after(&env, &[1.0, 2.0], 1.0).unwrap());
    }

    #[test]
    fn products_of_clocks_are_not_linear() {
        let e = b(BinOp::Le, b(BinOp::Mul, Expr::Clock(1), Expr::Clock(2)), Expr::Int(1));
        assert!(e.check_linear().is_err());
        let ok = b(BinOp::Le, b(BinOp::Mul, Expr::Int(2), Expr::Clock(2)), Expr::Var(0));
        assert!(ok.check_linear().is_ok());
    }
}

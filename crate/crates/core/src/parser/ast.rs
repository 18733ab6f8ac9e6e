//! Surface syntax trees, before name resolution.

use std::fmt;

use crate::model::{BinOp, UnOp, VarType};

/// Source position (1-based). Positions never take part in structural
/// equality, so a reprinted tree compares equal to the original.
#[derive(Clone, Copy, Debug, Default, PartialOrd, Ord, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(line: usize, col: usize) -> Self {
        Pos { line, col }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: String,
    pub pos: Pos,
}

/// `x`, `T.T3`, `Train(0).Cross`.
#[derive(Clone, Debug, PartialEq)]
pub struct Name {
    pub instance: Option<InstanceRef>,
    pub ident: Ident,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceRef {
    pub template: Ident,
    pub args: Option<Vec<SExpr>>,
}

impl Name {
    pub fn pos(&self) -> Pos {
        self.instance.as_ref().map(|i| i.template.pos).unwrap_or(self.ident.pos)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Name(Name),
    Unary(UnOp, Box<SExpr>),
    Binary(BinOp, Box<SExpr>, Box<SExpr>),
    Cond(Box<SExpr>, Box<SExpr>, Box<SExpr>),
}

impl SExpr {
    pub fn binary(op: BinOp, l: SExpr, r: SExpr) -> SExpr {
        SExpr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Position of the leftmost name, if any.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            SExpr::Name(n) => Some(n.pos()),
            SExpr::Unary(_, e) => e.pos(),
            SExpr::Binary(_, l, r) => l.pos().or_else(|| r.pos()),
            SExpr::Cond(c, a, b) => c.pos().or_else(|| a.pos()).or_else(|| b.pos()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    Clock(Vec<Ident>),
    Var {
        ty: VarType,
        name: Ident,
        init: Option<SExpr>,
    },
    Const {
        ty: VarType,
        name: Ident,
        value: SExpr,
    },
    Chan {
        broadcast: bool,
        names: Vec<Ident>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: Ident,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocationAst {
    pub name: Ident,
    pub invariant: Option<SExpr>,
    pub rates: Vec<(Ident, SExpr)>,
    pub exprate: Option<SExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SyncAst {
    Output(Ident),
    Input(Ident),
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateAst {
    pub target: Ident,
    pub value: SExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchAst {
    pub target: Ident,
    pub weight: Option<SExpr>,
    pub updates: Vec<UpdateAst>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeAst {
    pub source: Ident,
    pub guard: Option<SExpr>,
    pub sync: Option<SyncAst>,
    pub weight: Option<SExpr>,
    /// Single-target edges carry one branch and `branching == false`.
    pub branches: Vec<BranchAst>,
    pub branching: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateAst {
    pub name: Ident,
    pub params: Vec<Param>,
    pub decls: Vec<Decl>,
    pub locations: Vec<LocationAst>,
    pub init: Option<Ident>,
    pub edges: Vec<EdgeAst>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemEntry {
    pub template: Ident,
    pub args: Option<Vec<SExpr>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelAst {
    pub decls: Vec<Decl>,
    pub templates: Vec<TemplateAst>,
    pub system: Vec<SystemEntry>,
}

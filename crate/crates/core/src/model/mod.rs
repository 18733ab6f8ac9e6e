//! Networks of priced timed automata.

mod build;
pub mod deps;
pub mod expr;
pub mod validate;

pub use build::{build_network, Resolver};
pub use deps::DependencyMatrix;
pub use expr::{Affine, BinOp, ClockId, Env, EvalError, Expr, Symbol, UnOp, Value, VarId, TAU};
pub use validate::{validate, Diagnostic, Severity};

use crate::parser::{self, Pos};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarType {
    Int,
    Double,
    Bool,
}

#[derive(Clone, Debug)]
pub struct VarDecl {
    pub name: String,
    pub ty: VarType,
    pub init: Value,
}

#[derive(Clone, Debug)]
pub struct ClockDecl {
    pub name: String,
    /// Process owning a template-local clock.
    pub owner: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Location {
    pub name: String,
    pub invariant: Option<Expr>,
    pub rates: Vec<(ClockId, Expr)>,
    pub exp_rate: Option<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sync {
    Internal,
    Output(usize),
    Input(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assign {
    Var(VarId),
    Clock(ClockId),
}

#[derive(Clone, Debug)]
pub struct Update {
    pub target: Assign,
    pub value: Expr,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub weight: Expr,
    pub updates: Vec<Update>,
    pub target: usize,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub source: usize,
    pub guard: Option<Expr>,
    pub sync: Sync,
    /// Relative weight when several edges are enabled at once.
    pub weight: Expr,
    pub branches: Vec<Branch>,
    pub pos: Pos,
}

impl Edge {
    pub fn is_active(&self) -> bool {
        !matches!(self.sync, Sync::Input(_))
    }
}

#[derive(Clone, Debug)]
pub struct Process {
    /// Instance name, e.g. `Train(3)`.
    pub name: String,
    pub template: String,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub initial: usize,
    /// Edge indices leaving each location.
    pub outgoing: Vec<Vec<usize>>,
    /// Parameters and local constants.
    pub constants: Vec<(String, Value)>,
}

impl Process {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }
}

/// An instantiated, name-resolved network. Immutable once built.
#[derive(Clone, Debug)]
pub struct Network {
    pub clocks: Vec<ClockDecl>,
    pub vars: Vec<VarDecl>,
    pub channels: Vec<String>,
    pub processes: Vec<Process>,
    pub constants: Vec<(String, Value)>,
    /// Clocks that carry a rate declaration somewhere (cost clocks).
    pub priced: Vec<bool>,
}

impl Network {
    pub fn process_index(&self, name: &str) -> Option<usize> {
        self.processes.iter().position(|p| p.name == name)
    }

    pub fn clock_index(&self, name: &str) -> Option<ClockId> {
        self.clocks.iter().position(|c| c.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Effective clock rates for the given location vector. A clock's rate
    /// is the sum of the declarations made by the current locations, or 1
    /// when none declares it.
    pub fn rates(&self, env: &impl Env, locations: &[usize]) -> Result<Vec<f64>, EvalError> {
        let mut rates = vec![None::<f64>; self.clocks.len()];
        for (p, proc_) in self.processes.iter().enumerate() {
            for (c, e) in &proc_.locations[locations[p]].rates {
                let r = e.eval_f64(env)?;
                let slot = &mut rates[*c];
                *slot = Some(slot.unwrap_or(0.0) + r);
            }
        }
        rates[TAU] = Some(1.0);
        Ok(rates.into_iter().map(|r| r.unwrap_or(1.0)).collect())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] parser::ParseError),
    #[error("{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

/// Parse, instantiate and validate a model. Warnings are dropped.
pub fn load_model(text: &str) -> Result<Network, ModelError> {
    let ast = parser::parse_model(text)?;
    let net = build_network(&ast).map_err(ModelError::Invalid)?;
    let errors: Vec<_> = validate(&net)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(net)
    } else {
        Err(ModelError::Invalid(errors))
    }
}

/// Parse a query and resolve its names against `net`.
pub fn load_query(net: &Network, text: &str) -> Result<crate::query::Query<Expr, ClockId>, ModelError> {
    let q = parser::parse_query(text)?;
    Resolver::new(net).query(&q).map_err(|d| ModelError::Invalid(vec![d]))
}

//! Instantiation of templates and name resolution.

use std::collections::HashMap;

use super::*;
use crate::parser::{Decl, ModelAst, Name, SExpr, SyncAst, TemplateAst};
use crate::query::Query;

impl VarType {
    /// Value stored when `v` is assigned to a variable of this type.
    pub fn coerce(self, v: Value) -> Result<Value, EvalError> {
        match (self, v) {
            (VarType::Int, Value::Int(_)) | (VarType::Double, Value::Real(_)) | (VarType::Bool, Value::Bool(_)) => {
                Ok(v)
            }
            (VarType::Double, Value::Int(i)) => Ok(Value::Real(i as f64)),
            (VarType::Int, Value::Real(r)) if r.fract() == 0.0 && r.abs() < 9.0e15 => Ok(Value::Int(r as i64)),
            (VarType::Int, Value::Real(_)) => Err(EvalError::Type("non-integral value assigned to an int")),
            _ => Err(EvalError::Type("boolean and numeric values do not mix")),
        }
    }

    fn default_value(self) -> Value {
        match self {
            VarType::Int => Value::Int(0),
            VarType::Double => Value::Real(0.0),
            VarType::Bool => Value::Bool(false),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Sym {
    Const(Value),
    Var(VarId),
    Clock(ClockId),
}

/// Resolves surface names against a network, either from inside a process
/// (template-local names first) or from the outside (queries).
pub struct Resolver {
    globals: HashMap<String, Sym>,
    locals: Vec<HashMap<String, Sym>>,
    instances: HashMap<String, usize>,
    locations: Vec<HashMap<String, usize>>,
}

fn err(pos: Option<Pos>, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(pos, msg)
}

impl Resolver {
    pub fn new(net: &Network) -> Self {
        let mut globals = HashMap::new();
        let mut locals = vec![HashMap::new(); net.processes.len()];
        for (n, v) in &net.constants {
            globals.insert(n.clone(), Sym::Const(*v));
        }
        let mut insert = |owner: Option<usize>, full: &str, sym: Sym| match owner {
            None => {
                globals.insert(full.to_string(), sym);
            }
            Some(p) => {
                let short = &full[net.processes[p].name.len() + 1..];
                locals[p].insert(short.to_string(), sym);
            }
        };
        for (i, v) in net.vars.iter().enumerate() {
            let owner = net
                .processes
                .iter()
                .position(|p| v.name.starts_with(&format!("{}.", p.name)));
            insert(owner, &v.name, Sym::Var(i));
        }
        for (i, c) in net.clocks.iter().enumerate() {
            insert(c.owner, &c.name, Sym::Clock(i));
        }
        for (p, proc_) in net.processes.iter().enumerate() {
            for (n, v) in &proc_.constants {
                locals[p].insert(n.clone(), Sym::Const(*v));
            }
        }
        Resolver {
            globals,
            locals,
            instances: net
                .processes
                .iter()
                .enumerate()
                .map(|(i, p)| (p.name.clone(), i))
                .collect(),
            locations: net
                .processes
                .iter()
                .map(|p| {
                    p.locations
                        .iter()
                        .enumerate()
                        .map(|(i, l)| (l.name.clone(), i))
                        .collect()
                })
                .collect(),
        }
    }

    fn sym_expr(s: Sym) -> Expr {
        match s {
            Sym::Const(Value::Int(i)) => Expr::Int(i),
            Sym::Const(Value::Real(r)) => Expr::Real(r),
            Sym::Const(Value::Bool(b)) => Expr::Bool(b),
            Sym::Var(v) => Expr::Var(v),
            Sym::Clock(c) => Expr::Clock(c),
        }
    }

    fn instance(&self, scope: Option<usize>, name: &Name) -> Result<Option<usize>, Diagnostic> {
        let Some(inst) = &name.instance else {
            return Ok(None);
        };
        let mut key = inst.template.name.clone();
        if let Some(args) = &inst.args {
            let vals = args
                .iter()
                .map(|a| self.constant(scope, a).map(|v| v.to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            key = format!("{key}({})", vals.join(", "));
        }
        self.instances
            .get(&key)
            .copied()
            .map(Some)
            .ok_or_else(|| err(Some(name.pos()), format!("unknown process `{key}`")))
    }

    fn lookup(&self, scope: Option<usize>, name: &Name) -> Result<Expr, Diagnostic> {
        let id = &name.ident.name;
        if let Some(p) = self.instance(scope, name)? {
            if let Some(&l) = self.locations[p].get(id) {
                return Ok(Expr::At {
                    process: p,
                    location: l,
                });
            }
            return self.locals[p].get(id).map(|s| Self::sym_expr(*s)).ok_or_else(|| {
                err(
                    Some(name.ident.pos),
                    format!("process has no location or member `{id}`"),
                )
            });
        }
        if let Some(p) = scope {
            if let Some(s) = self.locals[p].get(id) {
                return Ok(Self::sym_expr(*s));
            }
        }
        if let Some(s) = self.globals.get(id) {
            return Ok(Self::sym_expr(*s));
        }
        if scope.is_none() {
            let at: Vec<_> = self
                .locations
                .iter()
                .enumerate()
                .filter_map(|(p, m)| m.get(id).map(|&l| (p, l)))
                .collect();
            if at.len() == 1 {
                return Ok(Expr::At {
                    process: at[0].0,
                    location: at[0].1,
                });
            }
            let members: Vec<_> = self.locals.iter().filter_map(|m| m.get(id)).collect();
            if at.is_empty() && members.len() == 1 {
                return Ok(Self::sym_expr(*members[0]));
            }
            if at.len() + members.len() > 1 {
                return Err(err(
                    Some(name.pos()),
                    format!("`{id}` is ambiguous; qualify it with a process name"),
                ));
            }
        }
        Err(err(Some(name.pos()), format!("undeclared name `{id}`")))
    }

    pub fn expr(&self, scope: Option<usize>, e: &SExpr) -> Result<Expr, Diagnostic> {
        Ok(match e {
            SExpr::Int(i) => Expr::Int(*i),
            SExpr::Real(r) => Expr::Real(*r),
            SExpr::Bool(b) => Expr::Bool(*b),
            SExpr::Name(n) => self.lookup(scope, n)?,
            SExpr::Unary(op, a) => Expr::Unary(*op, Box::new(self.expr(scope, a)?)),
            SExpr::Binary(op, a, b) => Expr::binary(*op, self.expr(scope, a)?, self.expr(scope, b)?),
            SExpr::Cond(c, a, b) => Expr::Cond(
                Box::new(self.expr(scope, c)?),
                Box::new(self.expr(scope, a)?),
                Box::new(self.expr(scope, b)?),
            ),
        })
    }

    pub fn constant(&self, scope: Option<usize>, e: &SExpr) -> Result<Value, Diagnostic> {
        self.expr(scope, e)?
            .constant()
            .ok_or_else(|| err(e.pos(), "expected a constant expression"))
    }

    pub fn clock(&self, scope: Option<usize>, name: &Name) -> Result<ClockId, Diagnostic> {
        match self.lookup(scope, name)? {
            Expr::Clock(c) => Ok(c),
            _ => Err(err(Some(name.pos()), format!("`{}` is not a clock", name.ident.name))),
        }
    }

    pub fn query(&self, q: &Query<SExpr, Name>) -> Result<Query<Expr, ClockId>, Diagnostic> {
        q.try_map(&mut |e| self.expr(None, e), &mut |k| self.clock(None, k))
    }
}

struct Instance<'a> {
    template: &'a TemplateAst,
    process: usize,
}

pub fn build_network(ast: &ModelAst) -> Result<Network, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut net = Network {
        clocks: vec![ClockDecl {
            name: "tau".into(),
            owner: None,
        }],
        vars: Vec::new(),
        channels: Vec::new(),
        processes: Vec::new(),
        constants: Vec::new(),
        priced: Vec::new(),
    };
    let mut broadcast = Vec::new();
    let mut taken: Vec<String> = vec!["tau".into()];

    macro_rules! fresh {
        ($ident:expr, $taken:expr) => {{
            let ok = !$taken.contains(&$ident.name);
            if ok {
                $taken.push($ident.name.clone());
            } else {
                errors.push(err(Some($ident.pos), format!("`{}` is declared twice", $ident.name)));
            }
            ok
        }};
    }

    for d in &ast.decls {
        match d {
            Decl::Clock(names) => {
                for n in names {
                    if fresh!(n, taken) {
                        net.clocks.push(ClockDecl {
                            name: n.name.clone(),
                            owner: None,
                        });
                    }
                }
            }
            Decl::Chan { broadcast: b, names } => {
                for n in names {
                    if fresh!(n, taken) {
                        net.channels.push(n.name.clone());
                        broadcast.push(*b);
                    }
                }
            }
            Decl::Const { ty, name, value }
            | Decl::Var {
                ty,
                name,
                init: Some(value),
            } => {
                let r = Resolver::new(&net);
                let v = r
                    .constant(None, value)
                    .and_then(|v| ty.coerce(v).map_err(|e| err(Some(name.pos), e.to_string())));
                match v {
                    Ok(v) if fresh!(name, taken) => {
                        if matches!(d, Decl::Const { .. }) {
                            net.constants.push((name.name.clone(), v));
                        } else {
                            net.vars.push(VarDecl {
                                name: name.name.clone(),
                                ty: *ty,
                                init: v,
                            });
                        }
                    }
                    Ok(_) => {}
                    Err(e) => errors.push(e),
                }
            }
            Decl::Var { ty, name, init: None } => {
                if fresh!(name, taken) {
                    net.vars.push(VarDecl {
                        name: name.name.clone(),
                        ty: *ty,
                        init: ty.default_value(),
                    });
                }
            }
        }
    }

    let mut template_names: Vec<String> = Vec::new();
    for t in &ast.templates {
        fresh!(t.name, template_names);
    }

    // First pass: allocate every process's names so that expressions may
    // refer across processes.
    let mut instances = Vec::new();
    for entry in &ast.system {
        let Some(t) = ast.templates.iter().find(|t| t.name.name == entry.template.name) else {
            errors.push(err(
                Some(entry.template.pos),
                format!("unknown template `{}`", entry.template.name),
            ));
            continue;
        };
        let r = Resolver::new(&net);
        let args: Vec<Value> = match entry.args.iter().flatten().map(|a| r.constant(None, a)).collect() {
            Ok(a) => a,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        if args.len() != t.params.len() {
            errors.push(err(
                Some(entry.template.pos),
                format!(
                    "template `{}` takes {} argument(s), got {}",
                    t.name.name,
                    t.params.len(),
                    args.len()
                ),
            ));
            continue;
        }
        if let Some(a) = args.iter().find(|a| !matches!(a, Value::Int(_))) {
            errors.push(err(
                Some(entry.template.pos),
                format!("template arguments must be integers, got {a}"),
            ));
            continue;
        }
        let name = if entry.args.is_some() {
            format!(
                "{}({})",
                t.name.name,
                args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
            )
        } else {
            t.name.name.clone()
        };
        if net.processes.iter().any(|p| p.name == name) {
            errors.push(err(
                Some(entry.template.pos),
                format!("process `{name}` instantiated twice"),
            ));
            continue;
        }
        let p = net.processes.len();
        let mut local_taken: Vec<String> = Vec::new();
        let mut constants = Vec::new();
        for (param, v) in t.params.iter().zip(&args) {
            if fresh!(param.name, local_taken) {
                constants.push((param.name.name.clone(), *v));
            }
        }
        net.processes.push(Process {
            name: name.clone(),
            template: t.name.name.clone(),
            locations: Vec::new(),
            edges: Vec::new(),
            initial: 0,
            outgoing: Vec::new(),
            constants,
        });
        for d in &t.decls {
            match d {
                Decl::Clock(names) => {
                    for n in names {
                        if fresh!(n, local_taken) {
                            net.clocks.push(ClockDecl {
                                name: format!("{name}.{}", n.name),
                                owner: Some(p),
                            });
                        }
                    }
                }
                Decl::Chan { names, .. } => errors.push(err(Some(names[0].pos), "channels must be declared globally")),
                Decl::Const { ty, name: n, value }
                | Decl::Var {
                    ty,
                    name: n,
                    init: Some(value),
                } => {
                    let r = Resolver::new(&net);
                    let v = r
                        .constant(Some(p), value)
                        .and_then(|v| ty.coerce(v).map_err(|e| err(Some(n.pos), e.to_string())));
                    match v {
                        Ok(v) if fresh!(n, local_taken) => {
                            if matches!(d, Decl::Const { .. }) {
                                net.processes[p].constants.push((n.name.clone(), v));
                            } else {
                                net.vars.push(VarDecl {
                                    name: format!("{name}.{}", n.name),
                                    ty: *ty,
                                    init: v,
                                });
                            }
                        }
                        Ok(_) => {}
                        Err(e) => errors.push(e),
                    }
                }
                Decl::Var {
                    ty,
                    name: n,
                    init: None,
                } => {
                    if fresh!(n, local_taken) {
                        net.vars.push(VarDecl {
                            name: format!("{name}.{}", n.name),
                            ty: *ty,
                            init: ty.default_value(),
                        });
                    }
                }
            }
        }
        let mut loc_taken: Vec<String> = Vec::new();
        for l in &t.locations {
            fresh!(l.name, loc_taken);
            net.processes[p].locations.push(Location {
                name: l.name.name.clone(),
                invariant: None,
                rates: Vec::new(),
                exp_rate: None,
                pos: l.name.pos,
            });
        }
        instances.push(Instance {
            template: t,
            process: p,
        });
    }

    // Second pass: expressions.
    let r = Resolver::new(&net);
    for inst in &instances {
        let p = inst.process;
        let t = inst.template;
        let scope = Some(p);
        let expr = |e: &SExpr, errors: &mut Vec<Diagnostic>| match r.expr(scope, e) {
            Ok(x) => Some(x),
            Err(d) => {
                errors.push(d);
                None
            }
        };
        let loc_index = |name: &crate::parser::Ident, errors: &mut Vec<Diagnostic>| {
            let i = t.locations.iter().position(|l| l.name.name == name.name);
            if i.is_none() {
                errors.push(err(Some(name.pos), format!("unknown location `{}`", name.name)));
            }
            i
        };
        match &t.init {
            Some(i) => {
                if let Some(i) = loc_index(i, &mut errors) {
                    net.processes[p].initial = i;
                }
            }
            None => errors.push(err(
                Some(t.name.pos),
                format!("template `{}` has no initial location", t.name.name),
            )),
        }
        for (li, l) in t.locations.iter().enumerate() {
            let invariant = l.invariant.as_ref().and_then(|e| expr(e, &mut errors));
            let exp_rate = l.exprate.as_ref().and_then(|e| expr(e, &mut errors));
            let mut rates = Vec::new();
            for (c, e) in &l.rates {
                let clock = r.clock(
                    scope,
                    &Name {
                        instance: None,
                        ident: c.clone(),
                    },
                );
                match (clock, expr(e, &mut errors)) {
                    (Ok(TAU), _) => errors.push(err(Some(c.pos), "the rate of `tau` is fixed")),
                    (Ok(c), Some(e)) => rates.push((c, e)),
                    (Err(d), _) => errors.push(d),
                    _ => {}
                }
            }
            let loc = &mut net.processes[p].locations[li];
            loc.invariant = invariant;
            loc.exp_rate = exp_rate;
            loc.rates = rates;
        }
        for e in &t.edges {
            let Some(source) = loc_index(&e.source, &mut errors) else {
                continue;
            };
            let guard = e.guard.as_ref().and_then(|g| expr(g, &mut errors));
            let weight = match &e.weight {
                Some(w) => expr(w, &mut errors).unwrap_or(Expr::Int(1)),
                None => Expr::Int(1),
            };
            let sync = match &e.sync {
                None => Sync::Internal,
                Some(SyncAst::Output(c) | SyncAst::Input(c)) => match net.channels.iter().position(|n| *n == c.name) {
                    None => {
                        errors.push(err(Some(c.pos), format!("undeclared channel `{}`", c.name)));
                        Sync::Internal
                    }
                    Some(i) => {
                        if !broadcast[i] {
                            errors.push(err(
                                Some(c.pos),
                                format!("channel `{}` must be declared `broadcast chan`", c.name),
                            ));
                        }
                        if matches!(e.sync, Some(SyncAst::Output(_))) {
                            Sync::Output(i)
                        } else {
                            Sync::Input(i)
                        }
                    }
                },
            };
            let mut branches = Vec::new();
            for b in &e.branches {
                let Some(target) = loc_index(&b.target, &mut errors) else {
                    continue;
                };
                let weight = match &b.weight {
                    Some(w) => expr(w, &mut errors).unwrap_or(Expr::Int(1)),
                    None => Expr::Int(1),
                };
                let mut updates = Vec::new();
                for u in &b.updates {
                    let target = r.lookup(
                        scope,
                        &Name {
                            instance: None,
                            ident: u.target.clone(),
                        },
                    );
                    let target = match target {
                        Ok(Expr::Var(v)) => Assign::Var(v),
                        Ok(Expr::Clock(TAU)) => {
                            errors.push(err(Some(u.target.pos), "`tau` cannot be assigned"));
                            continue;
                        }
                        Ok(Expr::Clock(c)) => Assign::Clock(c),
                        Ok(_) => {
                            errors.push(err(
                                Some(u.target.pos),
                                format!("`{}` cannot be assigned", u.target.name),
                            ));
                            continue;
                        }
                        Err(d) => {
                            errors.push(d);
                            continue;
                        }
                    };
                    if let Some(value) = expr(&u.value, &mut errors) {
                        updates.push(Update { target, value });
                    }
                }
                branches.push(Branch {
                    weight,
                    updates,
                    target,
                });
            }
            net.processes[p].edges.push(Edge {
                source,
                guard,
                sync,
                weight,
                branches,
                pos: e.source.pos,
            });
        }
        let proc_ = &mut net.processes[p];
        proc_.outgoing = vec![Vec::new(); proc_.locations.len()];
        for (i, e) in proc_.edges.iter().enumerate() {
            proc_.outgoing[e.source].push(i);
        }
    }

    net.priced = vec![false; net.clocks.len()];
    for p in &net.processes {
        for l in &p.locations {
            for (c, _) in &l.rates {
                net.priced[*c] = true;
            }
        }
    }

    if errors.is_empty() {
        Ok(net)
    } else {
        Err(errors)
    }
}

//! Canonical text for surface trees. Output reparses to an equal tree.

use std::fmt::Write;

use super::*;
use crate::model::{UnOp, VarType};
use crate::query::*;

fn num(r: f64) -> String {
    // Keep a decimal point so the literal stays real.
    let s = format!("{r:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Bounds and thresholds are always real, so no decimal point is needed.
fn plain(r: f64) -> String {
    format!("{r}")
}

pub fn print_name(n: &Name) -> String {
    let mut s = String::new();
    if let Some(inst) = &n.instance {
        s.push_str(&inst.template.name);
        if let Some(args) = &inst.args {
            s.push('(');
            s.push_str(&args.iter().map(print_expr).collect::<Vec<_>>().join(", "));
            s.push(')');
        }
        s.push('.');
    }
    s.push_str(&n.ident.name);
    s
}

pub fn print_expr(e: &SExpr) -> String {
    match e {
        SExpr::Int(i) => i.to_string(),
        SExpr::Real(r) => num(*r),
        SExpr::Bool(b) => b.to_string(),
        SExpr::Name(n) => print_name(n),
        SExpr::Unary(UnOp::Neg, e) => format!("-({})", print_expr(e)),
        SExpr::Unary(UnOp::Not, e) => format!("!({})", print_expr(e)),
        SExpr::Binary(op, l, r) => {
            format!("({} {} {})", print_expr(l), op.symbol(), print_expr(r))
        }
        SExpr::Cond(c, a, b) => format!("({} ? {} : {})", print_expr(c), print_expr(a), print_expr(b)),
    }
}

fn ty(t: VarType) -> &'static str {
    match t {
        VarType::Int => "int",
        VarType::Double => "double",
        VarType::Bool => "bool",
    }
}

fn ids(v: &[Ident]) -> String {
    v.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ")
}

fn decl(out: &mut String, indent: &str, d: &Decl) {
    let _ = match d {
        Decl::Clock(names) => writeln!(out, "{indent}clock {};", ids(names)),
        Decl::Var { ty: t, name, init } => match init {
            Some(e) => writeln!(out, "{indent}{} {} = {};", ty(*t), name.name, print_expr(e)),
            None => writeln!(out, "{indent}{} {};", ty(*t), name.name),
        },
        Decl::Const { ty: t, name, value } => {
            writeln!(out, "{indent}const {} {} = {};", ty(*t), name.name, print_expr(value))
        }
        Decl::Chan { broadcast, names } => writeln!(
            out,
            "{indent}{}chan {};",
            if *broadcast { "broadcast " } else { "" },
            ids(names)
        ),
    };
}

fn updates(u: &[UpdateAst]) -> String {
    u.iter()
        .map(|u| format!("{} = {}", u.target.name, print_expr(&u.value)))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn print_model(m: &ModelAst) -> String {
    let mut out = String::new();
    for d in &m.decls {
        decl(&mut out, "", d);
    }
    for t in &m.templates {
        let params = t
            .params
            .iter()
            .map(|p| format!("const int {}", p.name.name))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "\ntemplate {}({}) {{", t.name.name, params);
        for d in &t.decls {
            decl(&mut out, "    ", d);
        }
        for l in &t.locations {
            if l.invariant.is_none() && l.rates.is_empty() && l.exprate.is_none() {
                let _ = writeln!(out, "    location {};", l.name.name);
                continue;
            }
            let _ = writeln!(out, "    location {} {{", l.name.name);
            if let Some(i) = &l.invariant {
                let _ = writeln!(out, "        invariant {};", print_expr(i));
            }
            for (c, e) in &l.rates {
                let _ = writeln!(out, "        rate {}' == {};", c.name, print_expr(e));
            }
            if let Some(e) = &l.exprate {
                let _ = writeln!(out, "        exprate {};", print_expr(e));
            }
            out.push_str("    }\n");
        }
        if let Some(i) = &t.init {
            let _ = writeln!(out, "    init {};", i.name);
        }
        for e in &t.edges {
            let mut head = String::new();
            if let Some(g) = &e.guard {
                let _ = write!(head, " guard {};", print_expr(g));
            }
            match &e.sync {
                Some(SyncAst::Output(c)) => {
                    let _ = write!(head, " sync {}!;", c.name);
                }
                Some(SyncAst::Input(c)) => {
                    let _ = write!(head, " sync {}?;", c.name);
                }
                None => {}
            }
            if let Some(w) = &e.weight {
                let _ = write!(head, " weight {};", print_expr(w));
            }
            if !e.branching {
                let b = &e.branches[0];
                if !b.updates.is_empty() {
                    let _ = write!(head, " update {};", updates(&b.updates));
                }
                let _ = writeln!(out, "    {} -> {} {{{} }}", e.source.name, b.target.name, head);
                continue;
            }
            let _ = writeln!(out, "    {} -> {{{}", e.source.name, head);
            for b in &e.branches {
                let mut body = String::new();
                if let Some(w) = &b.weight {
                    let _ = write!(body, " weight {};", print_expr(w));
                }
                if !b.updates.is_empty() {
                    let _ = write!(body, " update {};", updates(&b.updates));
                }
                let _ = writeln!(out, "        -> {} {{{} }}", b.target.name, body);
            }
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }
    let entries = m
        .system
        .iter()
        .map(|s| match &s.args {
            Some(a) => format!(
                "{}({})",
                s.template.name,
                a.iter().map(print_expr).collect::<Vec<_>>().join(", ")
            ),
            None => s.template.name.clone(),
        })
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "\nsystem {entries};");
    out
}

fn print_bound(b: &RunBound<Name>) -> String {
    match b {
        RunBound::Time(t) => format!("<={}", plain(*t)),
        RunBound::Cost { clock, limit } => format!("{}<={}", print_name(clock), plain(*limit)),
        RunBound::Steps(n) => format!("#<={n}"),
    }
}

pub fn print_wmtl(w: &Wmtl<SExpr, Name>) -> String {
    match w {
        Wmtl::Atom(e) => print_expr(e),
        Wmtl::Not(a) => format!("!({})", print_wmtl(a)),
        Wmtl::And(a, b) => format!("({} && {})", print_wmtl(a), print_wmtl(b)),
        Wmtl::Or(a, b) => format!("({} || {})", print_wmtl(a), print_wmtl(b)),
        Wmtl::Next(a) => format!("(X {})", print_wmtl(a)),
        Wmtl::Until { clock, bound, lhs, rhs } => {
            if bound.is_infinite() {
                format!("({} U {})", print_wmtl(lhs), print_wmtl(rhs))
            } else {
                format!(
                    "({} U[{}<={}] {})",
                    print_wmtl(lhs),
                    print_name(clock),
                    plain(*bound),
                    print_wmtl(rhs)
                )
            }
        }
    }
}

fn print_experiment(x: &Experiment<SExpr, Name>) -> String {
    let body = match &x.prop {
        Property::Path(PathFormula::Eventually(p)) => format!("<> {}", print_expr(p)),
        Property::Path(PathFormula::Globally(p)) => format!("[] {}", print_expr(p)),
        Property::Path(PathFormula::Until(p, q)) => {
            format!("{} U {}", print_expr(p), print_expr(q))
        }
        Property::Wmtl(w) => print_wmtl(w),
    };
    format!("Pr[{}]({})", print_bound(&x.bound), body)
}

pub fn print_query(q: &SurfaceQuery) -> String {
    match q {
        Query::Estimate(x) => print_experiment(x),
        Query::HypTest(x, p) => format!("{} >= {}", print_experiment(x), plain(*p)),
        Query::Compare(a, b) => format!("{} >= {}", print_experiment(a), print_experiment(b)),
        Query::Expect {
            bound,
            runs,
            mode,
            expr,
        } => format!(
            "E[{};{}]({}: {})",
            print_bound(bound),
            runs,
            match mode {
                Extremum::Min => "min",
                Extremum::Max => "max",
            },
            print_expr(expr)
        ),
        Query::Simulate { count, bound, exprs } => format!(
            "simulate {} [{}]{{{}}}",
            count,
            print_bound(bound),
            exprs.iter().map(print_expr).collect::<Vec<_>>().join(", ")
        ),
    }
}

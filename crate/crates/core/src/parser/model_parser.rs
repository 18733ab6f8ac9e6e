use super::lexer::Tok;
use super::*;
use crate::model::VarType;

pub fn parse_model(src: &str) -> Result<ModelAst, ParseError> {
    let mut c = Cursor::new(src, false)?;
    let mut decls = Vec::new();
    let mut templates = Vec::new();
    loop {
        if c.is_kw("system") {
            break;
        }
        if c.is_kw("template") {
            templates.push(template(&mut c)?);
        } else if let Some(d) = decl(&mut c)? {
            decls.push(d);
        } else {
            return Err(c.unexpected("a declaration, `template` or `system`"));
        }
    }
    c.expect_kw("system")?;
    let mut system = Vec::new();
    if *c.peek() != Tok::Semi {
        loop {
            let template = c.ident("a template name")?;
            let args = if c.eat(&Tok::LParen) {
                let mut args = Vec::new();
                if *c.peek() != Tok::RParen {
                    loop {
                        args.push(c.expr()?);
                        if !c.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                c.expect(&Tok::RParen)?;
                Some(args)
            } else {
                None
            };
            system.push(SystemEntry { template, args });
            if !c.eat(&Tok::Comma) {
                break;
            }
        }
    }
    c.expect(&Tok::Semi)?;
    c.expect_eof()?;
    Ok(ModelAst {
        decls,
        templates,
        system,
    })
}

fn var_type(c: &mut Cursor) -> Option<VarType> {
    let ty = if c.is_kw("int") {
        VarType::Int
    } else if c.is_kw("double") {
        VarType::Double
    } else if c.is_kw("bool") {
        VarType::Bool
    } else {
        return None;
    };
    c.next();
    Some(ty)
}

fn ident_list(c: &mut Cursor, what: &str) -> Result<Vec<Ident>, ParseError> {
    let mut out = vec![c.ident(what)?];
    while c.eat(&Tok::Comma) {
        out.push(c.ident(what)?);
    }
    Ok(out)
}

fn decl(c: &mut Cursor) -> Result<Option<Decl>, ParseError> {
    let d = if c.eat_kw("clock") {
        Decl::Clock(ident_list(c, "a clock name")?)
    } else if c.eat_kw("const") {
        let ty = var_type(c).ok_or_else(|| c.unexpected("a type"))?;
        let name = c.ident("a constant name")?;
        c.expect(&Tok::Assign)?;
        let value = c.expr()?;
        Decl::Const { ty, name, value }
    } else if c.eat_kw("broadcast") {
        c.expect_kw("chan")?;
        Decl::Chan {
            broadcast: true,
            names: ident_list(c, "a channel name")?,
        }
    } else if c.eat_kw("chan") {
        Decl::Chan {
            broadcast: false,
            names: ident_list(c, "a channel name")?,
        }
    } else if let Some(ty) = var_type(c) {
        let name = c.ident("a variable name")?;
        let init = if c.eat(&Tok::Assign) { Some(c.expr()?) } else { None };
        Decl::Var { ty, name, init }
    } else {
        return Ok(None);
    };
    c.expect(&Tok::Semi)?;
    Ok(Some(d))
}

fn template(c: &mut Cursor) -> Result<TemplateAst, ParseError> {
    c.expect_kw("template")?;
    let name = c.ident("a template name")?;
    c.expect(&Tok::LParen)?;
    let mut params = Vec::new();
    if *c.peek() != Tok::RParen {
        loop {
            c.eat_kw("const");
            c.expect_kw("int")?;
            params.push(Param {
                name: c.ident("a parameter name")?,
            });
            if !c.eat(&Tok::Comma) {
                break;
            }
        }
    }
    c.expect(&Tok::RParen)?;
    c.expect(&Tok::LBrace)?;
    let mut t = TemplateAst {
        name,
        params,
        decls: Vec::new(),
        locations: Vec::new(),
        init: None,
        edges: Vec::new(),
    };
    while !c.eat(&Tok::RBrace) {
        if c.eat_kw("location") {
            t.locations.push(location(c)?);
        } else if c.eat_kw("init") {
            if t.init.is_some() {
                return Err(c.error("duplicate `init`"));
            }
            t.init = Some(c.ident("a location name")?);
            c.expect(&Tok::Semi)?;
        } else if let Some(d) = decl(c)? {
            t.decls.push(d);
        } else if c.at_ident() {
            t.edges.push(edge(c)?);
        } else {
            return Err(c.unclosed(c.unexpected("a location, edge, declaration or `}`"), &Tok::RBrace));
        }
    }
    Ok(t)
}

fn location(c: &mut Cursor) -> Result<LocationAst, ParseError> {
    let mut l = LocationAst {
        name: c.ident("a location name")?,
        invariant: None,
        rates: Vec::new(),
        exprate: None,
    };
    if c.eat(&Tok::Semi) {
        return Ok(l);
    }
    c.expect(&Tok::LBrace)?;
    while !c.eat(&Tok::RBrace) {
        if c.is_kw("invariant") {
            if l.invariant.is_some() {
                return Err(c.error("duplicate invariant"));
            }
            c.next();
            l.invariant = Some(c.expr()?);
        } else if c.eat_kw("rate") {
            let clock = c.ident("a clock name")?;
            c.expect(&Tok::Prime)?;
            c.expect(&Tok::EqEq)?;
            l.rates.push((clock, c.expr()?));
        } else if c.is_kw("exprate") {
            if l.exprate.is_some() {
                return Err(c.error("duplicate exprate"));
            }
            c.next();
            l.exprate = Some(c.expr()?);
        } else {
            return Err(c.unclosed(c.unexpected("`invariant`, `rate`, `exprate` or `}`"), &Tok::RBrace));
        }
        c.expect(&Tok::Semi)?;
    }
    Ok(l)
}

struct Labels {
    guard: Option<SExpr>,
    sync: Option<SyncAst>,
    weight: Option<SExpr>,
    updates: Option<Vec<UpdateAst>>,
}

/// Reads `guard`, `sync`, `weight` and `update` clauses, those allowed by
/// the flags, until something else shows up.
fn labels(c: &mut Cursor, header: bool, body: bool) -> Result<Labels, ParseError> {
    let mut l = Labels {
        guard: None,
        sync: None,
        weight: None,
        updates: None,
    };
    loop {
        if header && c.is_kw("guard") {
            if l.guard.is_some() {
                return Err(c.error("duplicate `guard`"));
            }
            c.next();
            l.guard = Some(c.expr()?);
        } else if header && c.is_kw("sync") {
            if l.sync.is_some() {
                return Err(c.error("duplicate `sync`"));
            }
            c.next();
            let ch = c.ident("a channel name")?;
            l.sync = Some(if c.eat(&Tok::Bang) {
                SyncAst::Output(ch)
            } else if c.eat(&Tok::Question) {
                SyncAst::Input(ch)
            } else {
                return Err(c.unexpected("`!` or `?`"));
            });
        } else if c.is_kw("weight") {
            if l.weight.is_some() {
                return Err(c.error("duplicate `weight`"));
            }
            c.next();
            l.weight = Some(c.expr()?);
        } else if body && c.is_kw("update") {
            if l.updates.is_some() {
                return Err(c.error("duplicate `update`"));
            }
            c.next();
            let mut ups = Vec::new();
            loop {
                let target = c.ident("an assignment target")?;
                c.expect(&Tok::Assign)?;
                ups.push(UpdateAst {
                    target,
                    value: c.expr()?,
                });
                if !c.eat(&Tok::Comma) {
                    break;
                }
            }
            l.updates = Some(ups);
        } else {
            return Ok(l);
        }
        c.expect(&Tok::Semi)?;
    }
}

fn edge(c: &mut Cursor) -> Result<EdgeAst, ParseError> {
    let source = c.ident("a location name")?;
    c.expect(&Tok::Arrow)?;
    if c.at_ident() {
        let target = c.ident("a location name")?;
        let l = if c.eat(&Tok::Semi) {
            Labels {
                guard: None,
                sync: None,
                weight: None,
                updates: None,
            }
        } else {
            c.expect(&Tok::LBrace)?;
            let l = labels(c, true, true)?;
            c.expect(&Tok::RBrace)?;
            l
        };
        return Ok(EdgeAst {
            source,
            guard: l.guard,
            sync: l.sync,
            weight: l.weight,
            branches: vec![BranchAst {
                target,
                weight: None,
                updates: l.updates.unwrap_or_default(),
            }],
            branching: false,
        });
    }
    c.expect(&Tok::LBrace)?;
    let head = labels(c, true, false)?;
    let mut branches = Vec::new();
    while c.eat(&Tok::Arrow) {
        let target = c.ident("a location name")?;
        c.expect(&Tok::LBrace)?;
        let l = labels(c, false, true)?;
        c.expect(&Tok::RBrace)?;
        branches.push(BranchAst {
            target,
            weight: l.weight,
            updates: l.updates.unwrap_or_default(),
        });
    }
    if branches.is_empty() {
        return Err(c.unexpected("a branch `-> target { ... }`"));
    }
    c.expect(&Tok::RBrace)?;
    Ok(EdgeAst {
        source,
        guard: head.guard,
        sync: head.sync,
        weight: head.weight,
        branches,
        branching: true,
    })
}

//! Static checks on a built network.

use std::fmt;

use super::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub pos: Option<Pos>,
}

impl Diagnostic {
    pub fn error(pos: Option<Pos>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            pos,
        }
    }

    pub fn warning(pos: Option<Pos>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
            pos,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.pos {
            Some(p) => write!(f, "{kind} at {p}: {}", self.message),
            None => write!(f, "{kind}: {}", self.message),
        }
    }
}

fn negative_constant(e: &Expr) -> bool {
    matches!(e.constant(), Some(v) if v.as_f64().map(|x| x < 0.0).unwrap_or(false))
}

/// Checks that can be decided without running the model. Never fails;
/// problems come back as diagnostics.
pub fn validate(net: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for p in &net.processes {
        let name = &p.name;
        for l in &p.locations {
            let at = Some(l.pos);
            let here = format!("{name}.{}", l.name);
            if let Some(inv) = &l.invariant {
                if inv.check_linear().is_err() {
                    out.push(Diagnostic::error(
                        at,
                        format!("invariant of {here} is not linear in the clocks"),
                    ));
                }
            }
            for (c, e) in &l.rates {
                if e.mentions_clock() {
                    out.push(Diagnostic::error(
                        at,
                        format!("rate of {} in {here} depends on a clock", net.clocks[*c].name),
                    ));
                }
                if negative_constant(e) {
                    out.push(Diagnostic::error(
                        at,
                        format!("rate of {} in {here} is negative", net.clocks[*c].name),
                    ));
                }
            }
            let mut seen = Vec::new();
            for (c, _) in &l.rates {
                if seen.contains(c) {
                    out.push(Diagnostic::error(
                        at,
                        format!("{here} declares the rate of {} twice", net.clocks[*c].name),
                    ));
                }
                seen.push(*c);
            }
            if let Some(e) = &l.exp_rate {
                if e.mentions_clock() {
                    out.push(Diagnostic::error(
                        at,
                        format!("exponential rate of {here} depends on a clock"),
                    ));
                }
                if negative_constant(e) {
                    out.push(Diagnostic::error(at, format!("exponential rate of {here} is negative")));
                }
                if l.invariant.as_ref().is_some_and(|i| i.mentions_clock()) {
                    out.push(Diagnostic::error(
                        at,
                        format!("{here} has both a clock invariant and an exponential rate"),
                    ));
                }
            }
            let li = p.location_index(&l.name).unwrap_or(0);
            let acts = p.outgoing[li].iter().any(|&e| p.edges[e].is_active());
            let bounded = l.invariant.as_ref().is_some_and(|i| i.mentions_clock());
            if acts && !bounded && l.exp_rate.is_none() {
                out.push(Diagnostic::error(
                    at,
                    format!("{here} may delay forever but has no exponential rate to sample with"),
                ));
            }
        }
        for e in &p.edges {
            let at = Some(e.pos);
            let src = &p.locations[e.source].name;
            if let Some(g) = &e.guard {
                if g.check_linear().is_err() {
                    out.push(Diagnostic::error(
                        at,
                        format!("guard on edge from {name}.{src} is not linear in the clocks"),
                    ));
                }
            }
            if e.branches.is_empty() {
                out.push(Diagnostic::error(at, "edge without targets"));
            }
            if negative_constant(&e.weight) {
                out.push(Diagnostic::error(at, "negative edge weight"));
            }
            for b in &e.branches {
                if negative_constant(&b.weight) {
                    out.push(Diagnostic::error(
                        at,
                        format!("negative branch weight on edge from {name}.{src}"),
                    ));
                }
            }
            let all_zero = e
                .branches
                .iter()
                .all(|b| matches!(b.weight.constant(), Some(v) if v.as_f64().ok() == Some(0.0)));
            if !e.branches.is_empty() && all_zero {
                out.push(Diagnostic::error(at, "all branch weights are zero"));
            }
            // Heuristic: an unguarded internal self-loop that resets nothing
            // can fire infinitely often in zero time.
            let zeno = e.is_active()
                && !matches!(e.sync, Sync::Output(_))
                && e.guard.is_none()
                && p.locations[e.source].exp_rate.is_none()
                && e.branches
                    .iter()
                    .all(|b| b.target == e.source && !b.updates.iter().any(|u| matches!(u.target, Assign::Clock(_))));
            if zeno {
                out.push(Diagnostic::warning(
                    at,
                    format!("self-loop on {name}.{src} may be Zeno"),
                ));
            }
        }
    }
    out
}

//! Delay distributions of a single process.
//!
//! Within one location the clocks move linearly, so every guard and
//! invariant changes truth value only at finitely many points. Between them
//! the set of enabled edges is constant; sampling walks those cells.

use rand::Rng;

use super::{SimError, SimState};
use crate::model::{Expr, Network};

fn eval_err(what: &str, p: &str) -> impl FnOnce(crate::model::EvalError) -> SimError {
    let context = format!("{what} of {p}");
    move |source| SimError::Eval { context, source }
}

fn crossings(e: &Expr, state: &SimState, rates: &[f64], out: &mut Vec<f64>) -> Result<(), crate::model::EvalError> {
    let mut atoms = Vec::new();
    e.clock_atoms(&mut atoms);
    for a in atoms {
        if let Some(t) = a.crossing(state, rates)? {
            out.push(t);
        }
    }
    Ok(())
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
}

/// Largest delay for which `inv` keeps holding, or infinity.
pub fn invariant_bound(inv: &Expr, state: &SimState, rates: &[f64]) -> Result<f64, crate::model::EvalError> {
    let mut pts = Vec::new();
    crossings(inv, state, rates, &mut pts)?;
    sort_dedup(&mut pts);
    if !inv.holds_after(state, rates, 0.0)? {
        return Ok(0.0);
    }
    let mut prev = 0.0;
    for &p in &pts {
        if !inv.holds_after(state, rates, (prev + p) / 2.0)? {
            return Ok(prev);
        }
        if !inv.holds_after(state, rates, p)? {
            return Ok(p);
        }
        prev = p;
    }
    if inv.holds_after(state, rates, prev + 1.0)? {
        Ok(f64::INFINITY)
    } else {
        Ok(prev)
    }
}

/// A process's sampled next move, in absolute time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub fire_at: Option<f64>,
    pub edge: Option<usize>,
    /// Latest time the current invariant allows staying.
    pub deadline: f64,
}

/// Piecewise description of when each active edge is enabled.
struct Cells {
    /// Cell boundaries, starting at 0.
    points: Vec<f64>,
    /// Edges enabled exactly at `points[i]`.
    at: Vec<Vec<usize>>,
    /// Edges enabled on the open interval after `points[i]`.
    after: Vec<Vec<usize>>,
    hi: f64,
}

impl Cells {
    fn len_after(&self, i: usize) -> f64 {
        self.points.get(i + 1).copied().unwrap_or(self.hi) - self.points[i]
    }
}

fn cells(
    net: &Network,
    p: usize,
    state: &SimState,
    rates: &[f64],
    hi: f64,
    weights: &[f64],
) -> Result<Cells, SimError> {
    let proc_ = &net.processes[p];
    let loc = state.locations[p];
    let edges: Vec<usize> = proc_.outgoing[loc]
        .iter()
        .copied()
        .filter(|&e| proc_.edges[e].is_active() && weights[e] > 0.0)
        .collect();
    let mut points = vec![0.0];
    for &e in &edges {
        if let Some(g) = &proc_.edges[e].guard {
            crossings(g, state, rates, &mut points).map_err(eval_err("guard", &proc_.name))?;
        }
    }
    points.retain(|&t| t == 0.0 || t < hi);
    sort_dedup(&mut points);
    if hi.is_finite() && hi > 0.0 {
        points.push(hi);
    }
    let enabled = |t: f64| -> Result<Vec<usize>, SimError> {
        let mut out = Vec::new();
        for &e in &edges {
            let ok = match &proc_.edges[e].guard {
                None => true,
                Some(g) => g.holds_after(state, rates, t).map_err(eval_err("guard", &proc_.name))?,
            };
            if ok {
                out.push(e);
            }
        }
        Ok(out)
    };
    let mut at = Vec::with_capacity(points.len());
    let mut after = Vec::with_capacity(points.len());
    for (i, &t) in points.iter().enumerate() {
        at.push(enabled(t)?);
        let next = points.get(i + 1).copied();
        after.push(match next {
            Some(n) => enabled((t + n) / 2.0)?,
            None if hi.is_infinite() => enabled(t + 1.0)?,
            None => Vec::new(),
        });
    }
    Ok(Cells { points, at, after, hi })
}

fn pick<R: Rng + ?Sized>(edges: &[usize], weights: &[f64], rng: &mut R) -> usize {
    if edges.len() == 1 {
        return edges[0];
    }
    let total: f64 = edges.iter().map(|&e| weights[e]).sum();
    let mut u = rng.random::<f64>() * total;
    for &e in edges {
        u -= weights[e];
        if u < 0.0 {
            return e;
        }
    }
    *edges.last().unwrap()
}

/// Sample the delay and edge of process `p` from the current state.
pub fn sample<R: Rng + ?Sized>(
    net: &Network,
    p: usize,
    state: &SimState,
    rates: &[f64],
    rng: &mut R,
) -> Result<Choice, SimError> {
    let proc_ = &net.processes[p];
    let loc = &proc_.locations[state.locations[p]];
    let now = state.time();
    let hi = match &loc.invariant {
        Some(inv) => invariant_bound(inv, state, rates).map_err(eval_err("invariant", &proc_.name))?,
        None => f64::INFINITY,
    };
    let none = Choice {
        fire_at: None,
        edge: None,
        deadline: now + hi,
    };
    if !proc_.outgoing[state.locations[p]]
        .iter()
        .any(|&e| proc_.edges[e].is_active())
    {
        return Ok(none);
    }
    let mut weights = vec![0.0; proc_.edges.len()];
    for &e in &proc_.outgoing[state.locations[p]] {
        weights[e] = proc_.edges[e]
            .weight
            .eval_f64(state)
            .map_err(eval_err("edge weight", &proc_.name))?;
    }
    let c = cells(net, p, state, rates, hi, &weights)?;
    let measure: f64 = (0..c.points.len())
        .filter(|&i| !c.after[i].is_empty())
        .map(|i| c.len_after(i))
        .sum();

    let (t, edges) = if hi.is_finite() {
        if measure > 0.0 {
            let mut u = rng.random::<f64>() * measure;
            let mut found = None;
            for i in 0..c.points.len() {
                if c.after[i].is_empty() {
                    continue;
                }
                let len = c.len_after(i);
                if u < len {
                    found = Some((c.points[i] + u, &c.after[i]));
                    break;
                }
                u -= len;
            }
            // Rounding can leave `u` a hair past the last cell.
            found.unwrap_or_else(|| {
                let i = (0..c.points.len()).rev().find(|&i| !c.after[i].is_empty()).unwrap();
                (c.points[i] + c.len_after(i), &c.after[i])
            })
        } else {
            match (0..c.points.len()).find(|&i| !c.at[i].is_empty()) {
                Some(i) => (c.points[i], &c.at[i]),
                None => return Ok(none),
            }
        }
    } else {
        let any = measure > 0.0 || c.at.iter().any(|a| !a.is_empty());
        let Some(rate) = &loc.exp_rate else {
            if any {
                return Err(SimError::Model(format!(
                    "{}.{} can delay forever but has no exponential rate",
                    proc_.name, loc.name
                )));
            }
            return Ok(none);
        };
        let lambda = rate
            .eval_f64(state)
            .map_err(eval_err("exponential rate", &proc_.name))?;
        if lambda <= 0.0 || measure == 0.0 {
            return Ok(none);
        }
        let mut x = -(1.0 - rng.random::<f64>()).ln() / lambda;
        let mut found = None;
        for i in 0..c.points.len() {
            if c.after[i].is_empty() {
                continue;
            }
            let len = c.len_after(i);
            if x < len {
                found = Some((c.points[i] + x, &c.after[i]));
                break;
            }
            x -= len;
        }
        match found {
            Some(f) => f,
            None => return Ok(none),
        }
    };
    let edge = pick(edges, &weights, rng);
    Ok(Choice {
        fire_at: Some(now + t),
        edge: Some(edge),
        deadline: now + hi,
    })
}

/// `[lo, hi]`: `hi` is how long the invariant allows waiting, `lo` the
/// earliest delay at which some output or internal edge is enabled. `lo`
/// is infinite when no edge ever becomes enabled.
pub fn delay_interval(net: &Network, state: &SimState, p: usize) -> Result<(f64, f64), SimError> {
    let rates = net
        .rates(state, &state.locations)
        .map_err(eval_err("rate", &net.processes[p].name))?;
    let proc_ = &net.processes[p];
    let loc = &proc_.locations[state.locations[p]];
    let hi = match &loc.invariant {
        Some(inv) => invariant_bound(inv, state, &rates).map_err(eval_err("invariant", &proc_.name))?,
        None => f64::INFINITY,
    };
    let weights = vec![1.0; proc_.edges.len()];
    let c = cells(net, p, state, &rates, hi, &weights)?;
    let lo = (0..c.points.len())
        .find_map(|i| {
            if !c.at[i].is_empty() || !c.after[i].is_empty() {
                Some(c.points[i])
            } else {
                None
            }
        })
        .unwrap_or(f64::INFINITY);
    Ok((lo, hi))
}

/// Uniform on a bounded interval, `lo` plus an exponential otherwise.
pub fn sample_delay<R: Rng + ?Sized>(lo: f64, hi: f64, exp_rate: Option<f64>, rng: &mut R) -> Result<f64, SimError> {
    if hi.is_finite() {
        return Ok(lo + rng.random::<f64>() * (hi - lo));
    }
    match exp_rate {
        Some(l) if l > 0.0 => Ok(lo - (1.0 - rng.random::<f64>()).ln() / l),
        _ => Err(SimError::Model(
            "unbounded delay without a positive exponential rate".into(),
        )),
    }
}

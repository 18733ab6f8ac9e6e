//! On-the-fly classification of runs by formula progression.
//!
//! Runs are observed at a finite sequence of samples. A formula holds at
//! sample `i` by the usual pointwise rules; for an until bounded by clock
//! `x`, the witness sample `j` must satisfy `odo_x(j) - odo_x(i) <= d`,
//! where `odo_x` is the total growth of `x` so far (resets do not count).
//! `X φ` looks at the next sample that follows a discrete transition.
//! Anything still undecided when the run ends counts as false.

use crate::model::{ClockId, Expr, Network, TAU};
use crate::query::{PathFormula, Property, Wmtl};
use crate::sim::{Observer, SampleKind, SimError, SimState};

pub type Formula = Wmtl<Expr, ClockId>;

/// Does `odo - reference` stay within an until bound `d`?
pub fn within(elapsed: f64, d: f64) -> bool {
    elapsed <= d + 1e-9 * (1.0 + d.abs())
}

/// Truth of an atomic proposition, snapping clock comparisons that miss
/// their boundary by rounding noise.
pub fn atom_holds(e: &Expr, state: &SimState) -> Result<bool, SimError> {
    let zeros = vec![0.0; state.clocks.len()];
    e.holds_after(state, &zeros, 0.0).map_err(|source| SimError::Eval {
        context: "query predicate".into(),
        source,
    })
}

/// The until encoding of a path formula.
pub fn path_to_wmtl(p: &PathFormula<Expr>) -> Formula {
    let atom = |e: &Expr| Box::new(Wmtl::Atom(e.clone()));
    let until = |lhs, rhs| Wmtl::Until {
        clock: TAU,
        bound: f64::INFINITY,
        lhs,
        rhs,
    };
    match p {
        PathFormula::Eventually(q) => until(Box::new(Wmtl::Atom(Expr::Bool(true))), atom(q)),
        PathFormula::Globally(q) => Wmtl::Not(Box::new(until(
            Box::new(Wmtl::Atom(Expr::Bool(true))),
            Box::new(Wmtl::Atom(Expr::negate(q.clone()))),
        ))),
        PathFormula::Until(p, q) => until(atom(p), atom(q)),
    }
}

pub fn property_to_wmtl(p: &Property<Expr, ClockId>) -> Formula {
    match p {
        Property::Path(p) => path_to_wmtl(p),
        Property::Wmtl(w) => w.clone(),
    }
}

fn collect_atoms<'a>(f: &'a Formula, out: &mut Vec<&'a Expr>) {
    match f {
        Wmtl::Atom(e) => out.push(e),
        Wmtl::Not(a) | Wmtl::Next(a) => collect_atoms(a, out),
        Wmtl::And(a, b) | Wmtl::Or(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
        Wmtl::Until { lhs, rhs, .. } => {
            collect_atoms(lhs, out);
            collect_atoms(rhs, out);
        }
    }
}

/// Delays at which some clock constraint of `f` changes truth value,
/// assuming clocks keep moving at `rates`.
pub fn watch_points(f: &Formula, state: &SimState, rates: &[f64]) -> Result<Vec<f64>, SimError> {
    let mut atoms = Vec::new();
    collect_atoms(f, &mut atoms);
    let mut out = Vec::new();
    let mut cs = Vec::new();
    for a in atoms {
        a.clock_atoms(&mut cs);
    }
    for c in cs {
        if let Some(t) = c.crossing(state, rates).map_err(|source| SimError::Eval {
            context: "query predicate".into(),
            source,
        })? {
            out.push(t);
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    True,
    False,
    Inconclusive,
}

#[derive(Clone, Debug)]
enum Node {
    Atom(Expr),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until {
        clock: ClockId,
        bound: f64,
        lhs: usize,
        rhs: usize,
    },
}

/// Residual obligation on the rest of the run.
#[derive(Clone, Debug, PartialEq)]
enum Res {
    T,
    F,
    /// Node must hold at the next discrete sample.
    Next(usize),
    /// Until node still running, started when its clock's odometer read `r`.
    Active {
        node: usize,
        r: f64,
    },
    Not(Box<Res>),
    And(Vec<Res>),
    Or(Vec<Res>),
}

fn not(r: Res) -> Res {
    match r {
        Res::T => Res::F,
        Res::F => Res::T,
        Res::Not(x) => *x,
        r => Res::Not(Box::new(r)),
    }
}

fn junction(and: bool, parts: Vec<Res>) -> Res {
    let (unit, zero) = if and { (Res::T, Res::F) } else { (Res::F, Res::T) };
    let mut flat: Vec<Res> = Vec::with_capacity(parts.len());
    let push = |r: Res, flat: &mut Vec<Res>| -> bool {
        if r == zero {
            return true;
        }
        if r == unit {
            return false;
        }
        if let Res::Active { node, r: reference } = r {
            for f in flat.iter_mut() {
                if let Res::Active { node: n2, r: r2 } = f {
                    if *n2 == node {
                        *r2 = if and { r2.min(reference) } else { r2.max(reference) };
                        return false;
                    }
                }
            }
        }
        if !flat.contains(&r) {
            flat.push(r);
        }
        false
    };
    for p in parts {
        let nested = match p {
            Res::And(v) if and => v,
            Res::Or(v) if !and => v,
            other => vec![other],
        };
        for r in nested {
            if push(r, &mut flat) {
                return zero;
            }
        }
    }
    match flat.len() {
        0 => unit,
        1 => flat.pop().unwrap(),
        _ if and => Res::And(flat),
        _ => Res::Or(flat),
    }
}

/// Progression monitor for one run.
#[derive(Clone, Debug)]
pub struct Monitor {
    nodes: Vec<Node>,
    root: usize,
    res: Option<Res>,
    decided_at: Option<f64>,
    atoms: Formula,
}

impl Monitor {
    pub fn new(f: &Formula) -> Self {
        let mut nodes = Vec::new();
        let root = Self::lower(f, &mut nodes);
        Monitor {
            nodes,
            root,
            res: None,
            decided_at: None,
            atoms: f.clone(),
        }
    }

    pub fn for_property(p: &Property<Expr, ClockId>) -> Self {
        Self::new(&property_to_wmtl(p))
    }

    fn lower(f: &Formula, nodes: &mut Vec<Node>) -> usize {
        let n = match f {
            Wmtl::Atom(e) => Node::Atom(e.clone()),
            Wmtl::Not(a) => Node::Not(Self::lower(a, nodes)),
            Wmtl::And(a, b) => Node::And(Self::lower(a, nodes), Self::lower(b, nodes)),
            Wmtl::Or(a, b) => Node::Or(Self::lower(a, nodes), Self::lower(b, nodes)),
            Wmtl::Next(a) => Node::Next(Self::lower(a, nodes)),
            Wmtl::Until { clock, bound, lhs, rhs } => Node::Until {
                clock: *clock,
                bound: *bound,
                lhs: Self::lower(lhs, nodes),
                rhs: Self::lower(rhs, nodes),
            },
        };
        nodes.push(n);
        nodes.len() - 1
    }

    /// Obligation that `node` holds at the current sample.
    fn eval(&self, node: usize, s: &SimState) -> Result<Res, SimError> {
        Ok(match &self.nodes[node] {
            Node::Atom(e) => {
                if atom_holds(e, s)? {
                    Res::T
                } else {
                    Res::F
                }
            }
            Node::Not(a) => not(self.eval(*a, s)?),
            Node::And(a, b) => junction(true, vec![self.eval(*a, s)?, self.eval(*b, s)?]),
            Node::Or(a, b) => junction(false, vec![self.eval(*a, s)?, self.eval(*b, s)?]),
            Node::Next(a) => Res::Next(*a),
            Node::Until { clock, .. } => self.unfold(node, s.odometers[*clock], s)?,
        })
    }

    fn unfold(&self, node: usize, r: f64, s: &SimState) -> Result<Res, SimError> {
        let Node::Until { clock, bound, lhs, rhs } = self.nodes[node] else {
            unreachable!()
        };
        if !within(s.odometers[clock] - r, bound) {
            return Ok(Res::F);
        }
        let now = self.eval(rhs, s)?;
        if now == Res::T {
            return Ok(Res::T);
        }
        let hold = junction(true, vec![self.eval(lhs, s)?, Res::Active { node, r }]);
        Ok(junction(false, vec![now, hold]))
    }

    fn step(&self, res: &Res, s: &SimState, disc: bool) -> Result<Res, SimError> {
        Ok(match res {
            Res::T | Res::F => res.clone(),
            Res::Next(n) => {
                if disc {
                    self.eval(*n, s)?
                } else {
                    res.clone()
                }
            }
            Res::Active { node, r } => self.unfold(*node, *r, s)?,
            Res::Not(a) => not(self.step(a, s, disc)?),
            Res::And(v) => junction(true, v.iter().map(|r| self.step(r, s, disc)).collect::<Result<_, _>>()?),
            Res::Or(v) => junction(
                false,
                v.iter().map(|r| self.step(r, s, disc)).collect::<Result<_, _>>()?,
            ),
        })
    }

    /// Feed the next sample of the run.
    pub fn sample(&mut self, state: &SimState, kind: SampleKind) -> Result<Verdict, SimError> {
        let next = match &self.res {
            None => self.eval(self.root, state)?,
            Some(r) => self.step(r, state, kind.is_discrete())?,
        };
        self.res = Some(next);
        let v = self.verdict();
        if v != Verdict::Inconclusive && self.decided_at.is_none() {
            self.decided_at = Some(state.time());
        }
        Ok(v)
    }

    pub fn verdict(&self) -> Verdict {
        match self.res {
            Some(Res::T) => Verdict::True,
            Some(Res::F) => Verdict::False,
            _ => Verdict::Inconclusive,
        }
    }

    /// Close the run: pending obligations fail.
    pub fn finish(&mut self) -> bool {
        fn fin(r: &Res) -> bool {
            match r {
                Res::T => true,
                Res::F | Res::Next(_) | Res::Active { .. } => false,
                Res::Not(a) => !fin(a),
                Res::And(v) => v.iter().all(fin),
                Res::Or(v) => v.iter().any(fin),
            }
        }
        let ok = self.res.as_ref().is_some_and(fin);
        self.res = Some(if ok { Res::T } else { Res::F });
        ok
    }

    /// Time of the sample that settled the verdict, if any.
    pub fn decided_at(&self) -> Option<f64> {
        self.decided_at
    }

    pub fn reset(&mut self) {
        self.res = None;
        self.decided_at = None;
    }

    fn deadlines(&self, r: &Res, s: &SimState, rates: &[f64], out: &mut Vec<f64>) {
        match r {
            Res::Active { node, r } => {
                if let Node::Until { clock, bound, .. } = self.nodes[*node] {
                    if bound.is_finite() && rates[clock] > 0.0 {
                        out.push((r + bound - s.odometers[clock]) / rates[clock]);
                    }
                }
            }
            Res::Not(a) => self.deadlines(a, s, rates, out),
            Res::And(v) | Res::Or(v) => v.iter().for_each(|x| self.deadlines(x, s, rates, out)),
            _ => {}
        }
    }
}

impl Observer for Monitor {
    fn observe(&mut self, _net: &Network, state: &SimState, kind: SampleKind) -> Result<bool, SimError> {
        Ok(self.sample(state, kind)? != Verdict::Inconclusive)
    }

    fn watch_points(
        &self,
        _net: &Network,
        state: &SimState,
        rates: &[f64],
        horizon: f64,
    ) -> Result<Vec<f64>, SimError> {
        let mut pts = watch_points(&self.atoms, state, rates)?;
        pts.retain(|&t| t < horizon);
        // Truth can differ on the open stretch between two crossings.
        let mut all = Vec::with_capacity(2 * pts.len() + 2);
        let mut prev = 0.0;
        for &t in pts.iter().chain(std::iter::once(&horizon)) {
            all.push((prev + t) / 2.0);
            all.push(t);
            prev = t;
        }
        all.pop();
        if let Some(r) = &self.res {
            self.deadlines(r, state, rates, &mut all);
        }
        all.retain(|&t| t > 0.0 && t < horizon);
        Ok(all)
    }
}

//! Query trees, generic over the atom type `E` and the clock reference
//! type `K` so the same shapes serve both the parser (surface names) and
//! the checker (resolved slots).

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunBound<K> {
    Time(f64),
    Cost { clock: K, limit: f64 },
    Steps(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathFormula<E> {
    Eventually(E),
    Globally(E),
    Until(E, E),
}

/// Weighted metric temporal logic with upper-bounded until. The clock
/// bound of an until is measured on the clock's accumulated growth.
#[derive(Clone, Debug, PartialEq)]
pub enum Wmtl<E, K> {
    Atom(E),
    Not(Box<Wmtl<E, K>>),
    And(Box<Wmtl<E, K>>, Box<Wmtl<E, K>>),
    Or(Box<Wmtl<E, K>>, Box<Wmtl<E, K>>),
    Next(Box<Wmtl<E, K>>),
    Until {
        clock: K,
        bound: f64,
        lhs: Box<Wmtl<E, K>>,
        rhs: Box<Wmtl<E, K>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Property<E, K> {
    Path(PathFormula<E>),
    Wmtl(Wmtl<E, K>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment<E, K> {
    pub bound: RunBound<K>,
    pub prop: Property<E, K>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Query<E, K> {
    Estimate(Experiment<E, K>),
    /// `Pr[..](φ) >= threshold`.
    HypTest(Experiment<E, K>, f64),
    /// `Pr[..](φ1) >= Pr[..](φ2)`.
    Compare(Experiment<E, K>, Experiment<E, K>),
    Expect {
        bound: RunBound<K>,
        runs: u64,
        mode: Extremum,
        expr: E,
    },
    Simulate {
        count: u64,
        bound: RunBound<K>,
        exprs: Vec<E>,
    },
}

impl<K> RunBound<K> {
    pub fn try_map<K2, Err>(&self, f: &mut impl FnMut(&K) -> Result<K2, Err>) -> Result<RunBound<K2>, Err> {
        Ok(match self {
            RunBound::Time(t) => RunBound::Time(*t),
            RunBound::Cost { clock, limit } => RunBound::Cost {
                clock: f(clock)?,
                limit: *limit,
            },
            RunBound::Steps(n) => RunBound::Steps(*n),
        })
    }
}

impl<E> PathFormula<E> {
    pub fn try_map<E2, Err>(&self, f: &mut impl FnMut(&E) -> Result<E2, Err>) -> Result<PathFormula<E2>, Err> {
        Ok(match self {
            PathFormula::Eventually(p) => PathFormula::Eventually(f(p)?),
            PathFormula::Globally(p) => PathFormula::Globally(f(p)?),
            PathFormula::Until(p, q) => PathFormula::Until(f(p)?, f(q)?),
        })
    }
}

impl<E, K> Wmtl<E, K> {
    pub fn try_map<E2, K2, Err>(
        &self,
        fe: &mut impl FnMut(&E) -> Result<E2, Err>,
        fk: &mut impl FnMut(&K) -> Result<K2, Err>,
    ) -> Result<Wmtl<E2, K2>, Err> {
        Ok(match self {
            Wmtl::Atom(e) => Wmtl::Atom(fe(e)?),
            Wmtl::Not(a) => Wmtl::Not(Box::new(a.try_map(fe, fk)?)),
            Wmtl::And(a, b) => Wmtl::And(Box::new(a.try_map(fe, fk)?), Box::new(b.try_map(fe, fk)?)),
            Wmtl::Or(a, b) => Wmtl::Or(Box::new(a.try_map(fe, fk)?), Box::new(b.try_map(fe, fk)?)),
            Wmtl::Next(a) => Wmtl::Next(Box::new(a.try_map(fe, fk)?)),
            Wmtl::Until { clock, bound, lhs, rhs } => Wmtl::Until {
                clock: fk(clock)?,
                bound: *bound,
                lhs: Box::new(lhs.try_map(fe, fk)?),
                rhs: Box::new(rhs.try_map(fe, fk)?),
            },
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            Wmtl::Atom(_) => 0,
            Wmtl::Not(a) | Wmtl::Next(a) => 1 + a.depth(),
            Wmtl::And(a, b) | Wmtl::Or(a, b) | Wmtl::Until { lhs: a, rhs: b, .. } => 1 + a.depth().max(b.depth()),
        }
    }
}

impl<E, K> Property<E, K> {
    pub fn try_map<E2, K2, Err>(
        &self,
        fe: &mut impl FnMut(&E) -> Result<E2, Err>,
        fk: &mut impl FnMut(&K) -> Result<K2, Err>,
    ) -> Result<Property<E2, K2>, Err> {
        Ok(match self {
            Property::Path(p) => Property::Path(p.try_map(fe)?),
            Property::Wmtl(w) => Property::Wmtl(w.try_map(fe, fk)?),
        })
    }
}

impl<E, K> Experiment<E, K> {
    pub fn try_map<E2, K2, Err>(
        &self,
        fe: &mut impl FnMut(&E) -> Result<E2, Err>,
        fk: &mut impl FnMut(&K) -> Result<K2, Err>,
    ) -> Result<Experiment<E2, K2>, Err> {
        Ok(Experiment {
            bound: self.bound.try_map(fk)?,
            prop: self.prop.try_map(fe, fk)?,
        })
    }
}

impl<E, K> Query<E, K> {
    pub fn try_map<E2, K2, Err>(
        &self,
        fe: &mut impl FnMut(&E) -> Result<E2, Err>,
        fk: &mut impl FnMut(&K) -> Result<K2, Err>,
    ) -> Result<Query<E2, K2>, Err> {
        Ok(match self {
            Query::Estimate(x) => Query::Estimate(x.try_map(fe, fk)?),
            Query::HypTest(x, t) => Query::HypTest(x.try_map(fe, fk)?, *t),
            Query::Compare(a, b) => Query::Compare(a.try_map(fe, fk)?, b.try_map(fe, fk)?),
            Query::Expect {
                bound,
                runs,
                mode,
                expr,
            } => Query::Expect {
                bound: bound.try_map(fk)?,
                runs: *runs,
                mode: *mode,
                expr: fe(expr)?,
            },
            Query::Simulate { count, bound, exprs } => Query::Simulate {
                count: *count,
                bound: bound.try_map(fk)?,
                exprs: exprs.iter().map(&mut *fe).collect::<Result<_, _>>()?,
            },
        })
    }
}

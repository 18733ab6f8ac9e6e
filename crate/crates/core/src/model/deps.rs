//! Which pending delays a transition can invalidate.

use std::collections::BTreeSet;

use super::*;

/// For each edge of each process, the processes whose sampled delay must be
/// thrown away when the edge fires. Process granularity: a location-level
/// analysis would be finer but costs more than it saves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyMatrix {
    sets: Vec<Vec<Vec<usize>>>,
}

fn reads_of(e: &Expr, out: &mut BTreeSet<Symbol>) {
    let mut v = Vec::new();
    e.reads(&mut v);
    out.extend(v);
}

/// Everything that can influence how process `p` samples its next move.
fn process_reads(p: &Process) -> BTreeSet<Symbol> {
    let mut r = BTreeSet::new();
    for l in &p.locations {
        for e in l.invariant.iter().chain(&l.exp_rate) {
            reads_of(e, &mut r);
        }
        for (_, e) in &l.rates {
            reads_of(e, &mut r);
        }
    }
    for e in &p.edges {
        if let Some(g) = &e.guard {
            reads_of(g, &mut r);
        }
        reads_of(&e.weight, &mut r);
    }
    r
}

impl DependencyMatrix {
    pub fn analyze(net: &Network) -> Self {
        let reads: Vec<_> = net.processes.iter().map(process_reads).collect();

        // A clock's rate depends on the location of every process declaring
        // it and on whatever the rate expressions read.
        let mut rate_inputs = vec![BTreeSet::new(); net.clocks.len()];
        for (pi, p) in net.processes.iter().enumerate() {
            for l in &p.locations {
                for (c, e) in &l.rates {
                    rate_inputs[*c].insert(Symbol::Location(pi));
                    reads_of(e, &mut rate_inputs[*c]);
                }
            }
        }

        let listeners = |ch: usize| -> Vec<usize> {
            net.processes
                .iter()
                .enumerate()
                .filter(|(_, p)| p.edges.iter().any(|e| e.sync == Sync::Input(ch)))
                .map(|(i, _)| i)
                .collect()
        };

        let sets = net
            .processes
            .iter()
            .enumerate()
            .map(|(pi, p)| {
                p.edges
                    .iter()
                    .map(|e| {
                        let mut writes = BTreeSet::new();
                        writes.insert(Symbol::Location(pi));
                        for b in &e.branches {
                            for u in &b.updates {
                                writes.insert(match u.target {
                                    Assign::Var(v) => Symbol::Var(v),
                                    Assign::Clock(c) => Symbol::Clock(c),
                                });
                            }
                        }
                        for (c, inputs) in rate_inputs.iter().enumerate() {
                            if !inputs.is_disjoint(&writes) {
                                writes.insert(Symbol::Clock(c));
                            }
                        }
                        let mut set = BTreeSet::new();
                        set.insert(pi);
                        for (q, r) in reads.iter().enumerate() {
                            if !r.is_disjoint(&writes) {
                                set.insert(q);
                            }
                        }
                        if let Sync::Output(ch) = e.sync {
                            set.extend(listeners(ch));
                        }
                        set.into_iter().collect()
                    })
                    .collect()
            })
            .collect();
        DependencyMatrix { sets }
    }

    pub fn get(&self, process: usize, edge: usize) -> &[usize] {
        &self.sets[process][edge]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model;

    #[test]
    fn independent_processes() {
        let net = load_model(
            "template P() { clock x; location L { invariant x <= 1; } init L; L -> L { update x = 0; } }
             template Q() { clock x; location L { invariant x <= 2; } init L; L -> L { update x = 0; } }
             system P, Q;",
        )
        .unwrap();
        let d = DependencyMatrix::analyze(&net);
        assert_eq!(d.get(0, 0), &[0]);
        assert_eq!(d.get(1, 0), &[1]);
    }

    #[test]
    fn synchronisation() {
        let net = load_model(
            "clock x, y; broadcast chan a;
             template A() { location A0 { invariant x <= 1; } location A1; init A0; A0 -> A1 { sync a!; } }
             template B() { location B0 { invariant y <= 2; } location B1; init B0; B0 -> B1 { sync a?; } }
             system A, B;",
        )
        .unwrap();
        let d = DependencyMatrix::analyze(&net);
        assert_eq!(d.get(0, 0), &[0, 1]);
        assert_eq!(d.get(1, 0), &[1]);
    }

    #[test]
    fn shared_variable() {
        let net = load_model(
            "int v = 0; clock x, y;
             template W() { location L { invariant x <= 1; } init L; L -> L { update v = v + 1, x = 0; } }
             template R() { location L { invariant y <= 1; } init L; L -> L { guard v > 2; update y = 0; } }
             system W, R;",
        )
        .unwrap();
        let d = DependencyMatrix::analyze(&net);
        assert_eq!(d.get(0, 0), &[0, 1]);
        assert_eq!(d.get(1, 0), &[1]);
    }

    #[test]
    fn rate_changes_reach_clock_readers() {
        let net = load_model(
            "clock c, y;
             template P() { clock x; location L0 { invariant x <= 1; rate c' == 2; } location L1; init L0;
                L0 -> L1; }
             template R() { location L { invariant c <= 5; } location M; init L; L -> M { guard c >= 4; } }
             system P, R;",
        )
        .unwrap();
        let d = DependencyMatrix::analyze(&net);
        assert_eq!(d.get(0, 0), &[0, 1]);
    }
}

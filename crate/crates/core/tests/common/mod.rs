#![allow(dead_code)]

use std::path::PathBuf;

use nsmc_core::model::{load_model, load_query, BinOp, ClockId, Expr, Network, TAU};
use nsmc_core::query::Wmtl;
use nsmc_core::runner::CheckedQuery;
use nsmc_core::sim::TracePoint;
use rand::Rng;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/corpus")
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap()
}

pub fn corpus(name: &str) -> Network {
    load_model(&corpus_text(name)).unwrap()
}

pub fn query(net: &Network, q: &str) -> CheckedQuery {
    load_query(net, q).unwrap()
}

pub type F = Wmtl<Expr, ClockId>;

/// Whole-run evaluation straight from the pointwise definition.
pub fn brute_force(f: &F, run: &[TracePoint]) -> bool {
    !run.is_empty() && sat(f, run, 0)
}

fn atom(e: &Expr, p: &TracePoint) -> bool {
    let zeros = vec![0.0; p.state.clocks.len()];
    e.holds_after(&p.state, &zeros, 0.0).unwrap()
}

fn sat(f: &F, run: &[TracePoint], i: usize) -> bool {
    match f {
        Wmtl::Atom(e) => atom(e, &run[i]),
        Wmtl::Not(a) => !sat(a, run, i),
        Wmtl::And(a, b) => sat(a, run, i) && sat(b, run, i),
        Wmtl::Or(a, b) => sat(a, run, i) || sat(b, run, i),
        Wmtl::Next(a) => (i + 1..run.len())
            .find(|&j| run[j].kind.is_discrete())
            .is_some_and(|j| sat(a, run, j)),
        Wmtl::Until { clock, bound, lhs, rhs } => {
            let start = run[i].state.odometers[*clock];
            for j in i..run.len() {
                let used = run[j].state.odometers[*clock] - start;
                if used > bound + 1e-9 * (1.0 + bound.abs()) {
                    return false;
                }
                if sat(rhs, run, j) {
                    return true;
                }
                if !sat(lhs, run, j) {
                    return false;
                }
            }
            false
        }
    }
}

/// Random formula of depth at most `depth` over the given atoms and clocks.
pub fn random_formula<R: Rng>(rng: &mut R, atoms: &[Expr], clocks: &[ClockId], depth: usize) -> F {
    if depth == 0 || rng.random_bool(0.25) {
        return Wmtl::Atom(atoms[rng.random_range(0..atoms.len())].clone());
    }
    let sub = |rng: &mut R| Box::new(random_formula(rng, atoms, clocks, depth - 1));
    match rng.random_range(0..6) {
        0 => Wmtl::Not(sub(rng)),
        1 => Wmtl::And(sub(rng), sub(rng)),
        2 => Wmtl::Or(sub(rng), sub(rng)),
        3 => Wmtl::Next(sub(rng)),
        _ => Wmtl::Until {
            clock: clocks[rng.random_range(0..clocks.len())],
            bound: if rng.random_bool(0.2) {
                f64::INFINITY
            } else {
                (rng.random_range(0..40) as f64) * 0.25
            },
            lhs: sub(rng),
            rhs: sub(rng),
        },
    }
}

pub fn clock_cmp(op: BinOp, c: ClockId, v: f64) -> Expr {
    Expr::binary(op, Expr::Clock(c), Expr::Real(v))
}

/// Atoms for random formulas: locations plus clock constraints.
pub fn atoms_for(net: &Network) -> (Vec<Expr>, Vec<ClockId>) {
    let mut atoms = vec![Expr::Bool(true)];
    for (p, proc_) in net.processes.iter().enumerate() {
        for l in 0..proc_.locations.len() {
            atoms.push(Expr::At {
                process: p,
                location: l,
            });
        }
    }
    let mut clocks = vec![TAU];
    for c in 1..net.clocks.len() {
        clocks.push(c);
        for v in [0.5, 1.0, 1.5, 3.0] {
            atoms.push(clock_cmp(BinOp::Ge, c, v));
            atoms.push(clock_cmp(BinOp::Le, c, v));
        }
    }
    for v in [0.5, 1.0, 2.0, 5.0] {
        atoms.push(clock_cmp(BinOp::Ge, TAU, v));
    }
    atoms.push(Expr::binary(
        BinOp::And,
        clock_cmp(BinOp::Ge, TAU, 2.0),
        clock_cmp(BinOp::Le, TAU, 3.0),
    ));
    (atoms, clocks)
}

mod common;

use common::*;
use nsmc_core::model::{load_model, load_query, Expr, Network};
use nsmc_core::monitor::{property_to_wmtl, watch_points, Formula, Monitor, Verdict};
use nsmc_core::query::{Query, RunBound, Wmtl};
use nsmc_core::runner::{run_one, Job};
use nsmc_core::sim::{Recorder, Simulator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn recorded(net: &Network, horizon: f64, seed: u64) -> Recorder {
    let mut rec = Recorder::default();
    Simulator::new(net)
        .run(&RunBound::Time(horizon), &mut rec, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap();
    rec
}

fn formula(net: &Network, text: &str) -> Formula {
    match load_query(net, text).unwrap() {
        Query::Estimate(e) => property_to_wmtl(&e.prop),
        q => panic!("{q:?}"),
    }
}

/// Feed a whole recorded run, sample by sample, then close it.
fn feed(f: &Formula, rec: &Recorder) -> (bool, Vec<Verdict>) {
    let mut m = Monitor::new(f);
    let mut seen = Vec::new();
    for p in &rec.run.points {
        seen.push(m.sample(&p.state, p.kind).unwrap());
    }
    (m.finish(), seen)
}

#[test]
fn progression_matches_brute_force_on_full_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (name, horizon) in [("race.npta", 3.0), ("train_gate.npta", 40.0), ("bias.npta", 102.0)] {
        let net = corpus(name);
        let (atoms, clocks) = atoms_for(&net);
        for _ in 0..400 {
            let f = random_formula(&mut rng, &atoms, &clocks, 3);
            let rec = recorded(&net, horizon, rng.random());
            let (got, _) = feed(&f, &rec);
            assert_eq!(got, brute_force(&f, &rec.run.points), "{name}: {f:?}");
        }
    }
}

#[test]
fn verdicts_never_flip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = corpus("train_gate.npta");
    let (atoms, clocks) = atoms_for(&net);
    for _ in 0..500 {
        let f = random_formula(&mut rng, &atoms, &clocks, 3);
        let rec = recorded(&net, 40.0, rng.random());
        let (last, seen) = feed(&f, &rec);
        let first = seen.iter().position(|v| *v != Verdict::Inconclusive);
        if let Some(i) = first {
            assert!(seen[i..].iter().all(|v| *v == seen[i]), "{f:?}: {seen:?}");
            assert_eq!(last, seen[i] == Verdict::True);
        }
    }
}

#[test]
fn watch_points_bracket_every_truth_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["race.npta", "train_gate.npta"] {
        let net = corpus(name);
        let (atoms, clocks) = atoms_for(&net);
        for _ in 0..40 {
            let f = random_formula(&mut rng, &atoms, &clocks, 3);
            let mut flat = Vec::new();
            collect_atoms(&f, &mut flat);
            let rec = recorded(&net, 30.0, rng.random());
            for w in rec.run.points.windows(2) {
                let s = &w[0].state;
                let d = w[1].state.time() - s.time();
                if d <= 0.0 {
                    continue;
                }
                let rates = net.rates(s, &s.locations).unwrap();
                let mut wp = watch_points(&f, s, &rates).unwrap();
                wp.retain(|&t| t > 0.0 && t < d);
                wp.insert(0, 0.0);
                wp.push(d);
                for seg in wp.windows(2) {
                    let (a, b) = (seg[0], seg[1]);
                    for e in &flat {
                        let mut truth = None;
                        let mut t = a + 1e-3;
                        while t < b - 1e-6 {
                            if t - a > 1e-8 {
                                let v = e.holds_after(s, &rates, t).unwrap();
                                assert!(truth.is_none_or(|x| x == v), "{name}: {e:?} changes inside ({a}, {b})");
                                truth = Some(v);
                            }
                            t += 1e-3;
                        }
                    }
                }
            }
        }
    }
}

fn collect_atoms<'a>(f: &'a Formula, out: &mut Vec<&'a Expr>) {
    match f {
        Wmtl::Atom(e) => out.push(e),
        Wmtl::Not(a) | Wmtl::Next(a) => collect_atoms(a, out),
        Wmtl::And(a, b) | Wmtl::Or(a, b) | Wmtl::Until { lhs: a, rhs: b, .. } => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
    }
}

#[test]
fn robot_style_until() {
    let net = load_model(
        "int battery = 3;
         template R() {
           clock x;
           location Move { invariant x <= 2; }
           location Goal;
           location Dead;
           init Move;
           Move -> { -> Move { weight 3; update battery = battery - 1, x = 0; } -> Goal { weight 1; } }
           Move -> Dead { guard battery <= 0 && x >= 1; }
         }
         system R;",
    )
    .unwrap();
    let f = formula(&net, "Pr[<=30](((battery >= 0) && !R.Dead) U[tau<=10] R.Goal)");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut outcomes = [0; 2];
    for _ in 0..500 {
        let seed = rng.random();
        let rec = recorded(&net, 30.0, seed);
        let (got, _) = feed(&f, &rec);
        assert_eq!(got, brute_force(&f, &rec.run.points));
        outcomes[got as usize] += 1;
    }
    assert!(outcomes[0] > 0 && outcomes[1] > 0, "{outcomes:?}");
}

fn prop_outcome(net: &Network, text: &str, seed: u64) -> (u8, Option<f64>) {
    let Query::Estimate(e) = load_query(net, text).unwrap() else {
        panic!()
    };
    let o = run_one(net, &Job::Prop(e), seed, true).unwrap();
    (o.bits, o.value)
}

#[test]
fn classification_examples() {
    let race = corpus("race.npta");
    for seed in 0..300 {
        assert_eq!(prop_outcome(&race, "Pr[<=2](<> T.T3)", seed).0, 1);
        assert_eq!(prop_outcome(&race, "Pr[<=2]([] true)", seed).0, 1);
        // p false from the start: cut at once.
        assert_eq!(prop_outcome(&race, "Pr[<=2](T.T3 U T.T1)", seed), (0, None));
    }
}

#[test]
fn bounded_eventually_on_a_deterministic_clock() {
    let net = load_model(
        "template P() { clock x; location S { invariant x <= 7; } location G; init S; S -> G { guard x >= 7; } } system P;",
    )
    .unwrap();
    let hit = formula(&net, "Pr[<=20](<>[tau<=10] P.G)");
    let miss = formula(&net, "Pr[<=20](<>[tau<=6.5] P.G)");
    let rec = recorded(&net, 20.0, 0);
    let mut m = Monitor::new(&hit);
    let mut decided = None;
    for p in &rec.run.points {
        if m.sample(&p.state, p.kind).unwrap() != Verdict::Inconclusive && decided.is_none() {
            decided = Some(p.state.time());
        }
    }
    assert_eq!(m.verdict(), Verdict::True);
    assert_eq!(decided, Some(7.0));
    assert!(!feed(&miss, &rec).0);
}

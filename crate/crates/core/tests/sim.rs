mod common;

use common::*;
use nsmc_core::model::{load_model, Network, TAU};
use nsmc_core::query::RunBound;
use nsmc_core::runner::{run_one, Job};
use nsmc_core::sim::{Recorder, SampleKind, SimState, Simulator, Termination};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn record(net: &Network, bound: RunBound<usize>, seed: u64, reuse: bool) -> (Recorder, Termination, u64) {
    let mut rec = Recorder::default();
    let mut sim = Simulator::new(net).with_reuse(reuse);
    let end = sim.run(&bound, &mut rec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (rec, end.cause, sim.stats.resamples)
}

fn two_racers(a: f64, b: f64, c: f64, d: f64) -> Network {
    load_model(&format!(
        "template P() {{ clock x; location S {{ invariant x <= {b}; }} location W; init S; S -> W {{ guard x >= {a}; }} }}
         template Q() {{ clock y; location S {{ invariant y <= {d}; }} location W; init S; S -> W {{ guard y >= {c}; }} }}
         system P, Q;"
    ))
    .unwrap()
}

/// Pr(X < Y) for X ~ U[a,b], Y ~ U[c,d] by midpoint integration.
fn win_probability(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let n = 200_000;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let x = a + (i as f64 + 0.5) * h;
            ((d - x) / (d - c)).clamp(0.0, 1.0)
        })
        .sum::<f64>()
        / n as f64
}

fn first_winner(net: &Network, runs: u64, seed: u64) -> f64 {
    let mut wins = 0;
    for i in 0..runs {
        let mut sim = Simulator::new(net);
        let end = sim
            .run(&RunBound::Steps(1), &mut (), &mut ChaCha8Rng::seed_from_u64(seed + i))
            .unwrap();
        wins += (end.state.locations[0] == 1) as u32;
    }
    wins as f64 / runs as f64
}

#[test]
fn race_between_a_and_b() {
    let net = corpus("race.npta");
    let n = 100_000;
    let p = first_winner(&net, n, 1);
    // Three standard errors of the binomial estimate, about 0.004.
    assert!((p - 0.75).abs() <= 0.005, "{p}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn race_matches_closed_form(a in 0.0f64..2.0, wa in 0.1f64..2.0, c in 0.0f64..2.0, wc in 0.1f64..2.0, seed in any::<u64>()) {
        let (b, d) = (a + wa, c + wc);
        let net = two_racers(a, b, c, d);
        let n = 20_000u64;
        let p = first_winner(&net, n, seed);
        let want = win_probability(a, b, c, d);
        let se = (want * (1.0 - want) / n as f64).sqrt().max(1e-4);
        prop_assert!((p - want).abs() <= 3.0 * se, "U[{a},{b}] vs U[{c},{d}]: {p} vs {want}");
    }
}

#[test]
fn branch_weights() {
    let net = load_model(
        "template P() { location S { invariant x <= 0; } location A; location B; clock x; init S;
           S -> { -> A { weight 1; } -> B { weight 3; } } }
         system P;",
    )
    .unwrap();
    let n = 100_000;
    let mut b = 0;
    for i in 0..n {
        let end = Simulator::new(&net)
            .run(&RunBound::Steps(1), &mut (), &mut ChaCha8Rng::seed_from_u64(i))
            .unwrap();
        b += (end.state.locations[0] == 2) as u32;
    }
    let f = b as f64 / n as f64;
    assert!((f - 0.75).abs() <= 0.01, "{f}");
}

#[test]
fn single_edge_always_fires() {
    let net = load_model(
        "template P() { clock x; location S { invariant x <= 2; } location E; init S; S -> E { } } system P;",
    )
    .unwrap();
    for seed in 0..200 {
        let (rec, cause, _) = record(&net, RunBound::Time(5.0), seed, true);
        let last = &rec.run.points.last().unwrap().state;
        assert_eq!(last.locations[0], 1);
        assert_eq!(cause, Termination::Bound);
        let fired = rec.run.points.iter().find(|p| p.kind.is_discrete()).unwrap();
        assert!(fired.state.time() <= 2.0);
    }
}

#[test]
fn zero_steps_is_the_initial_state() {
    let net = corpus("train_gate.npta");
    let (rec, _, _) = record(&net, RunBound::Steps(0), 3, true);
    assert_eq!(rec.run.points.len(), 1);
    assert_eq!(rec.run.points[0].state, SimState::initial(&net));
    assert_eq!(rec.run.points[0].kind, SampleKind::Initial);
}

#[test]
fn steps_bound_counts_transitions() {
    let net = corpus("train_gate.npta");
    for m in [1, 5, 40] {
        let end = Simulator::new(&net)
            .run(&RunBound::Steps(m), &mut (), &mut ChaCha8Rng::seed_from_u64(m))
            .unwrap();
        assert_eq!(end.steps, m);
    }
}

#[test]
fn runs_are_reproducible() {
    for name in ["race.npta", "train_gate.npta", "oscillator.npta", "sincos.npta"] {
        let net = corpus(name);
        let a = record(&net, RunBound::Time(3.0), 42, true).0;
        let b = record(&net, RunBound::Time(3.0), 42, true).0;
        assert_eq!(a.run.points.len(), b.run.points.len());
        for (p, q) in a.run.points.iter().zip(&b.run.points) {
            assert_eq!(p.kind, q.kind);
            assert_eq!(p.state, q.state);
        }
    }
}

#[test]
fn clocks_integrate_their_rates() {
    for name in ["race.npta", "train_gate.npta"] {
        let net = corpus(name);
        for seed in 0..50 {
            let (rec, _, _) = record(&net, RunBound::Time(60.0), seed, true);
            for w in rec.run.points.windows(2) {
                let (s, t) = (&w[0].state, &w[1].state);
                let rates = net.rates(s, &s.locations).unwrap();
                let dt = t.time() - s.time();
                for (c, rate) in rates.iter().enumerate() {
                    let grew = t.odometers[c] - s.odometers[c];
                    let want = rate * dt;
                    let tol = 4.0 * f64::EPSILON * (t.odometers[c].abs() + 1.0);
                    assert!((grew - want).abs() <= tol, "{name} clock {c}: {grew} vs {want}");
                }
            }
        }
    }
}

#[test]
fn invariants_hold_at_every_sample() {
    for name in ["race.npta", "train_gate.npta", "bias.npta", "sincos.npta"] {
        let net = corpus(name);
        for seed in 0..30 {
            let (rec, _, _) = record(&net, RunBound::Time(20.0), seed, true);
            for p in &rec.run.points {
                let zeros = vec![0.0; net.clocks.len()];
                for (i, proc_) in net.processes.iter().enumerate() {
                    if let Some(inv) = &proc_.locations[p.state.locations[i]].invariant {
                        // holds_after snaps values within 1e-9 of a bound.
                        assert!(
                            inv.holds_after(&p.state, &zeros, 0.0).unwrap(),
                            "{name}: invariant of {} broken at t = {}",
                            proc_.name,
                            p.state.time()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn reuse_keeps_independent_choices() {
    let net = load_model(
        "template P() { clock x; location L { invariant x <= 1; } init L; L -> L { update x = 0; } }
         template Q() { clock y; location L { invariant y <= 2; } init L; L -> L { update y = 0; } }
         system P, Q;",
    )
    .unwrap();
    let count = |m: u64, reuse: bool| record(&net, RunBound::Steps(m), 9, reuse).2;
    assert_eq!(count(1, true), 2);
    for m in 1..20 {
        assert_eq!(count(m + 1, true) - count(m, true), 1, "step {m}");
        assert_eq!(count(m + 1, false) - count(m, false), 2, "step {m}");
    }
}

#[test]
fn reuse_is_invisible_for_a_single_process() {
    for name in ["bias.npta", "sincos.npta"] {
        let net = corpus(name);
        for seed in 0..20 {
            let a = record(&net, RunBound::Time(1.5), seed, true).0;
            let b = record(&net, RunBound::Time(1.5), seed, false).0;
            let sa: Vec<_> = a.run.points.iter().map(|p| &p.state).collect();
            let sb: Vec<_> = b.run.points.iter().map(|p| &p.state).collect();
            assert_eq!(sa, sb, "{name} seed {seed}");
        }
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn reuse_does_not_change_run_durations() {
    let cases = [
        ("race.npta", "Pr[<=10](<> T.T3)"),
        ("train_gate.npta", "Pr[<=200](<> Train(0).Cross)"),
        ("bias.npta", "Pr[<=200](<> OK || NOK)"),
        ("oscillator.npta", "Pr[<=5](<> a >= 110)"),
    ];
    for (model, text) in cases {
        let net = corpus(model);
        let nsmc_core::query::Query::Estimate(e) = query(&net, text) else {
            panic!()
        };
        let job = Job::Prop(e);
        let n = 10_000;
        let durations = |reuse: bool, base: u64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let o = run_one(&net, &job, base + i, reuse).unwrap();
                    o.value.unwrap_or(f64::INFINITY)
                })
                .collect()
        };
        // Different seed ranges so the two samples are independent.
        let d = ks(durations(true, 0), durations(false, 1 << 40));
        let critical = 1.628 * ((2 * n) as f64 / (n * n) as f64).sqrt();
        assert!(d <= critical, "{model}: D = {d} > {critical}");
    }
}

#[test]
fn timelock_is_a_deadlock() {
    let net = load_model("template P() { clock x; location L { invariant x <= 1; } init L; } system P;").unwrap();
    let end = Simulator::new(&net)
        .run(&RunBound::Time(10.0), &mut (), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    assert_eq!(end.cause, Termination::Deadlock);
    assert_eq!(end.time, 1.0);

    for (text, want) in [("Pr[<=10](<> x > 5)", 0u8), ("Pr[<=10]([] x <= 1)", 1u8)] {
        let nsmc_core::query::Query::Estimate(e) = query(&net, text) else {
            panic!()
        };
        let o = run_one(&net, &Job::Prop(e), 0, true).unwrap();
        assert!(o.deadlock);
        assert_eq!(o.bits, want);
    }
}

#[test]
fn cost_bound_truncates_at_the_crossing() {
    let net = corpus("race.npta");
    let c = net.clock_index("C").unwrap();
    for seed in 0..200 {
        let (rec, cause, _) = record(&net, RunBound::Cost { clock: c, limit: 3.0 }, seed, true);
        let last = &rec.run.points.last().unwrap().state;
        assert!(last.clocks[c] <= 3.0 + 1e-9, "{}", last.clocks[c]);
        if cause == Termination::Bound && last.clocks[c] < 3.0 - 1e-9 {
            // Only possible once T3 stopped the cost from growing.
            assert_eq!(last.locations[2], 3);
        }
    }
}

#[test]
fn time_bound_is_inclusive_and_reached() {
    let net = corpus("oscillator.npta");
    let (rec, cause, _) = record(&net, RunBound::Time(0.5), 1, true);
    assert_eq!(cause, Termination::Bound);
    assert_eq!(rec.run.points.last().unwrap().state.clocks[TAU], 0.5);
}

#[test]
fn observer_samples_inside_long_delays() {
    // The only edge waits at least 4 time units, jumping over [2,3].
    let net = load_model(
        "template P() { clock x; location S { invariant x <= 10; } location E; init S; S -> E { guard x >= 4; } } system P;",
    )
    .unwrap();
    let nsmc_core::query::Query::Estimate(e) = query(&net, "Pr[<=20](<> P.S && x >= 2 && x <= 3)") else {
        panic!()
    };
    for seed in 0..100 {
        let o = run_one(&net, &Job::Prop(e.clone()), seed, true).unwrap();
        assert_eq!(o.bits, 1);
        assert_eq!(o.value, Some(2.0));
    }
}

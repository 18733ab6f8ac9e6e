//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::Instant;

use common::*;
use nsmc_core::model::{load_query, Expr};
use nsmc_core::monitor::{Monitor, Verdict};
use nsmc_core::output::filter::{filter_trajectory, StreamFilter};
use nsmc_core::query::{Query, RunBound};
use nsmc_core::runner::{self, check, check_naive, check_sequential, Answer, Config, StatResult};
use nsmc_core::sim::{value_f64, Recorder, Simulator};
use nsmc_core::stat::{clopper_pearson, required_runs, Hypothesis, SprtParams, SprtState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn estimate_of(r: &StatResult) -> (f64, f64, f64) {
    match &r.answer {
        Answer::Estimate { estimate, .. } => (estimate.p_hat, estimate.ci.lo, estimate.ci.hi),
        a => panic!("expected an estimate, got {a:?}"),
    }
}

fn decision_of(r: &StatResult) -> Option<Hypothesis> {
    match &r.answer {
        Answer::HypTest { decision, .. } => *decision,
        a => panic!("expected a hypothesis test, got {a:?}"),
    }
}

fn race_probability() -> Check {
    let net = corpus("race.npta");
    let q = query(&net, "Pr[<=10](<> T.T1)");
    let cfg = Config {
        epsilon: 0.01,
        ..Config::default()
    };
    let start = Instant::now();
    let r = check(&net, &q, &cfg, 7).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let (p, lo, hi) = estimate_of(&r);
    let lo_eps = p - 0.01;
    let hi_eps = p + 0.01;
    let detail = format!(
        "p = {p:.5}, interval [{lo_eps:.5}, {hi_eps:.5}], CP [{lo:.5}, {hi:.5}], {} runs, {secs:.2}s",
        r.runs
    );
    if lo_eps <= 0.75 && 0.75 <= hi_eps && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn chernoff() -> Check {
    let a = required_runs(0.05, 0.05).map_err(|e| e.to_string())?;
    let b = required_runs(0.1, 0.05).map_err(|e| e.to_string())?;
    let detail = format!("N(0.05) = {a}, N(0.1) = {b}");
    if a == 738 && b == 185 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Root of a monotone function on [0, 1] by bisection.
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let rising = f(1.0) > f(0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact interval from the regularized incomplete beta function.
fn cp_oracle(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    use statrs::function::beta::beta_reg;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        bisect(|p| beta_reg(kf, nf - kf + 1.0, p) - alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        bisect(|p| beta_reg(kf + 1.0, nf - kf, p) - (1.0 - alpha / 2.0))
    };
    (lo, hi)
}

fn clopper_pearson_check() -> Check {
    let ci = clopper_pearson(5, 10, 0.05).map_err(|e| e.to_string())?;
    if (ci.lo - 0.1871).abs() > 1e-3 || (ci.hi - 0.8129).abs() > 1e-3 {
        return Err(format!("(5, 10) gave [{:.5}, {:.5}]", ci.lo, ci.hi));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=2000u64);
        let k = rng.random_range(0..=n);
        let alpha = [0.01, 0.05, 0.1][rng.random_range(0..3)];
        let ci = clopper_pearson(k, n, alpha).map_err(|e| e.to_string())?;
        let (lo, hi) = cp_oracle(k, n, alpha);
        worst = worst.max((ci.lo - lo).abs()).max((ci.hi - hi).abs());
    }
    let detail = format!(
        "(5, 10) -> [{:.4}, {:.4}], max deviation over 1000 cases {worst:.2e}",
        ci.lo, ci.hi
    );
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sprt_trial(params: &SprtParams, p: f64, rng: &mut ChaCha8Rng) -> Option<Hypothesis> {
    let mut s = SprtState::default();
    for _ in 0..1_000_000 {
        if let Some(h) = s.feed(params, rng.random_bool(p)) {
            return Some(h);
        }
    }
    None
}

fn sprt_calibration() -> Check {
    let start = Instant::now();
    let params = SprtParams::new(0.5, 0.05, 0.05, 0.05, 0.05).map_err(|e| e.to_string())?;
    let trials = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fnr = (0..trials)
        .filter(|_| sprt_trial(&params, 0.55, &mut rng) != Some(Hypothesis::H0))
        .count() as f64
        / trials as f64;
    let fpr = (0..trials)
        .filter(|_| sprt_trial(&params, 0.45, &mut rng) != Some(Hypothesis::H1))
        .count() as f64
        / trials as f64;
    let limit = 0.05 + 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt();
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("false negatives {fnr:.3}, false positives {fpr:.3}, limit {limit:.3}, {secs:.2}s");
    if fnr <= limit && fpr <= limit && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reuse_equivalence() -> Check {
    let net = corpus("train_gate.npta");
    let q = query(&net, "Pr[<=100](<> Train(0).Cross && Train(1).Stop && Train(2).Stop && Train(3).Stop && Train(4).Stop && Train(5).Stop)");
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let on = Config {
        epsilon: 0.01,
        cores: threads,
        ..Config::default()
    };
    let off = Config {
        reuse: false,
        ..on.clone()
    };
    let a = check(&net, &q, &on, 21).map_err(|e| e.to_string())?;
    let b = check(&net, &q, &off, 21).map_err(|e| e.to_string())?;
    let (pa, _, _) = estimate_of(&a);
    let (pb, _, _) = estimate_of(&b);
    let per_a = a.resamples as f64 / a.steps as f64;
    let per_b = b.resamples as f64 / b.steps as f64;
    let saving = 1.0 - per_a / per_b;
    let detail = format!(
        "reuse {pa:.5}, no reuse {pb:.5}, resamples per step {per_a:.3} vs {per_b:.3} ({:.1}% fewer)",
        100.0 * saving
    );
    if (pa - pb).abs() <= 0.02 && saving >= 0.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn distributed_bias() -> Check {
    let net = corpus("bias.npta");
    let q = query(&net, "Pr[<=100](<> OK) >= 0.5");
    let cfg = Config {
        delta0: 0.05,
        delta1: 0.05,
        ..Config::default()
    };
    let trials = 200u64;
    let ks = [1, 4, 16];
    let mut accepted = [0u32; 3];
    for t in 0..trials {
        let seed = t.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for (i, &k) in ks.iter().enumerate() {
            let r = check_naive(&net, &q, &cfg, k, seed).map_err(|e| e.to_string())?;
            accepted[i] += (decision_of(&r) == Some(Hypothesis::H0)) as u32;
        }
        let seq = check(
            &net,
            &q,
            &Config {
                cores: 1,
                ..cfg.clone()
            },
            seed,
        )
        .map_err(|e| e.to_string())?;
        let par = check(
            &net,
            &q,
            &Config {
                cores: 16,
                ..cfg.clone()
            },
            seed,
        )
        .map_err(|e| e.to_string())?;
        if decision_of(&seq) != decision_of(&par) || seq.runs != par.runs {
            return Err(format!("trial {t}: batched K=16 differs from K=1"));
        }
    }
    let [f1, f4, f16] = accepted.map(|a| a as f64 / trials as f64);
    // Two binomial standard errors of slack for the middle point.
    let noise = 2.0 * (0.25 / trials as f64).sqrt();
    let detail = format!(
        "naive acceptance K=1 {f1:.3}, K=4 {f4:.3}, K=16 {f16:.3}; batched K=16 identical to K=1 in all {trials} trials"
    );
    if f1 - f16 >= 0.2 && f4 <= f1 + noise && f16 <= f4 + noise {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sincos() -> Check {
    let net = corpus("sincos.npta");
    let Query::Simulate { exprs, .. } =
        load_query(&net, "simulate 1 [<=12]{sin_t*sin_t + cos_t*cos_t - 1}").map_err(|e| e.to_string())?
    else {
        return Err("not a simulate query".into());
    };
    let run_loc = net.processes[0].location_index("Run").unwrap();
    let mut rec = Recorder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    Simulator::new(&net)
        .run(&RunBound::Time(12.0), &mut rec, &mut rng)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut n = 0;
    for p in rec.run.points.iter().filter(|p| p.state.locations[0] == run_loc) {
        worst = worst.max(value_f64(exprs[0].eval(&p.state).map_err(|e| e.to_string())?).abs());
        n += 1;
    }
    let end = rec.run.points.last().map_or(0.0, |p| p.state.time());
    let detail = format!("max |sin^2 + cos^2 - 1| = {worst:.4} over {n} samples to t = {end:.3}");
    if worst <= 0.05 && end >= 12.0 && n > 1000 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn monitor_oracle() -> Check {
    let models = [("race.npta", 3.0), ("bias.npta", 102.0), ("train_gate.npta", 40.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    let mut decided = [0usize; 2];
    for i in 0..1000 {
        let (name, horizon) = models[i % models.len()];
        let net = corpus(name);
        let (atoms, clocks) = atoms_for(&net);
        let f = random_formula(&mut rng, &atoms, &clocks, 3);
        let seed: u64 = rng.random();
        let mut pair = (Monitor::new(&f), Recorder::default());
        Simulator::new(&net)
            .run(
                &RunBound::Time(horizon),
                &mut pair,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .map_err(|e| e.to_string())?;
        let (mut m, rec) = pair;
        let got = match m.verdict() {
            Verdict::True => true,
            Verdict::False => false,
            Verdict::Inconclusive => m.finish(),
        };
        let want = brute_force(&f, &rec.run.points);
        decided[got as usize] += 1;
        if got != want {
            mismatches += 1;
        }
    }
    let detail = format!(
        "{mismatches} mismatches over 1000 runs ({} true, {} false)",
        decided[1], decided[0]
    );
    if mismatches == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trajectory_filter() -> Check {
    let r = 1000;
    let n = 1_000_000;
    let raw: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 * 1e-3;
            (
                t,
                (t * 0.37).sin() * 5.0 + (t * 13.0).sin() + if i % 99_991 == 0 { 4.0 } else { 0.0 },
            )
        })
        .collect();
    let mut sf = StreamFilter::new(r, Some(raw[n - 1].0));
    for &(t, v) in &raw {
        sf.push(t, v);
    }
    let out = sf.finish();
    let t_cell = (raw[n - 1].0 - raw[0].0) / r as f64;
    let (vmin, vmax) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let v_cell = (vmax - vmin) / r as f64;
    // Each raw point must be covered by the vertical extent of kept points
    // within one time cell, up to one value cell.
    let mut worst = 0.0f64;
    let mut lo = 0;
    for &(t, v) in &raw {
        while out[lo].0 < t - t_cell {
            lo += 1;
        }
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in out[lo..].iter().take_while(|p| p.0 <= t + t_cell) {
            a = a.min(p.1);
            b = b.max(p.1);
        }
        let gap = if v < a {
            a - v
        } else if v > b {
            v - b
        } else {
            0.0
        };
        worst = worst.max(gap / v_cell);
    }
    let again = filter_trajectory(&out, r);
    let detail = format!(
        "{} points kept, max deviation {worst:.3} cells, refilter {}",
        out.len(),
        if again == out { "identical" } else { "changed" }
    );
    if out.len() <= 4 * r + 2 && worst <= 1.0 && again == out && out.first() == raw.first() && out.last() == raw.last()
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Check {
    let cases = [
        ("race.npta", "Pr[<=10](<> T.T1)"),
        ("race.npta", "Pr[C<=5](<> T.T3) >= 0.6"),
        ("race.npta", "Pr[<=10](<> T.T1) >= Pr[<=10](<> T.T2)"),
        ("race.npta", "E[<=10;200](max: C)"),
        ("bias.npta", "Pr[<=100](<> OK) >= 0.5"),
        ("train_gate.npta", "Pr[<=100](<> Train(0).Cross)"),
    ];
    for (model, text) in cases {
        let net = corpus(model);
        let q = query(&net, text);
        let mut seen: Option<String> = None;
        for cores in [1, 2, 4] {
            for _ in 0..2 {
                let cfg = Config {
                    cores,
                    ..Config::default()
                };
                let r = check(&net, &q, &cfg, 99).map_err(|e| e.to_string())?;
                let json = serde_json::to_string(&r).unwrap();
                match &seen {
                    None => seen = Some(json),
                    Some(s) if *s != json => return Err(format!("{model} {text}: result changed at K = {cores}")),
                    _ => {}
                }
            }
        }
        let seq = check_sequential(&net, &q, &Config::default(), 99).map_err(|e| e.to_string())?;
        if serde_json::to_string(&seq).unwrap() != seen.unwrap() {
            return Err(format!("{model} {text}: sequential differs"));
        }
    }
    let net = corpus("oscillator.npta");
    let Query::Simulate { bound, exprs, .. } = query(&net, "simulate 1 [<=5]{a, b}") else {
        return Err("not a simulate query".into());
    };
    let named: Vec<(String, Expr)> = exprs.into_iter().map(|e| (String::new(), e)).collect();
    let a = runner::simulate(&net, &bound, &named, 4, 1000, true).map_err(|e| e.to_string())?;
    let b = runner::simulate(&net, &bound, &named, 4, 1000, true).map_err(|e| e.to_string())?;
    if serde_json::to_string(&a).unwrap() != serde_json::to_string(&b).unwrap() {
        return Err("simulate trajectories differ".into());
    }
    Ok(format!(
        "{} queries identical across repeats, K in {{1, 2, 4}} and sequential",
        cases.len()
    ))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("race probability", race_probability),
        ("chernoff run counts", chernoff),
        ("clopper-pearson", clopper_pearson_check),
        ("sprt calibration", sprt_calibration),
        ("delay reuse equivalence", reuse_equivalence),
        ("distributed bias", distributed_bias),
        ("sin/cos integrator", sincos),
        ("monitor oracle", monitor_oracle),
        ("trajectory filter", trajectory_filter),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

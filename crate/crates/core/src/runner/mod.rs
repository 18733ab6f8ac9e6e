//! Run orchestration. Run `i` always uses seed `master + i`, and outcomes
//! are consumed strictly in index order, so results do not depend on how
//! many workers produced them or how fast.

pub mod remote;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{ClockId, Expr, Network};
use crate::monitor::{Monitor, Verdict};
use crate::output::{StreamFilter, Trajectory, SCHEMA_VERSION};
use crate::query::{Experiment, Extremum, Query, RunBound};
use crate::sim::{value_f64, Observer, SampleKind, SimError, SimState, Simulator, Termination};
use crate::stat::{self, CompareState, Comparison, Estimate, Hypothesis, MeanStd, SprtParams, SprtState, StatError};

pub type CheckedQuery = Query<Expr, ClockId>;
pub type CheckedExperiment = Experiment<Expr, ClockId>;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("simulation error: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("{deadlocks} of the first {runs} runs deadlocked; check the model")]
    Deadlock { deadlocks: u64, runs: u64 },
    #[error("remote worker: {0}")]
    Remote(String),
    #[error("{0}")]
    Unsupported(String),
}

pub fn run_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(index)
}

#[derive(Clone, Debug)]
pub struct Config {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub cores: usize,
    pub batch: usize,
    pub reuse: bool,
    /// Cap on runs for the sequential tests.
    pub max_runs: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alpha: 0.05,
            beta: 0.05,
            epsilon: 0.05,
            delta0: 0.01,
            delta1: 0.01,
            cores: 1,
            batch: 64,
            reuse: true,
            max_runs: 100_000,
        }
    }
}

/// What a single run has to compute.
#[derive(Clone, Debug)]
pub enum Job {
    Prop(CheckedExperiment),
    /// Two properties on the same seed.
    Pair(CheckedExperiment, CheckedExperiment),
    Extreme {
        bound: RunBound<ClockId>,
        mode: Extremum,
        expr: Expr,
    },
}

impl Job {
    pub fn for_query(q: &CheckedQuery) -> Result<Job, RunError> {
        Ok(match q {
            Query::Estimate(e) | Query::HypTest(e, _) => Job::Prop(e.clone()),
            Query::Compare(a, b) => Job::Pair(a.clone(), b.clone()),
            Query::Expect { bound, mode, expr, .. } => Job::Extreme {
                bound: bound.clone(),
                mode: *mode,
                expr: expr.clone(),
            },
            Query::Simulate { .. } => {
                return Err(RunError::Unsupported(
                    "simulate queries produce trajectories, not statistics".into(),
                ))
            }
        })
    }

    /// Outcome bits per run on the wire.
    pub fn bits(&self) -> usize {
        match self {
            Job::Pair(..) => 2,
            _ => 1,
        }
    }
}

/// Result of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    /// Bit 0: first property held; bit 1: second property held.
    pub bits: u8,
    /// Satisfaction time for properties, extremum for expectations.
    pub value: Option<f64>,
    pub deadlock: bool,
    /// Simulated time at which the run stopped doing work.
    pub work: f64,
    pub steps: u64,
    pub resamples: u64,
}

struct Extreme<'e> {
    expr: &'e Expr,
    mode: Extremum,
    best: Option<f64>,
}

impl Observer for Extreme<'_> {
    fn observe(&mut self, _: &Network, s: &SimState, _: SampleKind) -> Result<bool, SimError> {
        let v = value_f64(self.expr.eval(s).map_err(|source| SimError::Eval {
            context: "expectation expression".into(),
            source,
        })?);
        self.best = Some(match (self.best, self.mode) {
            (None, _) => v,
            (Some(b), Extremum::Min) => b.min(v),
            (Some(b), Extremum::Max) => b.max(v),
        });
        Ok(false)
    }
}

fn check_property(
    sim: &mut Simulator,
    e: &CheckedExperiment,
    seed: u64,
) -> Result<(bool, Option<f64>, bool, f64), SimError> {
    let mut m = Monitor::for_property(&e.prop);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = sim.run(&e.bound, &mut m, &mut rng)?;
    let ok = match m.verdict() {
        Verdict::True => true,
        Verdict::False => false,
        Verdict::Inconclusive => m.finish(),
    };
    let at = if ok { m.decided_at().or(Some(end.time)) } else { None };
    Ok((ok, at, end.cause == Termination::Deadlock, end.work_horizon))
}

/// Simulate run number `seed` of `job`.
pub fn run_one(net: &Network, job: &Job, seed: u64, reuse: bool) -> Result<Outcome, SimError> {
    let mut sim = Simulator::new(net).with_reuse(reuse);
    let out = match job {
        Job::Prop(e) => {
            let (ok, at, dl, work) = check_property(&mut sim, e, seed)?;
            Outcome {
                bits: ok as u8,
                value: at,
                deadlock: dl,
                work,
                steps: 0,
                resamples: 0,
            }
        }
        Job::Pair(a, b) => {
            let (x, _, d1, w1) = check_property(&mut sim, a, seed)?;
            let (y, _, d2, w2) = check_property(&mut sim, b, seed)?;
            Outcome {
                bits: x as u8 | (y as u8) << 1,
                value: None,
                deadlock: d1 || d2,
                work: w1.max(w2),
                steps: 0,
                resamples: 0,
            }
        }
        Job::Extreme { bound, mode, expr } => {
            let mut obs = Extreme {
                expr,
                mode: *mode,
                best: None,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let end = sim.run(bound, &mut obs, &mut rng)?;
            Outcome {
                bits: 0,
                value: obs.best,
                deadlock: end.cause == Termination::Deadlock,
                work: end.work_horizon,
                steps: 0,
                resamples: 0,
            }
        }
    };
    Ok(Outcome {
        steps: sim.stats.steps,
        resamples: sim.stats.resamples,
        ..out
    })
}

/// Simulate runs `lo..hi` on `threads` threads, returned in index order.
pub fn run_range(
    net: &Network,
    job: &Job,
    master: u64,
    lo: u64,
    hi: u64,
    threads: usize,
    reuse: bool,
) -> Result<Vec<Outcome>, SimError> {
    let n = hi.saturating_sub(lo);
    let threads = (threads.max(1) as u64).min(n.max(1));
    if threads <= 1 {
        return (lo..hi)
            .map(|i| run_one(net, job, run_seed(master, i), reuse))
            .collect();
    }
    let chunk = n.div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let a = lo + w * chunk;
                let b = (a + chunk).min(hi);
                s.spawn(move || {
                    (a..b)
                        .map(|i| run_one(net, job, run_seed(master, i), reuse))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(n as usize);
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    Estimate {
        #[serde(flatten)]
        estimate: Estimate,
        /// Satisfaction times of the successful runs.
        times: Vec<f64>,
    },
    HypTest {
        threshold: f64,
        params: SprtParams,
        /// `None` when the run cap was hit first.
        decision: Option<Hypothesis>,
        successes: u64,
    },
    Compare {
        decision: Comparison,
        discordant: u64,
        first_only: u64,
    },
    Expect {
        mode: Extremum,
        #[serde(flatten)]
        stats: MeanStd,
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatResult {
    pub schema_version: u32,
    pub runs: u64,
    pub deadlocks: u64,
    pub steps: u64,
    pub resamples: u64,
    #[serde(flatten)]
    pub answer: Answer,
}

enum Acc {
    Estimate {
        n: u64,
        eps: f64,
        alpha: f64,
        k: u64,
        times: Vec<f64>,
    },
    Hyp {
        theta: f64,
        p: SprtParams,
        s: SprtState,
        decision: Option<Hypothesis>,
    },
    Cmp {
        p: SprtParams,
        s: CompareState,
        decision: Option<Comparison>,
    },
    Expect {
        n: u64,
        mode: Extremum,
        values: Vec<f64>,
    },
}

/// Consumes outcomes in canonical order and decides when to stop.
pub struct Consumer {
    acc: Acc,
    cap: u64,
    runs: u64,
    deadlocks: u64,
    steps: u64,
    resamples: u64,
    done: bool,
}

impl Consumer {
    pub fn new(q: &CheckedQuery, cfg: &Config) -> Result<Self, RunError> {
        let acc = match q {
            Query::Estimate(_) => Acc::Estimate {
                n: stat::required_runs(cfg.epsilon, cfg.alpha)?,
                eps: cfg.epsilon,
                alpha: cfg.alpha,
                k: 0,
                times: Vec::new(),
            },
            Query::HypTest(_, theta) => Acc::Hyp {
                theta: *theta,
                p: SprtParams::new(*theta, cfg.delta0, cfg.delta1, cfg.alpha, cfg.beta)?,
                s: SprtState::default(),
                decision: None,
            },
            Query::Compare(..) => Acc::Cmp {
                p: CompareState::params(cfg.alpha, cfg.beta, cfg.delta0)?,
                s: CompareState::new(),
                decision: None,
            },
            Query::Expect { runs, mode, .. } => Acc::Expect {
                n: *runs,
                mode: *mode,
                values: Vec::new(),
            },
            Query::Simulate { .. } => return Err(RunError::Unsupported("simulate query".into())),
        };
        Ok(Consumer {
            acc,
            cap: cfg.max_runs.max(1),
            runs: 0,
            deadlocks: 0,
            steps: 0,
            resamples: 0,
            done: false,
        })
    }

    /// How many more runs are certainly needed, if known.
    pub fn remaining(&self) -> Option<u64> {
        match &self.acc {
            Acc::Estimate { n, .. } | Acc::Expect { n, .. } => Some(n - self.runs),
            _ => Some(self.cap - self.runs),
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Feed the next outcome. Returns `true` once the answer is settled.
    pub fn push(&mut self, o: &Outcome) -> Result<bool, RunError> {
        assert!(!self.done, "outcome fed after the decision");
        self.runs += 1;
        self.steps += o.steps;
        self.resamples += o.resamples;
        if o.deadlock {
            self.deadlocks += 1;
            if self.runs <= 100 && self.deadlocks > 50 {
                return Err(RunError::Deadlock {
                    deadlocks: self.deadlocks,
                    runs: self.runs,
                });
            }
        }
        let decided = match &mut self.acc {
            Acc::Estimate { n, k, times, .. } => {
                if o.bits & 1 == 1 {
                    *k += 1;
                    times.extend(o.value);
                }
                self.runs >= *n
            }
            Acc::Hyp { p, s, decision, .. } => {
                *decision = s.feed(p, o.bits & 1 == 1);
                decision.is_some()
            }
            Acc::Cmp { p, s, decision } => {
                *decision = s.feed(p, o.bits & 1 == 1, o.bits & 2 == 2);
                decision.is_some()
            }
            Acc::Expect { n, values, .. } => {
                values.push(o.value.unwrap_or(f64::NAN));
                self.runs >= *n
            }
        };
        self.done = decided || self.runs >= self.cap;
        Ok(self.done)
    }

    pub fn result(self) -> Result<StatResult, RunError> {
        let answer = match self.acc {
            Acc::Estimate {
                eps, alpha, k, times, ..
            } => Answer::Estimate {
                estimate: stat::estimate(k, self.runs, eps, alpha)?,
                times,
            },
            Acc::Hyp { theta, p, s, decision } => Answer::HypTest {
                threshold: theta,
                params: p,
                decision,
                successes: s.successes,
            },
            Acc::Cmp { s, decision, .. } => Answer::Compare {
                decision: decision.unwrap_or(Comparison::Indistinguishable),
                discordant: s.sprt.runs,
                first_only: s.sprt.successes,
            },
            Acc::Expect { mode, values, .. } => Answer::Expect {
                mode,
                stats: stat::mean_std(&values)?,
                values,
            },
        };
        Ok(StatResult {
            schema_version: SCHEMA_VERSION,
            runs: self.runs,
            deadlocks: self.deadlocks,
            steps: self.steps,
            resamples: self.resamples,
            answer,
        })
    }
}

/// Produces outcomes for a range of run indices.
pub trait Backend {
    fn compute(&mut self, job: &Job, lo: u64, hi: u64) -> Result<Vec<Outcome>, RunError>;
}

/// Threads in this process.
pub struct Local<'a> {
    pub net: &'a Network,
    pub master: u64,
    pub threads: usize,
    pub reuse: bool,
}

impl Backend for Local<'_> {
    fn compute(&mut self, job: &Job, lo: u64, hi: u64) -> Result<Vec<Outcome>, RunError> {
        Ok(run_range(self.net, job, self.master, lo, hi, self.threads, self.reuse)?)
    }
}

/// Rounds of `round` runs, each consumed in index order up to the first
/// index at which the answer is settled.
pub fn drive(q: &CheckedQuery, cfg: &Config, round: u64, backend: &mut dyn Backend) -> Result<StatResult, RunError> {
    let job = Job::for_query(q)?;
    let mut c = Consumer::new(q, cfg)?;
    let mut next = 0u64;
    let round = round.max(1);
    'rounds: loop {
        let size = match c.remaining() {
            Some(r) => r.min(round),
            None => round,
        };
        let outcomes = backend.compute(&job, next, next + size)?;
        debug_assert_eq!(outcomes.len() as u64, size);
        next += size;
        for o in &outcomes {
            if c.push(o)? {
                break 'rounds;
            }
        }
    }
    c.result()
}

/// One run at a time, in order.
pub fn check_sequential(net: &Network, q: &CheckedQuery, cfg: &Config, master: u64) -> Result<StatResult, RunError> {
    let mut b = Local {
        net,
        master,
        threads: 1,
        reuse: cfg.reuse,
    };
    drive(q, cfg, 1, &mut b)
}

/// `cfg.cores` threads, rounds of `cores * batch` runs.
pub fn check(net: &Network, q: &CheckedQuery, cfg: &Config, master: u64) -> Result<StatResult, RunError> {
    let k = cfg.cores.max(1);
    let mut b = Local {
        net,
        master,
        threads: k,
        reuse: cfg.reuse,
    };
    drive(q, cfg, (k * cfg.batch.max(1)) as u64, &mut b)
}

#[derive(PartialEq)]
struct Pending {
    done_at: f64,
    index: u64,
    worker: usize,
    outcome: Outcome,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        // Min-heap on completion time, then index.
        o.done_at.total_cmp(&self.done_at).then(o.index.cmp(&self.index))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Deliberately biased scheduling: `k` virtual workers each take the next
/// run index when free, a run occupies its worker for its simulated
/// duration, and outcomes are consumed in completion order. Only for
/// demonstrating the bias that canonical ordering removes.
pub fn check_naive(
    net: &Network,
    q: &CheckedQuery,
    cfg: &Config,
    k: usize,
    master: u64,
) -> Result<StatResult, RunError> {
    let job = Job::for_query(q)?;
    let mut c = Consumer::new(q, cfg)?;
    let mut heap = BinaryHeap::new();
    let mut next = 0u64;
    let start = |worker: usize, at: f64, next: &mut u64, heap: &mut BinaryHeap<Pending>| -> Result<(), RunError> {
        let index = *next;
        *next += 1;
        let o = run_one(net, &job, run_seed(master, index), cfg.reuse)?;
        heap.push(Pending {
            done_at: at + o.work.max(0.0),
            index,
            worker,
            outcome: o,
        });
        Ok(())
    };
    for w in 0..k.max(1) {
        start(w, 0.0, &mut next, &mut heap)?;
    }
    while let Some(p) = heap.pop() {
        if c.push(&p.outcome)? {
            break;
        }
        start(p.worker, p.done_at, &mut next, &mut heap)?;
    }
    c.result()
}

/// Trajectories of one simulated run, one series per expression.
pub fn simulate(
    net: &Network,
    bound: &RunBound<ClockId>,
    exprs: &[(String, Expr)],
    seed: u64,
    resolution: usize,
    reuse: bool,
) -> Result<Vec<Trajectory>, RunError> {
    struct Tracer<'e> {
        exprs: &'e [(String, Expr)],
        filters: Vec<StreamFilter>,
    }
    impl Observer for Tracer<'_> {
        fn observe(&mut self, _: &Network, s: &SimState, _: SampleKind) -> Result<bool, SimError> {
            for ((_, e), f) in self.exprs.iter().zip(&mut self.filters) {
                let v = e.eval(s).map_err(|source| SimError::Eval {
                    context: "simulated expression".into(),
                    source,
                })?;
                f.push(s.time(), value_f64(v));
            }
            Ok(false)
        }
    }
    let horizon = match bound {
        RunBound::Time(m) => Some(*m),
        _ => None,
    };
    let mut t = Tracer {
        exprs,
        filters: exprs.iter().map(|_| StreamFilter::new(resolution, horizon)).collect(),
    };
    let mut sim = Simulator::new(net).with_reuse(reuse);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sim.run(bound, &mut t, &mut rng)?;
    Ok(exprs
        .iter()
        .zip(&t.filters)
        .map(|((name, _), f)| Trajectory {
            schema_version: SCHEMA_VERSION,
            expr: name.clone(),
            resolution,
            points: f.finish(),
        })
        .collect())
}

//! Race-semantics simulation of a network.

pub mod delay;
mod state;
pub mod trace;

use rand::Rng;

pub use delay::{delay_interval, sample_delay, Choice};
pub use state::{value_f64, SimState};
pub use trace::{Recorder, Run, TracePoint};

use crate::model::{Assign, ClockId, DependencyMatrix, EvalError, Network, Sync};
use crate::query::RunBound;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("evaluating {context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("{0}")]
    Model(String),
}

/// Why a sample was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Initial,
    /// Somewhere during or at the end of a delay.
    Delay,
    /// Right after a discrete transition fired by `process` along `edge`.
    Discrete {
        process: usize,
        edge: usize,
    },
}

impl SampleKind {
    pub fn is_discrete(self) -> bool {
        matches!(self, SampleKind::Discrete { .. })
    }
}

/// Something watching a run as it unfolds.
pub trait Observer {
    /// Look at a state. Returning `true` ends the run.
    fn observe(&mut self, net: &Network, state: &SimState, kind: SampleKind) -> Result<bool, SimError>;

    /// Delays in `(0, horizon)` at which the observer wants an extra sample
    /// during the coming delay.
    fn watch_points(
        &self,
        _net: &Network,
        _state: &SimState,
        _rates: &[f64],
        _horizon: f64,
    ) -> Result<Vec<f64>, SimError> {
        Ok(Vec::new())
    }
}

impl Observer for () {
    fn observe(&mut self, _: &Network, _: &SimState, _: SampleKind) -> Result<bool, SimError> {
        Ok(false)
    }
}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn observe(&mut self, net: &Network, state: &SimState, kind: SampleKind) -> Result<bool, SimError> {
        (**self).observe(net, state, kind)
    }

    fn watch_points(&self, net: &Network, state: &SimState, rates: &[f64], horizon: f64) -> Result<Vec<f64>, SimError> {
        (**self).watch_points(net, state, rates, horizon)
    }
}

/// Both observers see every sample; either one can stop the run.
impl<A: Observer, B: Observer> Observer for (A, B) {
    fn observe(&mut self, net: &Network, state: &SimState, kind: SampleKind) -> Result<bool, SimError> {
        let a = self.0.observe(net, state, kind)?;
        let b = self.1.observe(net, state, kind)?;
        Ok(a || b)
    }

    fn watch_points(&self, net: &Network, state: &SimState, rates: &[f64], horizon: f64) -> Result<Vec<f64>, SimError> {
        let mut w = self.0.watch_points(net, state, rates, horizon)?;
        w.extend(self.1.watch_points(net, state, rates, horizon)?);
        Ok(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// An observer asked to stop.
    Verdict,
    /// The run bound was reached.
    Bound,
    /// Time cannot progress and nothing can fire.
    Deadlock,
}

#[derive(Clone, Debug)]
pub struct RunEnd {
    pub cause: Termination,
    pub time: f64,
    /// Time at which the run stopped doing real work. Equal to `time` except
    /// when the network went quiet and was fast-forwarded to the bound.
    pub work_horizon: f64,
    pub steps: u64,
    pub state: SimState,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimStats {
    pub steps: u64,
    pub resamples: u64,
}

pub struct Simulator<'a> {
    net: &'a Network,
    deps: DependencyMatrix,
    reuse: bool,
    pub stats: SimStats,
}

fn eval_err(context: &str) -> impl FnOnce(EvalError) -> SimError + '_ {
    move |source| SimError::Eval {
        context: context.to_string(),
        source,
    }
}

fn choose<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let live: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    match live.len() {
        0 => None,
        1 => Some(live[0]),
        _ => {
            let total: f64 = live.iter().map(|&i| weights[i]).sum();
            let mut u = rng.random::<f64>() * total;
            for &i in &live {
                u -= weights[i];
                if u < 0.0 {
                    return Some(i);
                }
            }
            live.last().copied()
        }
    }
}

const TIE: f64 = 1e-12;

impl<'a> Simulator<'a> {
    pub fn new(net: &'a Network) -> Self {
        Simulator {
            net,
            deps: DependencyMatrix::analyze(net),
            reuse: true,
            stats: SimStats::default(),
        }
    }

    pub fn with_reuse(mut self, reuse: bool) -> Self {
        self.reuse = reuse;
        self
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    /// Simulate one run from the initial state.
    pub fn run<R: Rng + ?Sized, O: Observer>(
        &mut self,
        bound: &RunBound<ClockId>,
        obs: &mut O,
        rng: &mut R,
    ) -> Result<RunEnd, SimError> {
        let net = self.net;
        let n = net.processes.len();
        let mut state = SimState::initial(net);
        let finish = |cause, state: SimState, work: f64| {
            Ok(RunEnd {
                cause,
                time: state.time(),
                work_horizon: work,
                steps: state.steps,
                state,
            })
        };
        if obs.observe(net, &state, SampleKind::Initial)? {
            return finish(Termination::Verdict, state, 0.0);
        }
        let mut pending: Vec<Option<Choice>> = vec![None; n];
        loop {
            let now = state.time();
            let rates = net.rates(&state, &state.locations).map_err(eval_err("clock rates"))?;
            let limit = match *bound {
                RunBound::Time(m) => m,
                RunBound::Steps(m) => {
                    if state.steps >= m {
                        return finish(Termination::Bound, state, now);
                    }
                    f64::INFINITY
                }
                RunBound::Cost { clock, limit } => {
                    let v = state.clocks[clock];
                    if v >= limit {
                        return finish(Termination::Bound, state, now);
                    }
                    if rates[clock] > 0.0 {
                        now + (limit - v) / rates[clock]
                    } else {
                        f64::INFINITY
                    }
                }
            };
            for (p, slot) in pending.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = Some(delay::sample(net, p, &state, &rates, rng)?);
                    self.stats.resamples += 1;
                }
            }
            let choices: Vec<Choice> = pending.iter().map(|c| c.unwrap()).collect();
            let first = choices.iter().filter_map(|c| c.fire_at).fold(f64::INFINITY, f64::min);
            let deadline = choices.iter().map(|c| c.deadline).fold(f64::INFINITY, f64::min);
            let fires = first.is_finite() && first <= deadline + TIE * (1.0 + deadline.abs());

            if !fires && deadline.is_infinite() {
                // Quiet: nothing will ever happen again.
                if limit.is_infinite() {
                    return finish(Termination::Bound, state, now);
                }
                if self.delay(&mut state, &rates, limit - now, obs)? {
                    return finish(Termination::Verdict, state, now);
                }
                return finish(Termination::Bound, state, now);
            }
            let target = if fires { first } else { deadline };
            if target > limit {
                let stop = self.delay(&mut state, &rates, limit - now, obs)?;
                let cause = if stop { Termination::Verdict } else { Termination::Bound };
                let t = state.time();
                return finish(cause, state, t);
            }
            if self.delay(&mut state, &rates, target - now, obs)? {
                let t = state.time();
                return finish(Termination::Verdict, state, t);
            }
            if !fires {
                let t = state.time();
                return finish(Termination::Deadlock, state, t);
            }

            let tied: Vec<usize> = (0..n)
                .filter(|&p| {
                    choices[p]
                        .fire_at
                        .is_some_and(|f| f <= first + TIE * (1.0 + first.abs()))
                })
                .collect();
            let p = if tied.len() == 1 {
                tied[0]
            } else {
                tied[rng.random_range(0..tied.len())]
            };
            let e = choices[p].edge.expect("a firing choice names its edge");
            let fired = self.fire(&mut state, &rates, p, e, rng)?;
            state.steps += 1;
            self.stats.steps += 1;
            if self.reuse {
                for (q, edge) in fired {
                    for &r in self.deps.get(q, edge) {
                        pending[r] = None;
                    }
                }
            } else {
                pending.iter_mut().for_each(|c| *c = None);
            }
            if obs.observe(net, &state, SampleKind::Discrete { process: p, edge: e })? {
                let t = state.time();
                return finish(Termination::Verdict, state, t);
            }
        }
    }

    /// Let `d` time pass, sampling wherever the observer asks.
    fn delay<O: Observer>(&self, state: &mut SimState, rates: &[f64], d: f64, obs: &mut O) -> Result<bool, SimError> {
        if d <= 0.0 {
            return Ok(false);
        }
        let mut pts = obs.watch_points(self.net, state, rates, d)?;
        pts.retain(|&w| w > 0.0 && w < d);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        let mut done = 0.0;
        for w in pts {
            state.advance(rates, w - done);
            done = w;
            if obs.observe(self.net, state, SampleKind::Delay)? {
                return Ok(true);
            }
        }
        state.advance(rates, d - done);
        obs.observe(self.net, state, SampleKind::Delay)
    }

    fn branch<R: Rng + ?Sized>(&self, state: &SimState, p: usize, e: usize, rng: &mut R) -> Result<usize, SimError> {
        let proc_ = &self.net.processes[p];
        let edge = &proc_.edges[e];
        if edge.branches.len() == 1 {
            return Ok(0);
        }
        let w = edge
            .branches
            .iter()
            .map(|b| b.weight.eval_f64(state))
            .collect::<Result<Vec<_>, _>>()
            .map_err(eval_err("branch weight"))?;
        choose(&w, rng).ok_or_else(|| {
            SimError::Model(format!(
                "all branch weights are zero on an edge of {} from {}",
                proc_.name, proc_.locations[edge.source].name
            ))
        })
    }

    /// Fire edge `e` of process `p` together with every broadcast receiver.
    /// Receivers and branches are chosen on the state before any update;
    /// updates then run emitter first, receivers in process order.
    /// Returns the (process, edge) pairs that moved.
    fn fire<R: Rng + ?Sized>(
        &self,
        state: &mut SimState,
        rates: &[f64],
        p: usize,
        e: usize,
        rng: &mut R,
    ) -> Result<Vec<(usize, usize)>, SimError> {
        let net = self.net;
        let mut moves = vec![(p, e, self.branch(state, p, e, rng)?)];
        if let Sync::Output(ch) = net.processes[p].edges[e].sync {
            for (q, proc_) in net.processes.iter().enumerate() {
                if q == p {
                    continue;
                }
                let mut cands = Vec::new();
                let mut weights = Vec::new();
                for &f in &proc_.outgoing[state.locations[q]] {
                    let edge = &proc_.edges[f];
                    if edge.sync != Sync::Input(ch) {
                        continue;
                    }
                    let ok = match &edge.guard {
                        None => true,
                        Some(g) => g.holds_after(state, rates, 0.0).map_err(eval_err("guard"))?,
                    };
                    if ok {
                        cands.push(f);
                        weights.push(edge.weight.eval_f64(state).map_err(eval_err("edge weight"))?);
                    }
                }
                if let Some(i) = choose(&weights, rng) {
                    let f = cands[i];
                    moves.push((q, f, self.branch(state, q, f, rng)?));
                }
            }
        }
        for &(q, f, b) in &moves {
            let branch = &net.processes[q].edges[f].branches[b];
            for u in &branch.updates {
                match u.target {
                    Assign::Var(v) => {
                        let val = u.value.eval(state).map_err(eval_err("update"))?;
                        state.vars[v] = net.vars[v].ty.coerce(val).map_err(eval_err("update"))?;
                    }
                    Assign::Clock(c) => {
                        state.clocks[c] = u.value.eval_f64(state).map_err(eval_err("update"))?;
                    }
                }
            }
            state.locations[q] = branch.target;
        }
        Ok(moves.into_iter().map(|(q, f, _)| (q, f)).collect())
    }
}

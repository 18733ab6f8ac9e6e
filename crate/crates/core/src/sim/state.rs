use crate::model::{ClockId, Env, Network, Value, VarId, TAU};

/// One point of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub locations: Vec<usize>,
    pub clocks: Vec<f64>,
    pub vars: Vec<Value>,
    /// Total growth of each clock since the start, ignoring resets.
    pub odometers: Vec<f64>,
    pub steps: u64,
}

impl SimState {
    pub fn initial(net: &Network) -> Self {
        SimState {
            locations: net.processes.iter().map(|p| p.initial).collect(),
            clocks: vec![0.0; net.clocks.len()],
            vars: net.vars.iter().map(|v| v.init).collect(),
            odometers: vec![0.0; net.clocks.len()],
            steps: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.clocks[TAU]
    }

    /// Let `dt` time units pass at the given rates.
    pub fn advance(&mut self, rates: &[f64], dt: f64) {
        if dt <= 0.0 {
            return;
        }
        for ((c, o), r) in self.clocks.iter_mut().zip(&mut self.odometers).zip(rates) {
            *c += r * dt;
            *o += r * dt;
        }
    }
}

impl Env for SimState {
    fn var(&self, id: VarId) -> Value {
        self.vars[id]
    }

    fn clock(&self, id: ClockId) -> f64 {
        self.clocks[id]
    }

    fn location(&self, process: usize) -> usize {
        self.locations[process]
    }
}

/// Numeric view of a value: booleans read as 0 or 1.
pub fn value_f64(v: Value) -> f64 {
    match v {
        Value::Int(i) => i as f64,
        Value::Real(r) => r,
        Value::Bool(b) => b as u8 as f64,
    }
}

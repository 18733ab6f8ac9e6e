use super::{Observer, SampleKind, SimError, SimState};
use crate::model::Network;

#[derive(Clone, Debug)]
pub struct TracePoint {
    pub kind: SampleKind,
    pub state: SimState,
}

/// Every sample of one run, in order.
#[derive(Clone, Debug, Default)]
pub struct Run {
    pub points: Vec<TracePoint>,
}

/// Observer that keeps every sample it sees. Never stops a run.
#[derive(Default)]
pub struct Recorder {
    pub run: Run,
}

impl Observer for Recorder {
    fn observe(&mut self, _net: &Network, state: &SimState, kind: SampleKind) -> Result<bool, SimError> {
        self.run.points.push(TracePoint {
            kind,
            state: state.clone(),
        });
        Ok(false)
    }
}

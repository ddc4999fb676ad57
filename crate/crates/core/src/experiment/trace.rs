/// One sample of a correlation-versus-time trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub correlation: f64,
    pub std_error: f64,
}

/// Whether a trace was computed or why it was not.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum TraceStatus {
    #[default]
    Ok,
    Failed(String),
}

/// Correlation of a stored state with its target along a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTrace {
    pub state: String,
    pub sequence: String,
    pub points: Vec<TracePoint>,
    pub status: TraceStatus,
}

impl CorrelationTrace {
    pub fn new(state: impl Into<String>, sequence: impl Into<String>, points: Vec<TracePoint>) -> Self {
        CorrelationTrace {
            state: state.into(),
            sequence: sequence.into(),
            points,
            status: TraceStatus::Ok,
        }
    }

    pub fn failed(state: impl Into<String>, sequence: impl Into<String>, reason: impl Into<String>) -> Self {
        CorrelationTrace {
            state: state.into(),
            sequence: sequence.into(),
            points: Vec::new(),
            status: TraceStatus::Failed(reason.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == TraceStatus::Ok
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.time).collect()
    }

    pub fn correlations(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.correlation).collect()
    }
}

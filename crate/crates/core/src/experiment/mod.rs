//! Config-driven scans, threshold counts, exponential fits, bath comparisons
//! and their CSV / plot-data files.

pub mod config;
mod fit;
pub mod io;
mod run;
mod trace;

pub use config::{ExperimentConfig, FilterComparisonConfig, NamedBath, OutputConfig, OutputFormat, Preparation};
pub use fit::{fit_exponential, FitResult, FIT_REL_TOL};
pub use io::{emit_csv, emit_plotdata};
pub use run::{
    count_above_threshold, initial_state, run_filter_comparison, run_scan, run_single, run_spinlock,
    snap_to_blocks, FilterRow, CONTROL_LABEL,
};
pub use trace::{CorrelationTrace, TracePoint, TraceStatus};

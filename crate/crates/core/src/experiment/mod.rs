//! Parameter sweeps: TOML specs, a parallel deterministic runner, CSV
//! output, plot series and a validator for finished runs.

mod plot;
mod run;
mod snapshot;
mod spec;
mod validate;

pub use plot::{emit_plot_data, write_series, Figure, PlotError, SeriesPoint, Slice};
pub use run::{
    mean_sd, read_results, run_experiment, run_to_dir, summarize, ResultRow, RunError, RunOutput, SummaryRow,
    RESULTS_FILE, SNAPSHOT_DIR, SPEC_FILE, STATUS_FILE, SUMMARY_FILE, THREADS_ENV, TIMINGS_FILE,
};
pub use snapshot::{DcState, Snapshot};
pub use spec::{ExperimentSpec, Profile, SpecError};
pub use validate::{check_dominance, validate_run, validate_snapshot, CheckResult, ValidationReport, CHECKS};

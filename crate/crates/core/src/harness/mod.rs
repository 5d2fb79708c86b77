//! Experiment runner: configuration, the act-then-reveal loop, bound
//! checks, parameter sweeps and artifact output.

mod config;
mod emit;
mod protocol;
mod record;
mod runner;

pub use config::{EnvironmentKind, PolicyKind, RunConfig};
pub use emit::{emit, emit_sweep, output_dir, Artifacts, OUTPUT_DIR_ENV};
pub use protocol::RoundProtocol;
pub use record::{BoundCheck, Comparator, FrequencyRow, RoundRow, RunRecord, RunSummary};
pub use runner::{
    best_feasible_comparator, hedge_stream_check, run, smooth_lambda, sweep, SweepRow,
    MAX_LOGGED_EXPERTS,
};

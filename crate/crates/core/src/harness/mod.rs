//! Experiment front door: configuration, initial conditions, runs and the
//! on-disk formats (trace CSV, `GFZF1` snapshots, TOML manifests).

mod config;
mod ic;
mod run;
mod selfcheck;
mod snapshot;
mod trace;

pub use config::{parse_config, RunConfig};
pub use ic::{make_initial_condition, uniform_noise};
pub use run::{compare, converge, prepare, run_experiment, RunSummary, VERSION};
pub use selfcheck::{selfcheck, CheckResult};
pub use snapshot::{Snapshot, SNAPSHOT_TAG};
pub use trace::{read_trace, replay_trace, TraceRow, TraceWriter, TRACE_COLUMNS};

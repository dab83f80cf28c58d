//! The four pipeline commands. Each `run_*` function is a pure library entry
//! point returning the report data; file emission is separated so the
//! acceptance tests can drive the commands in-process.

mod analyze;
mod export;
mod solve;
mod verify;

pub use analyze::run_analyze;
pub use export::run_export;
pub use solve::{run_solve, write_solve_artifacts, SolveArtifacts};
pub use verify::{render_table, run_verify};

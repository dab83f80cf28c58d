//! `verify`: runs the invariant suite and prints a pass/fail table.

use crate::config::RunConfig;
use crate::report::SuiteCheck;
use crate::suite;
use crate::CliResult;

/// Runs the full suite; the caller decides the exit code from the results.
pub fn run_verify(_cfg: &RunConfig) -> CliResult<Vec<SuiteCheck>> {
    suite::full_suite()
}

/// Renders the table printed by the command.
pub fn render_table(checks: &[SuiteCheck]) -> String {
    let width = checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = format!(
        "{:<width$}  {:>12}  {:>12}  result\n",
        "check", "measured", "threshold"
    );
    for c in checks {
        out.push_str(&format!(
            "{:<width$}  {:>12.4e}  {:>12.4e}  {}\n",
            c.name,
            c.measured,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}

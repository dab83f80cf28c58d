//! `export`: re-emits figure-style data from an existing solve report —
//! energy-surface curves, the `f`/`g` profiles, and the orbit trace CSVs.

use std::path::Path;

use rotorbits::gauge::GaugeField;
use rotorbits::hamiltonians::{build_system, energy_context_relaxed};
use rotorbits::modification::aux_profile;

use crate::config::RunConfig;
use crate::report::sig12;
use crate::{CliError, CliResult};

/// File names written (beyond the solve sidecars, which must already exist).
pub struct ExportOutcome {
    pub files: Vec<String>,
}

pub fn run_export(cfg: &RunConfig, out_dir: &Path) -> CliResult<ExportOutcome> {
    let report_path = out_dir.join("report.json");
    let report_text = std::fs::read_to_string(&report_path).map_err(|_| {
        CliError::Config(format!(
            "missing report `{}`; run `solve` first",
            report_path.display()
        ))
    })?;
    let report: serde_json::Value = serde_json::from_str(&report_text)
        .map_err(|e| CliError::Config(format!("unreadable report: {e}")))?;

    let mut files = Vec::new();

    std::fs::write(out_dir.join("surface.csv"), surface_csv(cfg)?)?;
    files.push("surface.csv".to_string());

    std::fs::write(out_dir.join("profiles.csv"), profiles_csv(cfg)?)?;
    files.push("profiles.csv".to_string());

    // The orbit traces are the solve sidecars; exporting only checks they
    // are present so a report never references missing data.
    if let Some(solutions) = report.get("solutions").and_then(|s| s.as_array()) {
        for sol in solutions {
            let Some(name) = sol.get("trace_csv").and_then(|v| v.as_str()) else {
                continue;
            };
            if !out_dir.join(name).is_file() {
                return Err(CliError::Config(format!(
                    "report references missing trace `{name}`"
                )));
            }
            files.push(name.to_string());
        }
    }
    Ok(ExportOutcome { files })
}

/// Radial section curves of the energy surface: along each momentum axis,
/// the two signed branches over a diagonal path through the q-cell. For the
/// pendulum this is exactly the pair `p = +/- sqrt(2 (M + cos q))`.
fn surface_csv(cfg: &RunConfig) -> CliResult<String> {
    let sys = build_system(&cfg.system)?;
    let ctx = energy_context_relaxed(&sys, cfg.m)?;
    let gauge = GaugeField::new(sys.clone(), ctx);
    let pd = sys.pdim();
    let qd = sys.qdim();
    let rows = 1000usize;

    let mut out = String::from("t");
    for j in 1..=qd {
        out.push_str(&format!(",q{j}"));
    }
    for j in 1..=pd {
        out.push_str(&format!(",p{j}_plus,p{j}_minus"));
    }
    out.push('\n');
    for i in 0..rows {
        let t = i as f64 / (rows - 1) as f64;
        let q: Vec<f64> = sys.lattice.iter().map(|&l| t * l).collect();
        out.push_str(&sig12(t));
        for v in &q {
            out.push(',');
            out.push_str(&sig12(*v));
        }
        for j in 0..pd {
            let mut dir = vec![0.0; pd];
            dir[j] = 1.0;
            let plus = gauge.sigma(&dir, &q).map_err(CliError::from)?;
            dir[j] = -1.0;
            let minus = -gauge.sigma(&dir, &q).map_err(CliError::from)?;
            out.push(',');
            out.push_str(&sig12(plus));
            out.push(',');
            out.push_str(&sig12(minus));
        }
        out.push('\n');
    }
    Ok(out)
}

/// `s, f, g` over `[-2c, 2c]` at 1000 points; the `g` column peaks at
/// `s = -delta/3 + delta_plus`.
fn profiles_csv(cfg: &RunConfig) -> CliResult<String> {
    let profile = aux_profile(cfg.delta)?;
    let c = profile.c();
    let rows = 1000usize;
    let mut out = String::from("s,f,g\n");
    for i in 0..rows {
        let s = -2.0 * c + 4.0 * c * i as f64 / (rows - 1) as f64;
        out.push_str(&format!(
            "{},{},{}\n",
            sig12(s),
            sig12(profile.f(s)),
            sig12(profile.g(s))
        ));
    }
    Ok(out)
}

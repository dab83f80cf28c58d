//! Machine-readable report documents. Everything except `timings` is a pure
//! function of the config and seed, so byte-level determinism can be checked
//! by comparing reports with the `timings` field stripped.

use std::collections::BTreeMap;

use rotorbits::hamiltonians::EnergyContext;
use rotorbits::orbits::ClassifySummary;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub config: BTreeMap<String, String>,
    pub system: String,
    pub m: f64,
    pub context: EnergyContext,
    /// Extremes of the momentum radius of the surface section, polished past
    /// the sampling grid.
    pub radius_low: f64,
    pub radius_high: f64,
    pub surface_samples: usize,
    /// `max |alpha(lambda p, q) - lambda alpha(p, q)| / (lambda alpha)`.
    pub homogeneity_defect: f64,
    /// `max |H(F2(dir, q)) - M|` over the sampled section.
    pub surface_residual: f64,
    /// `max` round-trip error of `F1 . F2` and `F2 . F1`.
    pub chart_roundtrip: f64,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct HhatMeta {
    pub r_delta: i64,
    pub n0: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointReport {
    pub b: f64,
    pub grad_norm: f64,
    pub residual_loop: f64,
    pub closure: f64,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub that: f64,
    pub d_cut: usize,
    pub n_t: usize,
    pub starts: usize,
    pub inflations: usize,
    pub critical_points: Vec<CriticalPointReport>,
    /// Candidates rejected between critical point and rotation solution.
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionReport {
    pub index: usize,
    pub that: f64,
    pub t_period: f64,
    /// Sign of the period: +1 forward winding, -1 backward.
    pub orientation: i8,
    pub k: Vec<i64>,
    pub b: f64,
    pub delta_b: f64,
    pub pclass: String,
    pub class_boundary: bool,
    /// Minimal-period index: the solution is an `n_x`-fold cover.
    pub n_x: usize,
    pub residual_ode: f64,
    pub residual_energy: f64,
    pub residual_boundary: f64,
    /// Sidecar CSV with 1024 trace rows, relative to the output directory.
    pub trace_csv: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// Representative solution indices being compared.
    pub first: usize,
    pub second: usize,
    pub rho: f64,
    pub k_ratio: f64,
    pub ratio_violated: bool,
    pub monotone_violated: bool,
    pub certified_distinct: bool,
    pub hausdorff: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub config: BTreeMap<String, String>,
    pub system: String,
    pub m: f64,
    pub k: Vec<i64>,
    pub context: EnergyContext,
    pub hhat: HhatMeta,
    pub branches: Vec<BranchReport>,
    pub solutions: Vec<SolutionReport>,
    pub classification: ClassifySummary,
    pub certificates: Vec<CertificateReport>,
    pub timings: Timings,
}

/// Wall-clock timings in seconds; excluded from determinism comparisons.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub total: f64,
    pub oracle: f64,
    pub reduction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl SuiteCheck {
    pub fn new(name: &str, measured: f64, threshold: f64) -> Self {
        SuiteCheck {
            name: name.to_string(),
            measured,
            threshold,
            pass: measured.is_finite() && measured <= threshold,
        }
    }
}

/// Serializes a report with a trailing newline (stable bytes for re-export).
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s.into_bytes()
}

/// Formats one float with 12 significant digits for CSV emission.
pub fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

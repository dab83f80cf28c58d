//! `analyze`: energy-context constants, the radial section of the energy
//! surface over a configuration grid, and gauge/chart health summaries.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotorbits::gauge::GaugeField;
use rotorbits::hamiltonians::{build_system, energy_context_relaxed, PhasePoint};
use rotorbits::opt::{grid_starts, nelder_mead, unit_from_angles};

use crate::config::RunConfig;
use crate::report::{AnalyzeReport, Timings};
use crate::{CliError, CliResult};

/// Momentum radii of the surface section at chart data packed as
/// `(angles, q)`, along the direction and its mirror (the mirror covers the
/// second hemisphere of the direction sphere); `None` off the chart domain.
fn radii(gauge: &GaugeField, v: &[f64], pd: usize, qd: usize) -> Option<(f64, f64)> {
    let dir = unit_from_angles(&v[..pd - 1], pd);
    let mirror: Vec<f64> = dir.iter().map(|x| -x).collect();
    let q = &v[pd - 1..pd - 1 + qd];
    let a = gauge.sigma(&dir, q).ok()?;
    let b = gauge.sigma(&mirror, q).ok()?;
    Some((a.min(b), a.max(b)))
}

pub fn run_analyze(cfg: &RunConfig) -> CliResult<AnalyzeReport> {
    let start = Instant::now();
    let sys = build_system(&cfg.system)?;
    let ctx = energy_context_relaxed(&sys, cfg.m)?;
    let gauge = GaugeField::new(sys.clone(), ctx);
    let pd = sys.pdim();
    let qd = sys.qdim();

    // Coarse grid over chart data (direction angles x configuration cell),
    // then a simplex polish of both extremes. The grid contains the lattice
    // points and the half-lattice points, where the trig extremes sit.
    let mut lo = vec![0.0; pd - 1 + qd];
    let mut hi = vec![std::f64::consts::TAU; pd - 1 + qd];
    for j in 0..qd {
        lo[pd - 1 + j] = 0.0;
        hi[pd - 1 + j] = sys.lattice[j];
    }
    let mut best_min = (f64::INFINITY, vec![0.0; pd - 1 + qd]);
    let mut best_max = (f64::NEG_INFINITY, vec![0.0; pd - 1 + qd]);
    let mut samples = 0usize;
    for v in grid_starts(&lo, &hi, 9) {
        let Some((rmin, rmax)) = radii(&gauge, &v, pd, qd) else {
            continue;
        };
        samples += 1;
        if rmin < best_min.0 {
            best_min = (rmin, v.clone());
        }
        if rmax > best_max.0 {
            best_max = (rmax, v);
        }
    }
    if samples == 0 {
        return Err(CliError::Internal(
            "no chart point of the energy surface could be sampled".into(),
        ));
    }
    let penal_min = |v: &[f64]| {
        radii(&gauge, v, pd, qd)
            .map(|(r, _)| r)
            .unwrap_or(f64::INFINITY)
    };
    let penal_max = |v: &[f64]| {
        radii(&gauge, v, pd, qd)
            .map(|(_, r)| -r)
            .unwrap_or(f64::INFINITY)
    };
    let (_, rlow) = nelder_mead(penal_min, &best_min.1, 0.05, 1e-13, 4000);
    let (_, neg_rhigh) = nelder_mead(penal_max, &best_max.1, 0.05, 1e-13, 4000);
    let radius_low = rlow;
    let radius_high = -neg_rhigh;

    // Health summaries on random surface points: surface residual through
    // F2, degree-one homogeneity of alpha, and chart round trips.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x616e_6c7a);
    let mut surface_residual = 0.0f64;
    let mut homogeneity = 0.0f64;
    let mut roundtrip = 0.0f64;
    let mut done = 0usize;
    while done < 2000 {
        let mut dir: Vec<f64> = (0..pd).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        for v in dir.iter_mut() {
            *v /= norm;
        }
        let q: Vec<f64> = sys.lattice.iter().map(|&l| rng.gen_range(0.0..l)).collect();
        let Ok(x) = gauge.chart_f2(&dir, &q) else {
            continue;
        };
        done += 1;
        surface_residual = surface_residual.max((sys.eval(&x.p, &x.q) - cfg.m).abs());
        let lambda = rng.gen_range(0.5..2.0);
        let scaled = PhasePoint::new(x.p.iter().map(|v| lambda * v).collect(), x.q.clone());
        let a1 = gauge.alpha(&x)?;
        let a2 = gauge.alpha(&scaled)?;
        homogeneity = homogeneity.max((a2 - lambda * a1).abs() / (lambda * a1));
        let (dir2, q2) = gauge.chart_f1(&x)?;
        let back = gauge.chart_f2(&dir2, &q2)?;
        for (a, b) in back.p.iter().zip(x.p.iter()) {
            roundtrip = roundtrip.max((a - b).abs());
        }
        for (a, b) in back.q.iter().zip(x.q.iter()) {
            roundtrip = roundtrip.max((a - b).abs());
        }
    }

    Ok(AnalyzeReport {
        config: cfg.raw.clone(),
        system: sys.name.clone(),
        m: cfg.m,
        context: ctx,
        radius_low,
        radius_high,
        surface_samples: done,
        homogeneity_defect: homogeneity,
        surface_residual,
        chart_roundtrip: roundtrip,
        timings: Timings {
            total: start.elapsed().as_secs_f64(),
            ..Timings::default()
        },
    })
}

//! `solve`: energy context, extended Hamiltonian, oracle-seeded `That`
//! branches, reduction search, back-transfer, and classification.

use std::path::Path;
use std::time::Instant;

use rotorbits::dilation::{standard_dilation, DilationSpec};
use rotorbits::gauge::GaugeField;
use rotorbits::hamiltonians::{build_system, energy_context, HamiltonianSystem};
use rotorbits::modification::{aux_profile, build_extended, ExtendedHamiltonian};
use rotorbits::oracle::{default_seeds, shoot_rotation_orbit, ShootingSeed};
use rotorbits::orbits::{
    classify_report, extract_orbit_record, g_ratio_certificate, geometrically_distinct,
    to_rotation_solution, transfer_to_fixed_period, OrbitRecord, PClass, RotationSolution, Verdict,
};
use rotorbits::reduction::{
    default_starts, find_critical_points, seed_from_orbit, ReductionContext,
};
use rotorbits::Error as CoreError;

use crate::config::{validate_rotation, RunConfig, ThatMode};
use crate::report::{
    sig12, to_json_bytes, BranchReport, CertificateReport, CriticalPointReport, HhatMeta,
    SolutionReport, SolveReport, Timings,
};
use crate::{CliError, CliResult};

/// Everything `solve` produces: the serializable report, the in-memory
/// records/solutions for downstream checks, and the sidecar CSV bodies.
pub struct SolveArtifacts {
    pub report: SolveReport,
    pub records: Vec<OrbitRecord>,
    pub solutions: Vec<RotationSolution>,
    /// `(file name, contents)` pairs, one per solution.
    pub sidecars: Vec<(String, String)>,
}

fn rel_match(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// The `P1`-branch preimage of `g(s) = 1`: the weight `g` rises from 0 to
/// its peak left of 0 and falls through `g(0) = 1`, so when the peak exceeds
/// 1 there is exactly one rising-branch root. Each transferred orbit then
/// seeds two critical points per branch, one on each monotone piece.
fn p1_shell(profile: &rotorbits::modification::AuxProfile) -> Option<f64> {
    let c = profile.c();
    let peak = -c + profile.delta_plus();
    if profile.g(peak) <= 1.0 + 1e-12 {
        return None;
    }
    let mut lo = -c + 1e-12;
    let mut hi = peak;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile.g(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Transports a fixed-period loop to the shell `s` by the dilation flow,
/// sample by sample on the sheared trace. The time parametrization is only
/// approximate off the central shell; the Newton polish absorbs that.
fn shell_shifted_seed(
    spec: &DilationSpec,
    kvec: &[f64],
    x: &rotorbits::loops::FourierLoop,
    s: f64,
    n_t: usize,
) -> rotorbits::Result<rotorbits::loops::FourierLoop> {
    use num_complex::Complex64;
    use rotorbits::hamiltonians::PhasePoint;
    use rotorbits::loops::{grid_eval, grid_fit};
    let n = x.n;
    let xs = grid_eval(x, n_t)?;
    let mut shifted = vec![Complex64::ZERO; xs.len()];
    for j in 0..n_t {
        let t = j as f64 / n_t as f64;
        let p: Vec<f64> = (0..n).map(|i| xs[j * n + i].re).collect();
        let q: Vec<f64> = (0..n).map(|i| xs[j * n + i].im + t * kvec[i]).collect();
        let y = spec.flow(s, &PhasePoint::new(p, q))?;
        for i in 0..n {
            shifted[j * n + i] = Complex64::new(y.p[i], y.q[i] - t * kvec[i]);
        }
    }
    let (loop_s, _) = grid_fit(&shifted, n, x.d_grid)?;
    Ok(loop_s)
}

/// Shooting-oracle pass: runs every seed (both time orientations when the
/// sign sweep is on) and keeps geometrically distinct solutions with their
/// cheaply transferred periods.
fn oracle_shots(
    sys: &HamiltonianSystem,
    gauge: &GaugeField,
    spec: &DilationSpec,
    k: &[i64],
    sign_sweep: bool,
) -> Vec<(f64, RotationSolution)> {
    let mut seeds = default_seeds(sys, gauge, k).unwrap_or_default();
    if sign_sweep {
        let mirrored: Vec<ShootingSeed> = seeds
            .iter()
            .map(|s| ShootingSeed {
                dir: s.dir.iter().map(|v| -v).collect(),
                q0: s.q0.clone(),
                t_guess: -s.t_guess,
            })
            .collect();
        seeds.extend(mirrored);
    }
    let tol = 1e-4 * (1.0 + gauge.ctx.rhigh);
    let mut shots: Vec<(f64, RotationSolution)> = Vec::new();
    for seed in &seeds {
        let Ok(sol) = shoot_rotation_orbit(sys, gauge, k, seed) else {
            continue;
        };
        let Ok((_, that)) = transfer_to_fixed_period(sys, spec, &sol, 8, 64) else {
            continue;
        };
        let duplicate = shots.iter().any(|(t, s)| {
            rel_match(*t, that, 1e-6)
                && geometrically_distinct(s, &sol, &sys.lattice, tol).0 == Verdict::Same
        });
        if !duplicate {
            shots.push((that, sol));
        }
    }
    shots
}

fn branch_periods(cfg: &RunConfig, shots: &[(f64, RotationSolution)]) -> CliResult<Vec<f64>> {
    let mut thats: Vec<f64> = match &cfg.that {
        ThatMode::Explicit(v) => {
            if cfg.sign_sweep {
                vec![*v, -*v]
            } else {
                vec![*v]
            }
        }
        ThatMode::Sweep(list) => list.clone(),
        ThatMode::Auto => shots.iter().map(|(t, _)| *t).collect(),
    };
    thats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thats.dedup_by(|a, b| rel_match(*a, *b, 1e-9));
    if thats.is_empty() {
        return Err(CliError::NoSolutions(
            "the shooting oracle produced no period branch; supply `solver.that`".into(),
        ));
    }
    Ok(thats)
}

struct BranchOutcome {
    report: BranchReport,
    accepted: Vec<(OrbitRecord, RotationSolution, CriticalPointReport)>,
}

fn run_branch(
    cfg: &RunConfig,
    sys: &HamiltonianSystem,
    gauge: &GaugeField,
    spec: &DilationSpec,
    hhat: &ExtendedHamiltonian,
    k: &[i64],
    that: f64,
    branch_idx: usize,
    shots: &[(f64, RotationSolution)],
) -> CliResult<BranchOutcome> {
    let mut ctx = ReductionContext::new(hhat.clone(), that, k)
        .and_then(|c| c.with_overrides(cfg.d_cut, cfg.n_t))?;
    ctx.tol_fp = cfg.tol_fp;
    ctx.tol_crit = cfg.tol_crit;

    let mut inflations = 0usize;
    let mut rejected: Vec<String> = Vec::new();
    let (ctx, cps, starts_used) = loop {
        let mut starts = Vec::new();
        for (shot_that, sol) in shots {
            if !rel_match(*shot_that, that, 1e-6) {
                continue;
            }
            match transfer_to_fixed_period(sys, spec, sol, ctx.d_grid, ctx.n_t) {
                Ok((xloop, _)) => {
                    // The transferred loop sits on the central shell (the P2
                    // critical point); its P1 twin lives where the rising
                    // branch of g matches g(0).
                    if let Some(s1) = p1_shell(&hhat.profile) {
                        match shell_shifted_seed(spec, &ctx.kvec, &xloop, s1, ctx.n_t) {
                            Ok(twin) => starts.push(seed_from_orbit(&ctx, &twin)),
                            Err(e) => rejected.push(format!("twin seed: {e}")),
                        }
                    }
                    starts.push(seed_from_orbit(&ctx, &xloop));
                }
                Err(e) => rejected.push(format!("seed transfer: {e}")),
            }
        }
        let seeded = !starts.is_empty();
        if cfg.q_per_dim.is_some() || !seeded {
            let q = cfg.q_per_dim_auto(sys.n);
            starts.extend(default_starts(
                &ctx,
                q,
                cfg.random_starts,
                cfg.seed.wrapping_add(branch_idx as u64),
            ));
        }
        let n_starts = starts.len();
        match find_critical_points(&ctx, &starts) {
            Ok(cps) => break (ctx, cps, n_starts),
            Err(CoreError::NonContraction(ratio)) if inflations < 3 => {
                rejected.push(format!("contraction lost (ratio {ratio:.3}), inflating"));
                ctx = ctx.inflate(1.5)?;
                inflations += 1;
            }
            Err(e) => return Err(e.into()),
        }
    };

    let mut accepted = Vec::new();
    let mut cp_reports = Vec::new();
    for cp in &cps {
        cp_reports.push(CriticalPointReport {
            b: cp.b,
            grad_norm: cp.grad_norm,
            residual_loop: cp.residual_loop,
            closure: cp.closure,
            ambiguous: cp.ambiguous,
        });
        let rec = match extract_orbit_record(hhat, spec, that, k, &ctx.kvec, &cp.x, ctx.n_t) {
            Ok(r) => r,
            Err(e) => {
                rejected.push(format!("record extraction (b = {:.6}): {e}", cp.b));
                continue;
            }
        };
        let sol = match to_rotation_solution(sys, gauge, spec, &rec, 1024) {
            Ok(s) => s,
            Err(e) => {
                rejected.push(format!("back transfer (b = {:.6}): {e}", cp.b));
                continue;
            }
        };
        accepted.push((rec, sol, cp_reports.last().expect("just pushed").clone()));
    }

    Ok(BranchOutcome {
        report: BranchReport {
            that,
            d_cut: ctx.d_cut,
            n_t: ctx.n_t,
            starts: starts_used,
            inflations,
            critical_points: cp_reports,
            rejected,
        },
        accepted,
    })
}

pub fn run_solve(cfg: &RunConfig) -> CliResult<SolveArtifacts> {
    let t0 = Instant::now();
    let sys = build_system(&cfg.system)?;
    let k = validate_rotation(cfg, sys.ell)?;
    let ectx = energy_context(&sys, cfg.m)?;
    let gauge = GaugeField::new(sys.clone(), ectx);
    let profile = aux_profile(cfg.delta)?;
    let spec = standard_dilation().with_delta(cfg.delta);
    let hhat = build_extended(&gauge, &profile, &spec)?;

    let t_oracle = Instant::now();
    let shots = oracle_shots(&sys, &gauge, &spec, &k, cfg.sign_sweep);
    let oracle_secs = t_oracle.elapsed().as_secs_f64();

    let thats = branch_periods(cfg, &shots)?;

    let t_red = Instant::now();
    let mut branches = Vec::new();
    let mut records = Vec::new();
    let mut solutions = Vec::new();
    let mut cp_of_solution = Vec::new();
    for (idx, &that) in thats.iter().enumerate() {
        let outcome = run_branch(cfg, &sys, &gauge, &spec, &hhat, &k, that, idx, &shots)?;
        branches.push(outcome.report);
        for (rec, sol, cp) in outcome.accepted {
            records.push(rec);
            solutions.push(sol);
            cp_of_solution.push(cp);
        }
    }
    let reduction_secs = t_red.elapsed().as_secs_f64();

    let summary = classify_report(
        &profile,
        &records,
        &solutions,
        &sys.lattice,
        gauge.ctx.rhigh,
        sys.n,
    )?;

    // Pairwise certificates between class representatives, cross-checked
    // against the trace verdicts.
    let tol = 1e-4 * (1.0 + gauge.ctx.rhigh);
    let mut certificates = Vec::new();
    for (a, &i) in summary.representatives.iter().enumerate() {
        for &j in summary.representatives.iter().skip(a + 1) {
            let Ok(cert) = g_ratio_certificate(&profile, &records[i], &records[j]) else {
                continue;
            };
            let (verdict, hausdorff) =
                geometrically_distinct(&solutions[i], &solutions[j], &sys.lattice, tol);
            certificates.push(CertificateReport {
                first: i,
                second: j,
                rho: cert.rho,
                k_ratio: cert.k_ratio,
                ratio_violated: cert.ratio_violated,
                monotone_violated: cert.monotone_violated,
                certified_distinct: cert.certified_distinct,
                hausdorff,
                verdict: match verdict {
                    Verdict::Same => "same".to_string(),
                    Verdict::Ambiguous => "ambiguous".to_string(),
                    Verdict::Distinct => "distinct".to_string(),
                },
            });
        }
    }

    let mut sol_reports = Vec::new();
    let mut sidecars = Vec::new();
    for (idx, (rec, sol)) in records.iter().zip(solutions.iter()).enumerate() {
        let name = format!("orbit_{idx:03}.csv");
        sidecars.push((name.clone(), trace_csv(&sys, &hhat, sol)?));
        sol_reports.push(SolutionReport {
            index: idx,
            that: rec.that,
            t_period: sol.t_period,
            orientation: if sol.t_period >= 0.0 { 1 } else { -1 },
            k: rec.k.clone(),
            b: rec.b,
            delta_b: rec.delta_b,
            pclass: match rec.pclass {
                PClass::P1 => "P1".to_string(),
                PClass::P2 => "P2".to_string(),
            },
            class_boundary: rec.class_boundary,
            n_x: rec.n_x,
            residual_ode: sol.residual_ode,
            residual_energy: sol.residual_energy,
            residual_boundary: sol.residual_boundary,
            trace_csv: name,
        });
    }

    let report = SolveReport {
        config: cfg.raw.clone(),
        system: sys.name.clone(),
        m: cfg.m,
        k: k.clone(),
        context: gauge.ctx,
        hhat: HhatMeta {
            r_delta: hhat.r_delta,
            n0: hhat.n0,
            m1: hhat.m1,
            m2: hhat.m2,
        },
        branches,
        solutions: sol_reports,
        classification: summary,
        certificates,
        timings: Timings {
            total: t0.elapsed().as_secs_f64(),
            oracle: oracle_secs,
            reduction: reduction_secs,
        },
    };

    Ok(SolveArtifacts {
        report,
        records,
        solutions,
        sidecars,
    })
}

/// 1024-row trace sidecar: `s, p, q, H, Hhat` at 12 significant digits.
fn trace_csv(
    sys: &HamiltonianSystem,
    hhat: &ExtendedHamiltonian,
    sol: &RotationSolution,
) -> CliResult<String> {
    let rows = 1024usize;
    let pd = sys.pdim();
    let qd = sys.qdim();
    let mut out = String::from("s");
    for j in 1..=pd {
        out.push_str(&format!(",p{j}"));
    }
    for j in 1..=qd {
        out.push_str(&format!(",q{j}"));
    }
    out.push_str(",H,Hhat\n");
    if sol.samples.len() < rows + 1 {
        return Err(CliError::Internal(format!(
            "solution carries {} samples, need {}",
            sol.samples.len(),
            rows + 1
        )));
    }
    let stride = (sol.samples.len() - 1) / rows;
    for i in 0..rows {
        let x = &sol.samples[i * stride];
        let s = sol.t_period * i as f64 / rows as f64;
        out.push_str(&sig12(s));
        for v in x.p.iter().chain(x.q.iter()) {
            out.push(',');
            out.push_str(&sig12(*v));
        }
        out.push(',');
        out.push_str(&sig12(sys.eval(&x.p, &x.q)));
        out.push(',');
        out.push_str(&sig12(hhat.eval(x)?));
        out.push('\n');
    }
    Ok(out)
}

/// Writes `report.json` and the per-solution sidecars into `out_dir`.
pub fn write_solve_artifacts(artifacts: &SolveArtifacts, out_dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("report.json"),
        to_json_bytes(&artifacts.report),
    )?;
    for (name, body) in &artifacts.sidecars {
        std::fs::write(out_dir.join(name), body)?;
    }
    Ok(())
}

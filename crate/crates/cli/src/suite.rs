//! The invariant suite behind `verify`: gauge identities, profile knots,
//! extension checks, contraction ratios, gradient finite differences, and the
//! fixed-period / fixed-energy round trip. Each function returns measured
//! defects against their contract thresholds so the command and the
//! acceptance tests share one implementation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotorbits::dilation::{standard_dilation, verify_conformal, DilationSpec};
use rotorbits::gauge::GaugeField;
use rotorbits::hamiltonians::{build_system, energy_context, HamiltonianSystem, PhasePoint};
use rotorbits::loops::{invert_a0, project_pperp, FourierLoop};
use rotorbits::modification::{aux_profile, build_extended, AuxProfile, ExtendedHamiltonian};
use rotorbits::oracle::{default_seeds, shoot_rotation_orbit};
use rotorbits::orbits::{
    extract_orbit_record, fphh_residual, geometrically_distinct, to_rotation_solution, PClass,
};
use rotorbits::reduction::{
    b_value_gradient, reduced_gradient, reduced_value, solve_y, EvalScratch, ReductionContext,
};

use crate::report::SuiteCheck;
use crate::{CliError, CliResult};

/// Pendulum fixture shared by the suites that need a full pipeline.
pub struct Fixture {
    pub sys: HamiltonianSystem,
    pub gauge: GaugeField,
    pub spec: DilationSpec,
    pub profile: AuxProfile,
    pub hhat: ExtendedHamiltonian,
}

pub fn fixture(system: &str, m: f64, delta: f64) -> CliResult<Fixture> {
    let sys = build_system(system)?;
    let ectx = energy_context(&sys, m)?;
    let gauge = GaugeField::new(sys.clone(), ectx);
    let spec = standard_dilation().with_delta(delta);
    let profile = aux_profile(delta)?;
    let hhat = build_extended(&gauge, &profile, &spec)?;
    Ok(Fixture {
        sys,
        gauge,
        spec,
        profile,
        hhat,
    })
}

fn random_surface_point(
    gauge: &GaugeField,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<f64>, Vec<f64>, PhasePoint)> {
    let sys = &gauge.sys;
    let pd = sys.pdim();
    let mut dir: Vec<f64> = (0..pd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-3 {
        return None;
    }
    for v in dir.iter_mut() {
        *v /= norm;
    }
    let q: Vec<f64> = sys.lattice.iter().map(|&l| rng.gen_range(0.0..l)).collect();
    let x = gauge.chart_f2(&dir, &q).ok()?;
    Some((dir, q, x))
}

/// Gauge identities: surface energy, degree-one homogeneity, and the
/// `F1`/`F2` chart round trips, over `n_samples` random points.
pub fn gauge_suite(fx: &Fixture, n_samples: usize, seed: u64) -> CliResult<Vec<SuiteCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = &fx.sys;
    let mut surf = 0.0f64;
    let mut homog = 0.0f64;
    let mut rt21 = 0.0f64;
    let mut rt12 = 0.0f64;
    let mut done = 0usize;
    while done < n_samples {
        let Some((dir, q, x)) = random_surface_point(&fx.gauge, &mut rng) else {
            continue;
        };
        done += 1;
        // x lies on the surface, so alpha(x) = 1 and H(x / alpha) = H(x).
        surf = surf.max((sys.eval(&x.p, &x.q) - fx.gauge.ctx.m).abs());

        let lambda = rng.gen_range(0.5..2.0);
        let scaled = PhasePoint::new(x.p.iter().map(|v| lambda * v).collect(), x.q.clone());
        let a1 = fx.gauge.alpha(&x)?;
        let a2 = fx.gauge.alpha(&scaled)?;
        homog = homog.max((a2 - lambda * a1).abs() / (lambda * a1));

        // F1 . F2 on the chart data, then F2 . F1 on the surface point.
        let (dir2, q2) = fx.gauge.chart_f1(&x)?;
        for (a, b) in dir2.iter().zip(dir.iter()) {
            rt12 = rt12.max((a - b).abs());
        }
        for (a, b) in q2.iter().zip(q.iter()) {
            rt12 = rt12.max((a - b).abs());
        }
        let back = fx.gauge.chart_f2(&dir2, &q2)?;
        for (a, b) in back.p.iter().zip(x.p.iter()) {
            rt21 = rt21.max((a - b).abs());
        }
        for (a, b) in back.q.iter().zip(x.q.iter()) {
            rt21 = rt21.max((a - b).abs());
        }
    }
    Ok(vec![
        SuiteCheck::new("gauge.surface_energy", surf, 1e-10),
        SuiteCheck::new("gauge.homogeneity", homog, 1e-10),
        SuiteCheck::new("gauge.chart_f1_of_f2", rt12, 1e-9),
        SuiteCheck::new("gauge.chart_f2_of_f1", rt21, 1e-9),
    ])
}

/// Profile checks: C^2 matching at the knots, the closed-form values at 0,
/// the peak offset `delta_plus`, and the stationarity of `g` at the peak.
pub fn profile_suite(delta: f64) -> CliResult<Vec<SuiteCheck>> {
    let profile = aux_profile(delta)?;
    let c = profile.c();
    // The knot formulas join with vanishing second derivative, so one-sided
    // evaluations a few ulps away bound the jump itself.
    let h = 5e-16;
    let mut knot = 0.0f64;
    for s in [-c, 0.0, c] {
        knot = knot.max((profile.f(s + h) - profile.f(s - h)).abs());
        knot = knot.max((profile.fp(s + h) - profile.fp(s - h)).abs());
        knot = knot.max((profile.fpp(s + h) - profile.fpp(s - h)).abs());
    }
    let peak = -c + profile.delta_plus();
    Ok(vec![
        SuiteCheck::new("profile.c2_knots", knot, 1e-12),
        SuiteCheck::new(
            "profile.f_at_zero",
            (profile.f(0.0) - delta / 6.0).abs(),
            1e-15,
        ),
        SuiteCheck::new("profile.fp_at_zero", (profile.fp(0.0) - 1.0).abs(), 1e-15),
        SuiteCheck::new("profile.g_at_zero", (profile.g(0.0) - 1.0).abs(), 1e-15),
        SuiteCheck::new("profile.gp_at_peak", profile.gp(peak).abs(), 1e-8),
    ])
}

/// Extension checks: lattice periodicity of `Hhat`, level/shell agreement,
/// transversality `Hhat' . xi = f'(s)`, and conformality of the dilation
/// flow.
pub fn extension_suite(fx: &Fixture, n_samples: usize, seed: u64) -> CliResult<Vec<SuiteCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = fx.profile.c();
    let mut periodic = 0.0f64;
    let mut level = 0.0f64;
    let mut transversal = 0.0f64;
    let mut flow_samples = Vec::new();
    let mut done = 0usize;
    while done < n_samples {
        let Some((_, _, x0)) = random_surface_point(&fx.gauge, &mut rng) else {
            continue;
        };
        done += 1;
        let s = rng.gen_range(-0.95 * c..0.95 * c);
        let x = fx.spec.flow(s, &x0)?;

        // (hH-1b): the shell D_s is the Hhat level set f(s).
        let val = fx.hhat.eval(&x)?;
        level = level.max((val - fx.profile.f(s)).abs());

        // Transversality against the dilation field xi.
        let ev = fx.hhat.value_grad(&x.p, &x.q, None)?;
        let xi = fx.spec.xi(&x);
        let mut pair = 0.0;
        for (g, v) in ev.grad_p.iter().zip(xi.p.iter()) {
            pair += g * v;
        }
        for (g, v) in ev.grad_q.iter().zip(xi.q.iter()) {
            pair += g * v;
        }
        transversal = transversal.max((pair - fx.profile.fp(s)).abs());

        // Lattice periodicity in p (period N0) and q (configuration lattice).
        for j in 0..fx.sys.pdim() {
            let mut shifted = x.clone();
            shifted.p[j] += fx.hhat.n0;
            periodic = periodic.max((fx.hhat.eval(&shifted)? - val).abs());
        }
        for j in 0..fx.sys.qdim() {
            let mut shifted = x.clone();
            shifted.q[j] += fx.sys.lattice[j];
            periodic = periodic.max((fx.hhat.eval(&shifted)? - val).abs());
        }

        if flow_samples.len() < 64 {
            flow_samples.push(x0);
        }
    }
    let mut conformal = 0.0f64;
    for s in [-0.5 * c, 0.25 * c, 0.8 * c] {
        conformal = conformal.max(verify_conformal(&fx.spec, s, &flow_samples)?);
    }
    Ok(vec![
        SuiteCheck::new("extension.lattice_periodicity", periodic, 1e-12),
        SuiteCheck::new("extension.level_shell", level, 1e-8),
        SuiteCheck::new("extension.transversality", transversal, 1e-7),
        SuiteCheck::new("extension.conformality", conformal, 1e-5),
    ])
}

fn surface_mean_start(ctx: &ReductionContext, q: f64, sign: f64) -> CliResult<FourierLoop> {
    let sigma = ctx.hhat.gauge.sigma(&[sign], &[q])?;
    let mut z = ctx.zero_z();
    z.mode_mut(0)[0] = Complex64::new(sign * sigma, q);
    Ok(z)
}

/// Measures the Lipschitz ratio of one application of the high-mode map
/// `y -> A0^{-1} Pperp B'(z + y)` over `n_pairs` random `(z, y1, y2)`.
pub fn contraction_suite(that: f64, n_pairs: usize, seed: u64) -> CliResult<Vec<SuiteCheck>> {
    let fx = fixture("pendulum", 3.5, 0.3)?;
    let ctx = ReductionContext::new(fx.hhat, that, &[1]).map_err(CliError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut scratch = EvalScratch::new(ctx.n_t);
    let apply = |y: &FourierLoop,
                 z_full: &FourierLoop,
                 scratch: &mut EvalScratch|
     -> rotorbits::Result<FourierLoop> {
        let mut x = z_full.clone();
        x.axpy(1.0, y);
        let (_, grad) = b_value_gradient(&ctx, &x, scratch)?;
        invert_a0(&project_pperp(&grad, ctx.d_cut), ctx.d_cut)
    };
    for _ in 0..n_pairs {
        let q = rng.gen_range(0.0..std::f64::consts::TAU);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut z = surface_mean_start(&ctx, q, sign)?;
        z.mode_mut(1)[0] = Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
        let z_full = ctx.embed(&z);
        let mut ys = Vec::new();
        for _ in 0..2 {
            let mut y = z_full.clone();
            y.scale(0.0);
            for m in [
                ctx.d_cut as i64 + 1,
                ctx.d_cut as i64 + 2,
                -(ctx.d_cut as i64) - 1,
            ] {
                y.mode_mut(m)[0] =
                    Complex64::new(rng.gen_range(-1e-3..1e-3), rng.gen_range(-1e-3..1e-3));
            }
            ys.push(y);
        }
        let f1 = apply(&ys[0], &z_full, &mut scratch)?;
        let f2 = apply(&ys[1], &z_full, &mut scratch)?;
        let mut diff = f1;
        diff.axpy(-1.0, &f2);
        let mut dy = ys[0].clone();
        dy.axpy(-1.0, &ys[1]);
        let denom = dy.norm();
        if denom > 0.0 {
            worst = worst.max(diff.norm() / denom);
        }
    }
    // The fixed-point iteration itself must also report a contractive ratio.
    let mut iter_ratio = 0.0f64;
    for _ in 0..6 {
        let q = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut z = surface_mean_start(&ctx, q, 1.0)?;
        z.mode_mut(1)[0] = Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
        let mut s = EvalScratch::new(ctx.n_t);
        let slaved = solve_y(&ctx, &z, &mut s)?;
        iter_ratio = iter_ratio.max(slaved.ratio);
    }
    Ok(vec![
        SuiteCheck::new("contraction.pair_ratio", worst, 0.5 + 1e-6),
        SuiteCheck::new("contraction.iteration_ratio", iter_ratio, 0.5 + 1e-6),
    ])
}

/// Finite-difference check of the reduced gradient plus its lattice
/// periodicity, on a small pendulum context.
pub fn gradient_suite() -> CliResult<Vec<SuiteCheck>> {
    let fx = fixture("pendulum", 3.5, 0.3)?;
    let ctx = ReductionContext::new(fx.hhat, 0.5, &[1]).map_err(CliError::from)?;
    let mut z = surface_mean_start(&ctx, 0.3, 1.0)?;
    z.mode_mut(1)[0] = Complex64::new(0.05, -0.02);
    z.mode_mut(-1)[0] = Complex64::new(-0.03, 0.04);
    let mut scratch = EvalScratch::new(ctx.n_t);
    let g = reduced_gradient(&ctx, &z, &mut scratch)?;
    let gv = ctx.pack(&g);
    let v = ctx.pack(&z);
    let mut fd_err = 0.0f64;
    for i in 0..ctx.dim() {
        let h = 1e-5;
        let mut vp = v.clone();
        vp[i] += h;
        let mut vm = v.clone();
        vm[i] -= h;
        let fp = reduced_value(&ctx, &ctx.unpack(&vp), &mut scratch)?;
        let fm = reduced_value(&ctx, &ctx.unpack(&vm), &mut scratch)?;
        let fd = (fp - fm) / (2.0 * h);
        fd_err = fd_err.max((gv[i] - fd).abs() / (1.0 + fd.abs()));
    }

    let mut periodic = 0.0f64;
    let shifts = [
        Complex64::new(ctx.hhat.n0, 0.0),
        Complex64::new(0.0, std::f64::consts::TAU),
    ];
    for shift in shifts {
        let mut zs = z.clone();
        zs.mode_mut(0)[0] += shift;
        let mut s = EvalScratch::new(ctx.n_t);
        let gs = reduced_gradient(&ctx, &zs, &mut s)?;
        for (a, b) in g.coeffs.iter().zip(gs.coeffs.iter()) {
            periodic = periodic.max((a - b).norm());
        }
    }
    Ok(vec![
        SuiteCheck::new("gradient.finite_difference", fd_err, 1e-6),
        SuiteCheck::new("gradient.lattice_periodicity", periodic, 1e-10),
    ])
}

/// Round trip: oracle orbit, transfer to the fixed-period problem, record
/// extraction on the central shell, and back-transfer to a fixed-energy
/// rotation solution.
pub fn roundtrip_suite() -> CliResult<Vec<SuiteCheck>> {
    let fx = fixture("pendulum", 3.5, 0.3)?;
    let seeds = default_seeds(&fx.sys, &fx.gauge, &[1])?;
    let sol = shoot_rotation_orbit(&fx.sys, &fx.gauge, &[1], &seeds[0])?;
    let (xloop, that) =
        rotorbits::orbits::transfer_to_fixed_period(&fx.sys, &fx.spec, &sol, 40, 512)?;
    let residual = fphh_residual(&fx.hhat, that, &sol.kvec, &xloop, 512)?;
    let rec = extract_orbit_record(&fx.hhat, &fx.spec, that, &[1], &sol.kvec, &xloop, 512)?;
    let rt = to_rotation_solution(&fx.sys, &fx.gauge, &fx.spec, &rec, 1024)?;
    let t_rel = (rt.t_period - sol.t_period).abs() / sol.t_period.abs();
    let tol = 1e-4 * (1.0 + fx.gauge.ctx.rhigh);
    let (_, hausdorff) = geometrically_distinct(&rt, &sol, &fx.sys.lattice, tol);
    let class_ok = if rec.pclass == PClass::P2 { 0.0 } else { 1.0 };
    Ok(vec![
        SuiteCheck::new("roundtrip.fixed_period_residual", residual, 1e-7),
        SuiteCheck::new("roundtrip.shell_coordinate", rec.delta_b.abs(), 1e-7),
        SuiteCheck::new(
            "roundtrip.level",
            (rec.b - fx.profile.delta / 6.0).abs(),
            1e-8,
        ),
        SuiteCheck::new("roundtrip.period", t_rel, 1e-6),
        SuiteCheck::new("roundtrip.trace", hausdorff, 1e-6),
        SuiteCheck::new("roundtrip.central_class", class_ok, 0.0),
    ])
}

/// The full `verify` suite in canonical order.
pub fn full_suite() -> CliResult<Vec<SuiteCheck>> {
    let fx = fixture("pendulum", 3.5, 0.3)?;
    let mut checks = Vec::new();
    checks.extend(gauge_suite(&fx, 10_000, 11)?);
    checks.extend(profile_suite(0.3)?);
    checks.extend(extension_suite(&fx, 400, 13)?);
    checks.extend(contraction_suite(1.0, 50, 17)?);
    checks.extend(gradient_suite()?);
    checks.extend(roundtrip_suite()?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn wrong_dilation_field_fails_conformality() {
        // A flow scaling p by e^{2s} rescales the symplectic form by e^{2s}
        // instead of e^s; the conformality defect must expose it.
        let bad = rotorbits::dilation::DilationSpec::new(
            0.3,
            Arc::new(|x: &PhasePoint| PhasePoint::new(x.p.clone(), vec![0.0; x.q.len()])),
            Some(Arc::new(|s: f64, x: &PhasePoint| {
                PhasePoint::new(
                    x.p.iter().map(|v| v * (2.0 * s).exp()).collect(),
                    x.q.clone(),
                )
            })),
        );
        let samples = vec![PhasePoint::new(vec![2.0], vec![0.3])];
        let defect = verify_conformal(&bad, 0.1, &samples).unwrap();
        assert!(defect > 1e-2, "defect {defect} should flag the bad flow");
        let good = standard_dilation();
        let defect = verify_conformal(&good, 0.1, &samples).unwrap();
        assert!(defect < 1e-5);
    }

    #[test]
    fn full_suite_passes() {
        let checks = full_suite().unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    }
}

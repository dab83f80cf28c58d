//! Transfers between the fixed-energy and fixed-period problems, shell-data
//! extraction, the `P1`/`P2` classification, and distinctness certificates.
//!
//! Conventions: the fixed-period problem is `xdot + (0,kv) = That J Hhat'(x +
//! t (0,kv))` for 1-periodic `x` with `kv = L (.) k`; the fixed-energy
//! problem is `zdot = J H'(z)`, `H = M`, `z(T) = z(0) + (0, kv)`.

use num_complex::Complex64;

use crate::dilation::DilationSpec;
use crate::error::{Error, Result};
use crate::gauge::GaugeField;
use crate::hamiltonians::{HamiltonianSystem, PhasePoint};
use crate::loops::{grid_eval, grid_fit, FourierLoop};
use crate::modification::{level_shell, AuxProfile, ExtendedHamiltonian};
use crate::ode;

/// Which monotone branch of `g` the shell coordinate falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PClass {
    P1,
    P2,
}

/// A classified solution of the fixed-period problem.
#[derive(Debug, Clone)]
pub struct OrbitRecord {
    pub x: FourierLoop,
    pub that: f64,
    pub k: Vec<i64>,
    pub kvec: Vec<f64>,
    /// The constant `Hhat` level along the sheared loop.
    pub b: f64,
    /// Shell coordinate with `f(delta_b) = b`.
    pub delta_b: f64,
    /// Momentum-lattice translate bringing the sheared loop into the cell.
    pub m_shift: Vec<f64>,
    /// Sheared, translated, and dilated-down samples on `D_0` (uniform `t`).
    pub w_samples: Vec<PhasePoint>,
    /// Minimal-period index of the projected orbit.
    pub n_x: usize,
    pub pclass: PClass,
    /// Set when `delta_b` sits at the `P1`/`P2` boundary within tolerance.
    pub class_boundary: bool,
}

/// A rotation-type solution of the fixed-energy problem.
#[derive(Debug, Clone)]
pub struct RotationSolution {
    /// Samples of `z(s)` at `s_j = j T / (len - 1)`, endpoints included.
    pub samples: Vec<PhasePoint>,
    pub t_period: f64,
    pub k: Vec<i64>,
    pub kvec: Vec<f64>,
    pub residual_ode: f64,
    pub residual_energy: f64,
    pub residual_boundary: f64,
}

fn pairing(sys: &HamiltonianSystem, spec: &DilationSpec, x: &PhasePoint) -> f64 {
    let (hp, hq) = sys.grad(&x.p, &x.q);
    let xi = spec.xi(x);
    hp.iter().zip(xi.p.iter()).map(|(a, b)| a * b).sum::<f64>()
        + hq.iter().zip(xi.q.iter()).map(|(a, b)| a * b).sum::<f64>()
}

fn hamiltonian_rhs(
    sys: &HamiltonianSystem,
    y: &[f64],
    scale: &dyn Fn(&PhasePoint) -> f64,
) -> Vec<f64> {
    let pd = sys.pdim();
    let x = PhasePoint::new(y[..pd].to_vec(), y[pd..].to_vec());
    let (hp, hq) = sys.grad(&x.p, &x.q);
    let c = scale(&x);
    let mut out: Vec<f64> = hq.iter().map(|v| -c * v).collect();
    out.extend(hp.iter().map(|v| c * v));
    out
}

/// Transfers a fixed-energy solution to the fixed-period problem.
///
/// `That = int_0^T H'(z) . xi(z) dtheta`, and the loop is `x(s) = z(theta(s))
/// - s (0, kv)` with the time map `dtheta/ds = That / (H'(z) . xi(z))`.
pub fn transfer_to_fixed_period(
    sys: &HamiltonianSystem,
    spec: &DilationSpec,
    sol: &RotationSolution,
    d_grid: usize,
    n_t: usize,
) -> Result<(FourierLoop, f64)> {
    let n = sys.n;
    let m = sol.samples.len() - 1;
    let mut phis = Vec::with_capacity(m);
    for x in &sol.samples[..m] {
        let phi = pairing(sys, spec, x);
        if phi <= 0.0 {
            return Err(Error::TransversalityLoss(format!(
                "H' . xi = {phi:.3e} along the orbit"
            )));
        }
        phis.push(phi);
    }
    // theta = u T with u in [0, 1); phi is 1-periodic in u, so the rectangle
    // rule is spectrally accurate.
    let that = sol.t_period * phis.iter().sum::<f64>() / m as f64;

    let scale = |x: &PhasePoint| that / pairing(sys, spec, x);
    let rhs = |_s: f64, y: &[f64]| hamiltonian_rhs(sys, y, &scale);
    let mut y0: Vec<f64> = sol.samples[0].p.clone();
    y0.extend_from_slice(&sol.samples[0].q);
    let path = ode::integrate_sampled(&rhs, 0.0, 1.0, &y0, 1e-12, n_t)?;

    let pd = sys.pdim();
    for (a, (b, kv)) in path[n_t][..pd].iter().zip(
        path[0][..pd].iter().map(|v| (*v, 0.0)).chain(
            path[0][pd..]
                .iter()
                .zip(sol.kvec.iter())
                .map(|(v, kv)| (*v, *kv)),
        ),
    ) {
        if (a - b - kv).abs() > 1e-8 {
            return Err(Error::NotASolution(format!(
                "time-mapped trajectory fails to close: gap {:.3e}",
                (a - b - kv).abs()
            )));
        }
    }

    let mut samples = vec![Complex64::ZERO; n_t * n];
    for kdx in 0..n_t {
        let u = kdx as f64 / n_t as f64;
        let y = &path[kdx];
        for j in 0..n {
            samples[kdx * n + j] = Complex64::new(y[j], y[pd + j] - u * sol.kvec[j]);
        }
    }
    let (x, _) = grid_fit(&samples, n, d_grid)?;
    Ok((x, that))
}

/// Sup-norm residual of the fixed-period equation for a candidate loop.
pub fn fphh_residual(
    hhat: &ExtendedHamiltonian,
    that: f64,
    kvec: &[f64],
    x: &FourierLoop,
    n_t: usize,
) -> Result<f64> {
    let n = x.n;
    let xs = grid_eval(x, n_t)?;
    let dxs = grid_eval(&x.derivative(), n_t)?;
    let mut worst = 0.0f64;
    let mut sigma = None;
    for k in 0..n_t {
        let t = k as f64 / n_t as f64;
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for j in 0..n {
            let z = xs[k * n + j];
            p.push(z.re);
            q.push(z.im + t * kvec[j]);
        }
        let ev = hhat.value_grad(&p, &q, sigma)?;
        sigma = ev.sigma;
        for j in 0..n {
            let d = dxs[k * n + j];
            let rp = d.re - (-that * ev.grad_q[j]);
            let rq = d.im + kvec[j] - that * ev.grad_p[j];
            worst = worst.max(rp.abs()).max(rq.abs());
        }
    }
    Ok(worst)
}

/// Extracts shell data and classification from a fixed-period solution loop.
pub fn extract_orbit_record(
    hhat: &ExtendedHamiltonian,
    spec: &DilationSpec,
    that: f64,
    k: &[i64],
    kvec: &[f64],
    x: &FourierLoop,
    n_t: usize,
) -> Result<OrbitRecord> {
    let n = x.n;
    let c = hhat.profile.c();
    let xs = grid_eval(x, n_t)?;
    let mut sheared: Vec<PhasePoint> = Vec::with_capacity(n_t);
    for kdx in 0..n_t {
        let t = kdx as f64 / n_t as f64;
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for j in 0..n {
            let z = xs[kdx * n + j];
            p.push(z.re);
            q.push(z.im + t * kvec[j]);
        }
        sheared.push(PhasePoint::new(p, q));
    }

    let mut sigma = None;
    let mut bmin = f64::INFINITY;
    let mut bmax = f64::NEG_INFINITY;
    let mut bsum = 0.0;
    for xp in &sheared {
        let ev = hhat.value_grad(&xp.p, &xp.q, sigma)?;
        sigma = ev.sigma;
        bmin = bmin.min(ev.value);
        bmax = bmax.max(ev.value);
        bsum += ev.value;
    }
    if bmax - bmin > 1e-6 * hhat.profile.delta {
        return Err(Error::NotASolution(format!(
            "Hhat not constant along the loop: spread {:.3e}",
            bmax - bmin
        )));
    }
    let b = bsum / n_t as f64;
    if !(b > 0.0 && b < c) {
        return Err(Error::LevelOutOfRange { b, max: c });
    }
    let delta_b = level_shell(&hhat.profile, b)?;

    // The unique momentum translate placing the loop inside the cell; the
    // loop is connected and the shell avoids the faces, so the translate read
    // off the first sample works for every sample.
    let m_shift: Vec<f64> = sheared[0]
        .p
        .iter()
        .map(|&v| hhat.n0 * (v / hhat.n0).round_ties_even())
        .collect();
    let mut w_samples = Vec::with_capacity(n_t);
    for xp in &sheared {
        let inside = PhasePoint::new(
            xp.p.iter()
                .zip(m_shift.iter())
                .map(|(a, s)| a - s)
                .collect(),
            xp.q.clone(),
        );
        let w = spec.flow(-delta_b, &inside)?;
        let shell = hhat.gauge.shell_coordinate(&w)?;
        if shell.abs() > 1e-7 {
            return Err(Error::NotASolution(format!(
                "descended sample off D_0: shell coordinate {shell:.3e}"
            )));
        }
        w_samples.push(w);
    }

    let n_x = minimal_period_index(x, kvec, &hhat.gauge.sys.lattice, hhat.n0, k);

    let boundary_value = -c + hhat.profile.delta_plus();
    let class_boundary = (delta_b - boundary_value).abs() <= 1e-9;
    let pclass = if delta_b <= boundary_value {
        PClass::P1
    } else {
        PClass::P2
    };

    Ok(OrbitRecord {
        x: x.clone(),
        that,
        k: k.to_vec(),
        kvec: kvec.to_vec(),
        b,
        delta_b,
        m_shift,
        w_samples,
        n_x,
        pclass,
        class_boundary,
    })
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Largest `j <= 64` dividing `gcd(k)` under which the loop is `1/j`-periodic
/// modulo the phase-space lattice.
fn minimal_period_index(
    x: &FourierLoop,
    kvec: &[f64],
    lattice: &[f64],
    n0: f64,
    k: &[i64],
) -> usize {
    let g = k.iter().fold(0i64, |acc, &v| gcd(acc, v)).max(1);
    let n = x.n;
    let probes = 96usize;
    'outer: for j in (1..=g.min(64)).rev() {
        if g % j != 0 {
            continue;
        }
        if j == 1 {
            return 1;
        }
        let shift = 1.0 / j as f64;
        // u(t + 1/j) - u(t) must be the constant lattice vector determined at
        // t = 0, where u(t) = x(t) + t (0, kv).
        let base = lattice_gap(x, kvec, 0.0, shift, n);
        for i in 0..probes {
            let t = i as f64 / probes as f64;
            let gap = lattice_gap(x, kvec, t, shift, n);
            for jdx in 0..2 * n {
                if (gap[jdx] - base[jdx]).abs() > 1e-7 {
                    continue 'outer;
                }
            }
        }
        // The constant must itself be a lattice vector.
        for (jdx, v) in base.iter().enumerate() {
            let period = if jdx < n { n0 } else { lattice[jdx - n] };
            let frac = v / period;
            if (frac - frac.round()).abs() * period > 1e-7 {
                continue 'outer;
            }
        }
        return j as usize;
    }
    1
}

fn lattice_gap(x: &FourierLoop, kvec: &[f64], t: f64, shift: f64, n: usize) -> Vec<f64> {
    let a = x.eval_at(t + shift);
    let b = x.eval_at(t);
    let mut out = Vec::with_capacity(2 * n);
    for j in 0..n {
        out.push(a[j].re - b[j].re);
    }
    for j in 0..n {
        out.push(a[j].im - b[j].im + shift * kvec[j]);
    }
    out
}

/// Back-transfer: reparametrizes the `D_0` loop of a record into a
/// fixed-energy rotation solution with period `T` from the `g`-quadrature.
pub fn to_rotation_solution(
    sys: &HamiltonianSystem,
    gauge: &GaugeField,
    spec: &DilationSpec,
    rec: &OrbitRecord,
    n_s: usize,
) -> Result<RotationSolution> {
    to_rotation_solution_with(sys, gauge, spec, rec, n_s, None)
}

/// `to_rotation_solution` with an explicit profile override (testing hook).
pub fn to_rotation_solution_with(
    sys: &HamiltonianSystem,
    gauge: &GaugeField,
    spec: &DilationSpec,
    rec: &OrbitRecord,
    n_s: usize,
    profile_override: Option<AuxProfile>,
) -> Result<RotationSolution> {
    let profile = profile_override.unwrap_or(AuxProfile { delta: spec.delta });
    let cg = profile.c();
    if rec.delta_b.abs() >= cg {
        return Err(Error::DilationDomain(format!(
            "shell coordinate {} reaches the profile knot {cg}",
            rec.delta_b
        )));
    }
    let gval = profile.g(rec.delta_b);
    if !(gval > 0.0) {
        return Err(Error::DilationDomain(format!(
            "g(delta_b) = {gval} is not positive"
        )));
    }
    let m = rec.w_samples.len();
    let mut quad = 0.0;
    for w in &rec.w_samples {
        let phi = pairing(sys, spec, w);
        if phi <= 0.0 {
            return Err(Error::TransversalityLoss(format!(
                "H' . xi = {phi:.3e} on the D_0 loop"
            )));
        }
        quad += 1.0 / phi;
    }
    let t_period = gval * rec.that * quad / m as f64;

    let z0 = gauge.project_to_surface(&rec.w_samples[0])?;
    let rhs = |_s: f64, y: &[f64]| hamiltonian_rhs(sys, y, &|_| 1.0);
    let mut y0 = z0.p.clone();
    y0.extend_from_slice(&z0.q);
    let path = ode::integrate_sampled(&rhs, 0.0, t_period, &y0, 1e-11, n_s)?;
    let pd = sys.pdim();
    let samples: Vec<PhasePoint> = path
        .iter()
        .map(|y| PhasePoint::new(y[..pd].to_vec(), y[pd..].to_vec()))
        .collect();

    let mut residual_energy = 0.0f64;
    for x in &samples {
        residual_energy = residual_energy.max((sys.eval(&x.p, &x.q) - gauge.ctx.m).abs());
    }
    let mut residual_boundary = 0.0f64;
    let last = samples.last().unwrap();
    for j in 0..pd {
        residual_boundary = residual_boundary.max((last.p[j] - samples[0].p[j]).abs());
    }
    for j in 0..sys.qdim() {
        residual_boundary =
            residual_boundary.max((last.q[j] - samples[0].q[j] - rec.kvec[j]).abs());
    }
    let residual_ode = ode_residual(sys, &samples, t_period, &rec.kvec);

    let sol = RotationSolution {
        samples,
        t_period,
        k: rec.k.clone(),
        kvec: rec.kvec.clone(),
        residual_ode,
        residual_energy,
        residual_boundary,
    };
    if residual_ode > 1e-7 || residual_energy > 1e-8 || residual_boundary > 1e-8 {
        return Err(Error::NotASolution(format!(
            "rotation-solution residuals (ode {residual_ode:.3e}, energy \
             {residual_energy:.3e}, boundary {residual_boundary:.3e}) out of contract"
        )));
    }
    Ok(sol)
}

/// Sup-norm defect of `zdot = J H'(z)` from a 5-point stencil on the samples.
pub fn ode_residual(
    sys: &HamiltonianSystem,
    samples: &[PhasePoint],
    t_period: f64,
    kvec: &[f64],
) -> f64 {
    let m = samples.len() - 1;
    let pd = sys.pdim();
    let qd = sys.qdim();
    let h = t_period / m as f64;
    let fetch = |i: i64, j: usize, is_p: bool| -> f64 {
        // Periodic extension: z(s + T) = z(s) + (0, kv).
        let (wrap, idx) = (i.div_euclid(m as i64), i.rem_euclid(m as i64) as usize);
        let x = &samples[idx];
        if is_p {
            x.p[j]
        } else {
            x.q[j] + wrap as f64 * kvec[j]
        }
    };
    let mut worst = 0.0f64;
    for i in 0..m {
        let x = &samples[i];
        let (hp, hq) = sys.grad(&x.p, &x.q);
        for j in 0..pd + qd {
            let is_p = j < pd;
            let jj = if is_p { j } else { j - pd };
            let d = (8.0 * (fetch(i as i64 + 1, jj, is_p) - fetch(i as i64 - 1, jj, is_p))
                - (fetch(i as i64 + 2, jj, is_p) - fetch(i as i64 - 2, jj, is_p)))
                / (12.0 * h);
            let target = if is_p { -hq[jj] } else { hp[jj] };
            worst = worst.max((d - target).abs());
        }
    }
    worst
}

/// Distinctness verdict for a pair of solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    Distinct,
    Same,
    Ambiguous,
}

/// Squared distance from a point to a closed-polyline segment, after lifting
/// the segment to the covering copy nearest the point in each periodic
/// coordinate.
fn dist2_point_segment(x: &[f64], y0: &[f64], y1: &[f64], periods: &[Option<f64>]) -> f64 {
    let dim = x.len();
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    for j in 0..dim {
        a[j] = y0[j];
        b[j] = y1[j];
        if let Some(per) = periods[j] {
            // Keep the segment connected, then translate it next to x.
            b[j] += per * ((a[j] - b[j]) / per).round();
            let shift = per * ((x[j] - a[j]) / per).round();
            a[j] += shift;
            b[j] += shift;
        }
    }
    let mut vv = 0.0;
    let mut vw = 0.0;
    for j in 0..dim {
        let v = b[j] - a[j];
        vv += v * v;
        vw += v * (x[j] - a[j]);
    }
    let t = if vv > 0.0 {
        (vw / vv).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut d2 = 0.0;
    for j in 0..dim {
        let c = a[j] + t * (b[j] - a[j]);
        d2 += (x[j] - c).powi(2);
    }
    d2
}

/// Symmetric Hausdorff distance between two closed polylines, with optional
/// wrap periods per coordinate.
pub(crate) fn polyline_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], periods: &[Option<f64>]) -> f64 {
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        let m = to.len();
        let mut worst = 0.0f64;
        for x in from {
            let mut best = f64::INFINITY;
            for i in 0..m {
                let d2 = dist2_point_segment(x, &to[i], &to[(i + 1) % m], periods);
                best = best.min(d2);
                if best == 0.0 {
                    break;
                }
            }
            worst = worst.max(best);
        }
        worst.sqrt()
    };
    one_sided(a, b).max(one_sided(b, a))
}

fn trace_distance(a: &[PhasePoint], b: &[PhasePoint], lattice: &[f64]) -> f64 {
    let to_rows = |s: &[PhasePoint]| -> Vec<Vec<f64>> {
        s.iter()
            .map(|x| {
                let mut row = x.p.clone();
                row.extend_from_slice(&x.q);
                row
            })
            .collect()
    };
    let pd = a[0].p.len();
    let mut periods: Vec<Option<f64>> = vec![None; pd];
    periods.extend(lattice.iter().map(|l| Some(*l)));
    polyline_hausdorff(&to_rows(a), &to_rows(b), &periods)
}

/// Decides geometric distinctness on the q-torus (p unwrapped).
///
/// Returns the verdict and the symmetric Hausdorff distance; the ambiguous
/// band is `(tol, 100 tol]`.
pub fn geometrically_distinct(
    a: &RotationSolution,
    b: &RotationSolution,
    lattice: &[f64],
    tol: f64,
) -> (Verdict, f64) {
    let d = trace_distance(&a.samples, &b.samples, lattice);
    let verdict = if d <= tol {
        Verdict::Same
    } else if d <= 100.0 * tol {
        Verdict::Ambiguous
    } else {
        Verdict::Distinct
    };
    (verdict, d)
}

/// A `g`-ratio distinctness certificate for a pair of records.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GRatioCertificate {
    pub rho: f64,
    pub k_ratio: f64,
    /// Sameness requires `|rho| = |k1|/|k2|`; violation certifies distinct.
    pub ratio_violated: bool,
    /// Same `(k, That)` and class, but different `g`-values: distinct by the
    /// strict monotonicity of `g` on the class interval.
    pub monotone_violated: bool,
    pub certified_distinct: bool,
}

pub fn g_ratio_certificate(
    profile: &AuxProfile,
    rec1: &OrbitRecord,
    rec2: &OrbitRecord,
) -> Result<GRatioCertificate> {
    let g1 = profile.g(rec1.delta_b);
    let g2 = profile.g(rec2.delta_b);
    if !(g1 > 0.0 && g2 > 0.0) {
        return Err(Error::DilationDomain(format!(
            "g values ({g1}, {g2}) must be positive"
        )));
    }
    let rho = g1 * rec1.that / (g2 * rec2.that);
    let knorm = |k: &[i64]| -> f64 { (k.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt() };
    let k_ratio = knorm(&rec1.k) / knorm(&rec2.k);
    let ratio_violated = (rho.abs() - k_ratio).abs() > 1e-6 * (1.0 + k_ratio);
    let monotone_violated = rec1.k == rec2.k
        && (rec1.that - rec2.that).abs() <= 1e-12 * (1.0 + rec1.that.abs())
        && rec1.pclass == rec2.pclass
        && !rec1.class_boundary
        && !rec2.class_boundary
        && (g1 - g2).abs() > 1e-9;
    Ok(GRatioCertificate {
        rho,
        k_ratio,
        ratio_violated,
        monotone_violated,
        certified_distinct: ratio_violated || monotone_violated,
    })
}

/// Classification summary over matched record/solution pairs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassifySummary {
    pub p1_count: usize,
    pub p2_count: usize,
    /// Indices of one representative per geometric class.
    pub representatives: Vec<usize>,
    pub distinct_count: usize,
    pub ambiguous_pairs: usize,
    pub bound_target: usize,
    pub bound_met: bool,
    /// Pairs where a certificate contradicts the Hausdorff verdict.
    pub certificate_inconsistencies: usize,
}

pub fn classify_report(
    profile: &AuxProfile,
    records: &[OrbitRecord],
    solutions: &[RotationSolution],
    lattice: &[f64],
    rhigh: f64,
    n: usize,
) -> Result<ClassifySummary> {
    if records.len() != solutions.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} records vs {} solutions",
            records.len(),
            solutions.len()
        )));
    }
    let p1_count = records.iter().filter(|r| r.pclass == PClass::P1).count();
    let p2_count = records.len() - p1_count;
    let tol = 1e-4 * (1.0 + rhigh);
    let mut representatives: Vec<usize> = Vec::new();
    let mut ambiguous_pairs = 0usize;
    let mut inconsistencies = 0usize;
    for i in 0..solutions.len() {
        let mut duplicate = false;
        for &r in &representatives {
            let (verdict, _) = geometrically_distinct(&solutions[i], &solutions[r], lattice, tol);
            match verdict {
                Verdict::Same => {
                    duplicate = true;
                }
                Verdict::Ambiguous => {
                    ambiguous_pairs += 1;
                    duplicate = true;
                }
                Verdict::Distinct => {}
            }
            if duplicate {
                // A certificate claiming distinctness would contradict the
                // Hausdorff verdict.
                let cert = g_ratio_certificate(profile, &records[i], &records[r])?;
                if cert.certified_distinct && verdict == Verdict::Same {
                    inconsistencies += 1;
                }
                break;
            }
        }
        if !duplicate {
            representatives.push(i);
        }
    }
    let distinct_count = representatives.len();
    Ok(ClassifySummary {
        p1_count,
        p2_count,
        representatives,
        distinct_count,
        ambiguous_pairs,
        bound_target: n + 1,
        bound_met: distinct_count >= n + 1,
        certificate_inconsistencies: inconsistencies,
    })
}

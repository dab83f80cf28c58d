//! Independent cross-validation: direct Hamiltonian integration, shooting for
//! rotation orbits in surface charts, and the pendulum period quadrature.
//!
//! Nothing here touches the extended Hamiltonian or the variational reduction;
//! orbits produced by this module validate the main pipeline from the outside.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauge::GaugeField;
use crate::hamiltonians::{HamiltonianSystem, PhasePoint};
use crate::ode;
use crate::orbits::{ode_residual, RotationSolution};

/// A directly integrated trajectory with an energy-drift monitor.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States at `t_j = j t_end / (len - 1)`.
    pub samples: Vec<PhasePoint>,
    /// Sup-norm deviation of `H` from its initial value.
    pub energy_drift: f64,
    /// Set when the drift exceeds 100x the integration tolerance.
    pub drift_flagged: bool,
}

fn flat(x: &PhasePoint) -> Vec<f64> {
    let mut y = x.p.clone();
    y.extend_from_slice(&x.q);
    y
}

fn unflat(sys: &HamiltonianSystem, y: &[f64]) -> PhasePoint {
    let pd = sys.pdim();
    PhasePoint::new(y[..pd].to_vec(), y[pd..].to_vec())
}

fn rhs(sys: &HamiltonianSystem, y: &[f64]) -> Vec<f64> {
    let pd = sys.pdim();
    let (hp, hq) = sys.grad(&y[..pd], &y[pd..]);
    let mut out: Vec<f64> = hq.iter().map(|v| -v).collect();
    out.extend(hp);
    out
}

/// Integrates `zdot = J H'(z)` over `[0, t_end]` with `n_out + 1` samples.
pub fn integrate_hamiltonian(
    sys: &HamiltonianSystem,
    x0: &PhasePoint,
    t_end: f64,
    tol: f64,
    n_out: usize,
) -> Result<Trajectory> {
    let f = |_t: f64, y: &[f64]| rhs(sys, y);
    let path = ode::integrate_sampled(&f, 0.0, t_end, &flat(x0), tol, n_out)?;
    let samples: Vec<PhasePoint> = path.iter().map(|y| unflat(sys, y)).collect();
    let h0 = sys.eval(&x0.p, &x0.q);
    let mut drift = 0.0f64;
    for x in &samples {
        drift = drift.max((sys.eval(&x.p, &x.q) - h0).abs());
    }
    Ok(Trajectory {
        samples,
        energy_drift: drift,
        drift_flagged: drift > 100.0 * tol,
    })
}

/// Period of the rotation orbit of the pendulum `H = p^2/2 - cos q` at energy
/// `m > 1`: `T = int_0^{2pi} dq / sqrt(2 (m + cos q))`.
pub fn pendulum_period_quadrature(m: f64) -> Result<f64> {
    if m <= 1.0 {
        return Err(Error::LevelOutOfRange { b: m, max: 1.0 });
    }
    let f = |q: f64| 1.0 / (2.0 * (m + q.cos())).sqrt();
    adaptive_simpson(&f, 0.0, std::f64::consts::TAU, 1e-12)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        if depth > 48 {
            return Err(Error::StepCollapse(a));
        }
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        Ok(recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth + 1)?
            + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth + 1)?)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 0)
}

/// Initial guess for the shooting solver, in `F_2` chart coordinates.
#[derive(Debug, Clone)]
pub struct ShootingSeed {
    /// Momentum direction (will be normalized).
    pub dir: Vec<f64>,
    pub q0: Vec<f64>,
    pub t_guess: f64,
}

/// Seeds aligned with the winding direction, with half-lattice offsets on the
/// starting angles.
pub fn default_seeds(
    sys: &HamiltonianSystem,
    gauge: &GaugeField,
    k: &[i64],
) -> Result<Vec<ShootingSeed>> {
    let kvec: Vec<f64> = sys
        .lattice
        .iter()
        .zip(k.iter())
        .map(|(l, &ki)| l * ki as f64)
        .collect();
    let knorm: f64 = kvec.iter().map(|v| v * v).sum::<f64>().sqrt();
    if knorm == 0.0 {
        return Err(Error::InvalidConfig(
            "rotation vector k must be nonzero".into(),
        ));
    }
    let dir: Vec<f64> = kvec.iter().map(|v| v / knorm).collect();
    let qd = sys.qdim();
    let mut seeds = Vec::new();
    for mask in 0..(1usize << qd).min(16) {
        let q0: Vec<f64> = (0..qd)
            .map(|j| {
                if mask >> j & 1 == 1 {
                    0.5 * sys.lattice[j]
                } else {
                    0.0
                }
            })
            .collect();
        let speed = match gauge.sigma(&dir, &q0) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let t_guess = knorm / speed
            * kvec
                .iter()
                .zip(dir.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .signum();
        seeds.push(ShootingSeed {
            dir: dir.clone(),
            q0,
            t_guess,
        });
    }
    Ok(seeds)
}

/// Finds a rotation orbit `z(T) = z(0) + (0, L (.) k)` on `H = M` by Newton
/// shooting on the chart unknowns `(dir, q0)` and the period `T`.
///
/// The system is squared by appending the normalization `|dir| = 1`; a coarse
/// scan over the period bracket precedes the Newton iteration.
pub fn shoot_rotation_orbit(
    sys: &HamiltonianSystem,
    gauge: &GaugeField,
    k: &[i64],
    seed: &ShootingSeed,
) -> Result<RotationSolution> {
    let pd = sys.pdim();
    let qd = sys.qdim();
    let kvec: Vec<f64> = sys
        .lattice
        .iter()
        .zip(k.iter())
        .map(|(l, &ki)| l * ki as f64)
        .collect();
    let dim = pd + qd + 1;

    let residual = |u: &[f64]| -> Result<Vec<f64>> {
        let dir = &u[..pd];
        let q0 = &u[pd..pd + qd];
        let t = u[pd + qd];
        let dnorm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dnorm < 1e-8 {
            return Err(Error::ZeroMomentum("shooting direction collapsed".into()));
        }
        let unit: Vec<f64> = dir.iter().map(|v| v / dnorm).collect();
        let z0 = gauge.chart_f2(&unit, q0)?;
        let f = |_t: f64, y: &[f64]| rhs(sys, y);
        let zt = ode::integrate(&f, 0.0, t, &flat(&z0), 1e-12)?;
        let mut r = Vec::with_capacity(dim);
        for j in 0..pd {
            r.push(zt[j] - z0.p[j]);
        }
        for j in 0..qd {
            r.push(zt[pd + j] - z0.q[j] - kvec[j]);
        }
        r.push(dnorm - 1.0);
        Ok(r)
    };

    // Coarse period scan around the seed guess.
    let mut u: Vec<f64> = seed.dir.clone();
    u.extend_from_slice(&seed.q0);
    u.push(seed.t_guess);
    let mut best = (f64::INFINITY, seed.t_guess);
    for i in 0..48 {
        let t = seed.t_guess * (0.3 + 2.7 * i as f64 / 47.0);
        u[pd + qd] = t;
        if let Ok(r) = residual(&u) {
            let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if norm < best.0 {
                best = (norm, t);
            }
        }
    }
    u[pd + qd] = best.1;

    let tol = 1e-10 * (1.0 + kvec.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut r = residual(&u)?;
    let mut rnorm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for _ in 0..50 {
        if rnorm <= tol {
            break;
        }
        // Forward-difference Jacobian.
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = 1e-7 * (1.0 + u[j].abs());
            let mut up = u.clone();
            up[j] += h;
            let rp = residual(&up)?;
            for i in 0..dim {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&DVector::from_column_slice(&r), 1e-12)
            .map_err(|e| Error::ShootingFailure(e.to_string()))?;
        let mut lambda = 1.0f64;
        let mut advanced = false;
        for _ in 0..10 {
            let cand: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a - lambda * s)
                .collect();
            if let Ok(rc) = residual(&cand) {
                let nc = rc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if nc < rnorm {
                    u = cand;
                    r = rc;
                    rnorm = nc;
                    advanced = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !advanced {
            return Err(Error::ShootingFailure(format!(
                "line search stalled at residual {rnorm:.3e}"
            )));
        }
    }
    if rnorm > tol {
        return Err(Error::ShootingFailure(format!(
            "no convergence: residual {rnorm:.3e}"
        )));
    }

    let dir = &u[..pd];
    let dnorm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = dir.iter().map(|v| v / dnorm).collect();
    let z0 = gauge.chart_f2(&unit, &u[pd..pd + qd])?;
    let t_period = u[pd + qd];
    let n_s = 1024usize;
    let traj = integrate_hamiltonian(sys, &z0, t_period, 1e-12, n_s)?;
    let samples = traj.samples;
    let m = gauge.ctx.m;
    let mut residual_energy = 0.0f64;
    for x in &samples {
        residual_energy = residual_energy.max((sys.eval(&x.p, &x.q) - m).abs());
    }
    let last = samples.last().unwrap();
    let mut residual_boundary = 0.0f64;
    for j in 0..pd {
        residual_boundary = residual_boundary.max((last.p[j] - samples[0].p[j]).abs());
    }
    for j in 0..qd {
        residual_boundary = residual_boundary.max((last.q[j] - samples[0].q[j] - kvec[j]).abs());
    }
    let residual_ode = ode_residual(sys, &samples, t_period, &kvec);
    Ok(RotationSolution {
        samples,
        t_period,
        k: k.to_vec(),
        kvec,
        residual_ode,
        residual_energy,
        residual_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeField;
    use crate::hamiltonians::{build_system, energy_context};
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadrature_limits() {
        // Large energy: T -> 2 pi / sqrt(2 M).
        let t = pendulum_period_quadrature(100.0).unwrap();
        assert!((t - std::f64::consts::TAU / 200.0f64.sqrt()).abs() / t < 0.01);
        assert!(
            pendulum_period_quadrature(3.5).unwrap() > pendulum_period_quadrature(10.0).unwrap()
        );
        assert!(pendulum_period_quadrature(0.5).is_err());
    }

    #[test]
    fn energy_is_conserved() {
        let sys = build_system("pendulum").unwrap();
        let x0 = PhasePoint::new(vec![2.0], vec![0.3]);
        let traj = integrate_hamiltonian(&sys, &x0, 10.0, 1e-11, 64).unwrap();
        assert!(traj.energy_drift < 1e-9);
        assert!(!traj.drift_flagged);
    }

    #[test]
    fn pendulum_shot_matches_quadrature() {
        let sys = build_system("pendulum").unwrap();
        let ctx = energy_context(&sys, 3.5).unwrap();
        let gauge = GaugeField::new(sys.clone(), ctx);
        let seeds = default_seeds(&sys, &gauge, &[1]).unwrap();
        let sol = shoot_rotation_orbit(&sys, &gauge, &[1], &seeds[0]).unwrap();
        let t_ref = pendulum_period_quadrature(3.5).unwrap();
        assert_abs_diff_eq!(sol.t_period, t_ref, epsilon = 1e-9);
        assert!(sol.residual_energy < 1e-8);
        assert!(sol.residual_boundary < 1e-8);
        assert!(sol.residual_ode < 1e-7, "ode residual {}", sol.residual_ode);
        // The trace must satisfy p = sqrt(2 (M + cos q)).
        for x in &sol.samples {
            let p_ref = (2.0 * (3.5 + x.q[0].cos())).sqrt();
            assert_abs_diff_eq!(x.p[0], p_ref, epsilon = 1e-8);
        }
    }

    #[test]
    fn reflected_pendulum_orbit() {
        let sys = build_system("pendulum").unwrap();
        let ctx = energy_context(&sys, 3.5).unwrap();
        let gauge = GaugeField::new(sys.clone(), ctx);
        let seeds = default_seeds(&sys, &gauge, &[-1]).unwrap();
        let sol = shoot_rotation_orbit(&sys, &gauge, &[-1], &seeds[0]).unwrap();
        assert!(sol.t_period < 0.0 || sol.samples[0].p[0] < 0.0);
        assert!(sol.residual_boundary < 1e-8);
    }

    #[test]
    fn coupled_invariant_plane_orbit() {
        let sys = build_system("coupled_pendulum").unwrap();
        let ctx = energy_context(&sys, 4.5).unwrap();
        let gauge = GaugeField::new(sys.clone(), ctx);
        let seeds = default_seeds(&sys, &gauge, &[1, 0]).unwrap();
        let mut found = 0;
        for seed in &seeds {
            if let Ok(sol) = shoot_rotation_orbit(&sys, &gauge, &[1, 0], seed) {
                assert!(sol.residual_boundary < 1e-8);
                assert!(sol.residual_energy < 1e-8);
                found += 1;
            }
        }
        assert!(found >= 2, "found only {found} coupled orbits");
    }
}

//! Auxiliary profiles `f`, `g`, the quadratic modification `Hbar = M alpha^2`,
//! and the periodically extended Hamiltonian `Hhat` with momentum lattice
//! period `N0 = 2(r_delta + 1)`.
//!
//! `Hhat(p, q) = f(ln alpha(wrap(p), q))` is built from the closed form, so
//! lattice periodicity is bit-exact and no shell interpolation is needed.

use nalgebra::DMatrix;

use crate::dilation::DilationSpec;
use crate::error::{Error, Result};
use crate::gauge::GaugeField;
use crate::hamiltonians::PhasePoint;
use crate::opt::{grid_starts, unit_from_angles};

/// The C^2 plateau profile `f` and the derived weight `g(s) = f'(s) e^{-s}`.
///
/// With `c = delta/3`: `f = 0` below `-c`, rises through the two quartic
/// branches, and saturates at `c` above `+c`; `f(0) = delta/6`, `f'(0) = 1`.
#[derive(Debug, Clone, Copy)]
pub struct AuxProfile {
    pub delta: f64,
}

impl AuxProfile {
    /// Knot location `c = delta/3`.
    pub fn c(&self) -> f64 {
        self.delta / 3.0
    }

    pub fn f(&self, s: f64) -> f64 {
        let c = self.c();
        if s <= -c {
            0.0
        } else if s <= 0.0 {
            let u = s + c;
            u.powi(3) / (c * c) - 0.5 * u.powi(4) / (c * c * c)
        } else if s < c {
            let v = s - c;
            c + v.powi(3) / (c * c) + 0.5 * v.powi(4) / (c * c * c)
        } else {
            c
        }
    }

    pub fn fp(&self, s: f64) -> f64 {
        let c = self.c();
        if s <= -c || s >= c {
            0.0
        } else if s <= 0.0 {
            let u = s + c;
            3.0 * u * u / (c * c) - 2.0 * u.powi(3) / (c * c * c)
        } else {
            let v = s - c;
            3.0 * v * v / (c * c) + 2.0 * v.powi(3) / (c * c * c)
        }
    }

    pub fn fpp(&self, s: f64) -> f64 {
        let c = self.c();
        if s <= -c || s >= c {
            0.0
        } else if s <= 0.0 {
            let u = s + c;
            6.0 * u / (c * c) - 6.0 * u * u / (c * c * c)
        } else {
            let v = s - c;
            6.0 * v / (c * c) + 6.0 * v * v / (c * c * c)
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        self.fp(s) * (-s).exp()
    }

    pub fn gp(&self, s: f64) -> f64 {
        (self.fpp(s) - self.fp(s)) * (-s).exp()
    }

    /// Offset of the `g`-peak from the left knot: the peak sits at
    /// `-delta/3 + delta_plus`.
    pub fn delta_plus(&self) -> f64 {
        let b = 3.0 + 0.5 * self.delta;
        0.5 * (b - (b * b - 4.0 * self.delta).sqrt())
    }
}

pub fn aux_profile(delta: f64) -> Result<AuxProfile> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "profile half-width delta = {delta} outside (0, 1]"
        )));
    }
    Ok(AuxProfile { delta })
}

/// The quadratic modification `Hbar(x) = M alpha(x)^2`.
///
/// Degree-2 homogeneous in `p`, equal to `M` on the surface, and satisfying
/// the Euler identity `p . Hbar_p = 2 Hbar`.
#[derive(Debug, Clone)]
pub struct HbarField {
    pub gauge: GaugeField,
}

impl HbarField {
    pub fn eval(&self, x: &PhasePoint) -> Result<f64> {
        let a = self.gauge.alpha(x)?;
        Ok(self.gauge.ctx.m * a * a)
    }

    pub fn grad(&self, x: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.gauge.alpha(x)?;
        let (ap, aq) = self.gauge.alpha_gradient(x)?;
        let m = self.gauge.ctx.m;
        Ok((
            ap.iter().map(|v| 2.0 * m * a * v).collect(),
            aq.iter().map(|v| 2.0 * m * a * v).collect(),
        ))
    }
}

pub fn build_hbar(gauge: GaugeField) -> HbarField {
    HbarField { gauge }
}

/// Empirical realizations of the paper's constants `a1..a4` for `Hbar`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticBounds {
    /// `min Hbar / |p|^2`.
    pub a1: f64,
    /// `max Hbar / |p|^2`.
    pub a2: f64,
    /// `max |Hbar'| / |p|`.
    pub a3: f64,
    /// `max` sampled Hessian norm.
    pub a4: f64,
}

pub fn quadratic_bounds(hbar: &HbarField, samples: &[PhasePoint]) -> Result<QuadraticBounds> {
    let mut a1 = f64::INFINITY;
    let mut a2 = f64::NEG_INFINITY;
    let mut a3 = f64::NEG_INFINITY;
    let mut a4 = f64::NEG_INFINITY;
    for x in samples {
        let p2: f64 = x.p.iter().map(|v| v * v).sum();
        if p2 == 0.0 {
            continue;
        }
        let h = hbar.eval(x)?;
        a1 = a1.min(h / p2);
        a2 = a2.max(h / p2);
        let (gp, gq) = hbar.grad(x)?;
        let gn: f64 = gp
            .iter()
            .chain(gq.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        a3 = a3.max(gn / p2.sqrt());
        // Hessian norm by central differences of the gradient.
        let dim = x.p.len() + x.q.len();
        let step = 1e-5 * (1.0 + p2.sqrt());
        let mut hess = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            if j < x.p.len() {
                xp.p[j] += step;
                xm.p[j] -= step;
            } else {
                xp.q[j - x.p.len()] += step;
                xm.q[j - x.p.len()] -= step;
            }
            let (gpp, gqp) = hbar.grad(&xp)?;
            let (gpm, gqm) = hbar.grad(&xm)?;
            for (i, (vp, vm)) in gpp
                .iter()
                .chain(gqp.iter())
                .zip(gpm.iter().chain(gqm.iter()))
                .enumerate()
            {
                hess[(i, j)] = (vp - vm) / (2.0 * step);
            }
        }
        a4 = a4.max(matrix_norm(&hess));
    }
    Ok(QuadraticBounds { a1, a2, a3, a4 })
}

fn matrix_norm(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()))
}

/// The periodically extended Hamiltonian `Hhat`.
#[derive(Debug, Clone)]
pub struct ExtendedHamiltonian {
    pub gauge: GaugeField,
    pub profile: AuxProfile,
    /// Smallest integer above `rhigh e^delta`.
    pub r_delta: i64,
    /// Momentum lattice period `N0 = 2 (r_delta + 1)`.
    pub n0: f64,
    /// Sampled bound on `|Hhat'|` (inflated 1.25x).
    pub m1: f64,
    /// Sampled bound on `|Hhat''|` (inflated 1.25x).
    pub m2: f64,
}

/// One `Hhat` evaluation; `sigma` feeds the next warm start on a trajectory.
#[derive(Debug, Clone)]
pub struct HhatEval {
    pub value: f64,
    pub grad_p: Vec<f64>,
    pub grad_q: Vec<f64>,
    /// Shell coordinate of the wrapped point; `-inf` on the inner plateau.
    pub s: f64,
    pub sigma: Option<f64>,
}

impl ExtendedHamiltonian {
    /// Wrap `p` into the fundamental momentum cell `[-N0/2, N0/2]`.
    pub fn wrap_p(&self, p: &[f64]) -> Vec<f64> {
        if !self.n0.is_finite() {
            return p.to_vec();
        }
        p.iter()
            .map(|&v| v - self.n0 * (v / self.n0).round_ties_even())
            .collect()
    }

    pub fn eval(&self, x: &PhasePoint) -> Result<f64> {
        Ok(self.value_grad(&x.p, &x.q, None)?.value)
    }

    /// Value and gradient of `Hhat` with an optional radial-section warm
    /// start for the internal gauge root-find.
    pub fn value_grad(&self, p: &[f64], q: &[f64], sigma_guess: Option<f64>) -> Result<HhatEval> {
        let c = self.profile.c();
        let pw = self.wrap_p(p);
        let norm: f64 = pw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pd = p.len();
        let qd = q.len();
        // Plateau fast paths: alpha = |p|/sigma with sigma in [rlow, rhigh].
        if norm <= self.gauge.ctx.rlow * (-c).exp() {
            return Ok(HhatEval {
                value: 0.0,
                grad_p: vec![0.0; pd],
                grad_q: vec![0.0; qd],
                s: f64::NEG_INFINITY,
                sigma: None,
            });
        }
        if norm >= self.gauge.ctx.rhigh * c.exp() {
            return Ok(HhatEval {
                value: c,
                grad_p: vec![0.0; pd],
                grad_q: vec![0.0; qd],
                s: f64::INFINITY,
                sigma: None,
            });
        }
        let xw = PhasePoint::new(pw, q.to_vec());
        let (a, sigma) = self.gauge.alpha_with_guess(&xw, sigma_guess)?;
        let s = a.ln();
        if s <= -c || s >= c {
            return Ok(HhatEval {
                value: self.profile.f(s),
                grad_p: vec![0.0; pd],
                grad_q: vec![0.0; qd],
                s,
                sigma: Some(sigma),
            });
        }
        let fp = self.profile.fp(s);
        let (ap, aq) = self.gauge.alpha_gradient(&xw)?;
        Ok(HhatEval {
            value: self.profile.f(s),
            grad_p: ap.iter().map(|v| fp * v / a).collect(),
            grad_q: aq.iter().map(|v| fp * v / a).collect(),
            s,
            sigma: Some(sigma),
        })
    }
}

/// Builds `Hhat` for the standard dilation, validating cell safety.
///
/// If the shell neighborhood leaks through a momentum-cell face, `delta` is
/// halved and the construction retried (at most 6 times).
pub fn build_extended(
    gauge: &GaugeField,
    profile: &AuxProfile,
    dilation: &DilationSpec,
) -> Result<ExtendedHamiltonian> {
    if (profile.delta - dilation.delta).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "profile half-width {} does not match dilation half-width {}",
            profile.delta, dilation.delta
        )));
    }
    let mut prof = *profile;
    for halvings in 0..=6usize {
        let rhigh = gauge.ctx.rhigh;
        let r_delta = (rhigh * prof.delta.exp()).floor() as i64 + 1;
        let n0 = 2.0 * (r_delta + 1) as f64;
        if cell_safe(gauge, &prof, r_delta)? {
            let (m1, m2) = sample_bounds(gauge, &prof)?;
            return Ok(ExtendedHamiltonian {
                gauge: gauge.clone(),
                profile: prof,
                r_delta,
                n0,
                m1,
                m2,
            });
        }
        if halvings == 6 {
            break;
        }
        prof = AuxProfile {
            delta: 0.5 * prof.delta,
        };
    }
    Err(Error::CellSafety(6))
}

/// Checks `alpha > e^{delta/3}` on the boundary faces of the momentum cell.
fn cell_safe(gauge: &GaugeField, prof: &AuxProfile, r_delta: i64) -> Result<bool> {
    let pd = gauge.sys.pdim();
    let qd = gauge.sys.qdim();
    let face = (r_delta + 1) as f64;
    let threshold = (prof.delta / 3.0).exp();
    let q_grid = grid_starts(&vec![0.0; qd], &gauge.sys.lattice, 7);
    // The lowest alpha on a face occurs at its smallest |p|; with sigma
    // bounded by rhigh we can certify most faces without root-finds.
    if face > gauge.ctx.rhigh * threshold {
        return Ok(true);
    }
    let side_grid = if pd == 1 {
        vec![vec![]]
    } else {
        grid_starts(&vec![-face; pd - 1], &vec![face; pd - 1], 5)
    };
    for i in 0..pd {
        for sign in [-1.0, 1.0] {
            for side in &side_grid {
                let mut p = Vec::with_capacity(pd);
                let mut si = side.iter();
                for j in 0..pd {
                    p.push(if j == i {
                        sign * face
                    } else {
                        *si.next().unwrap()
                    });
                }
                for q in &q_grid {
                    let a = gauge.alpha(&PhasePoint::new(p.clone(), q.clone()))?;
                    if a <= threshold {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Samples `|Hhat'|` and an FD Hessian norm over the shell annulus.
fn sample_bounds(gauge: &GaugeField, prof: &AuxProfile) -> Result<(f64, f64)> {
    let pd = gauge.sys.pdim();
    let qd = gauge.sys.qdim();
    let c = prof.c();
    let dirs: Vec<Vec<f64>> = if pd == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        let per = if pd == 2 { 12 } else { 6 };
        grid_starts(
            &vec![0.0; pd - 1],
            &vec![std::f64::consts::TAU; pd - 1],
            per,
        )
        .into_iter()
        .map(|a| unit_from_angles(&a, pd))
        .collect()
    };
    let nq = if qd <= 1 { 25 } else { 9 };
    let q_grid = grid_starts(&vec![0.0; qd], &gauge.sys.lattice, nq);
    let ns = 13;
    let mut m1 = 0.0f64;
    let mut m2 = 0.0f64;
    // A throwaway extension handle for evaluation; bounds fields are interim.
    let hh = ExtendedHamiltonian {
        gauge: gauge.clone(),
        profile: *prof,
        r_delta: i64::MAX / 4,
        n0: f64::INFINITY,
        m1: 0.0,
        m2: 0.0,
    };
    for dir in &dirs {
        for q in &q_grid {
            let sigma = gauge.sigma(dir, q)?;
            for is in 0..ns {
                let s = -c + 2.0 * c * (is as f64 + 0.5) / ns as f64;
                let scale = sigma * s.exp();
                let p: Vec<f64> = dir.iter().map(|d| d * scale).collect();
                let ev = hh.value_grad(&p, q, Some(sigma))?;
                let gn: f64 = ev
                    .grad_p
                    .iter()
                    .chain(ev.grad_q.iter())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                m1 = m1.max(gn);
                m2 = m2.max(hessian_norm(&hh, &p, q, ev.sigma)?);
            }
        }
    }
    Ok((1.25 * m1, 1.25 * m2))
}

fn hessian_norm(hh: &ExtendedHamiltonian, p: &[f64], q: &[f64], sigma: Option<f64>) -> Result<f64> {
    let pd = p.len();
    let qd = q.len();
    let dim = pd + qd;
    let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let step = 1e-5 * (1.0 + norm);
    let mut hess = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        if j < pd {
            pp[j] += step;
            pm[j] -= step;
        } else {
            qp[j - pd] += step;
            qm[j - pd] -= step;
        }
        let ep = hh.value_grad(&pp, &qp, sigma)?;
        let em = hh.value_grad(&pm, &qm, sigma)?;
        for i in 0..dim {
            let gp = if i < pd {
                ep.grad_p[i]
            } else {
                ep.grad_q[i - pd]
            };
            let gm = if i < pd {
                em.grad_p[i]
            } else {
                em.grad_q[i - pd]
            };
            hess[(i, j)] = (gp - gm) / (2.0 * step);
        }
    }
    Ok(matrix_norm(&hess))
}

/// Inverts `f` on `[-delta/3, delta/3]`: the shell carrying level `b`.
pub fn level_shell(profile: &AuxProfile, b: f64) -> Result<f64> {
    let c = profile.c();
    if !(-1e-15..=c + 1e-15).contains(&b) {
        return Err(Error::LevelOutOfRange { b, max: c });
    }
    if b <= 0.0 {
        return Ok(-c);
    }
    if b >= c {
        return Ok(c);
    }
    let (mut lo, mut hi) = (-c, c);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if profile.f(mid) < b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..50 {
        let r = profile.f(s) - b;
        if r.abs() <= 1e-12 {
            return Ok(s);
        }
        let d = profile.fp(s);
        if d.abs() < 1e-15 {
            break;
        }
        s = (s - r / d).clamp(-c, c);
    }
    let r = profile.f(s) - b;
    if r.abs() <= 1e-12 {
        Ok(s)
    } else {
        Err(Error::RootDivergence(format!(
            "level inversion stalled at residual {r:.3e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::standard_dilation;
    use crate::gauge::GaugeField;
    use crate::hamiltonians::{build_system, energy_context};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pendulum_gauge() -> GaugeField {
        let sys = build_system("pendulum").unwrap();
        let ctx = energy_context(&sys, 3.5).unwrap();
        GaugeField::new(sys, ctx)
    }

    fn pendulum_hhat() -> ExtendedHamiltonian {
        let gauge = pendulum_gauge();
        let profile = aux_profile(0.3).unwrap();
        build_extended(&gauge, &profile, &standard_dilation().with_delta(0.3)).unwrap()
    }

    #[test]
    fn profile_closed_form_values() {
        let f = aux_profile(0.3).unwrap();
        assert_abs_diff_eq!(f.f(0.0), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(f.fp(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.g(0.0), 1.0, epsilon = 1e-15);
        assert_eq!(f.f(-0.1), 0.0);
        assert_abs_diff_eq!(f.f(0.1), 0.1, epsilon = 1e-15);
        assert_eq!(f.g(-0.1), 0.0);
        assert_eq!(f.g(0.1), 0.0);
    }

    #[test]
    fn profile_c2_at_knots() {
        let f = aux_profile(0.3).unwrap();
        // One-sided limits at the knots; steps small enough that the cubic
        // branch variation (third derivative ~ 6/c^2) stays below 1e-12.
        let h = 1e-16;
        for knot in [-0.1, 0.0, 0.1] {
            for eval in [
                AuxProfile::f as fn(&AuxProfile, f64) -> f64,
                AuxProfile::fp,
                AuxProfile::fpp,
            ] {
                let left = eval(&f, knot - h);
                let right = eval(&f, knot + h);
                assert!(
                    (left - right).abs() <= 1e-12,
                    "jump at {knot}: {left} vs {right}"
                );
            }
        }
        // Exact branch values at the knots.
        assert_eq!(f.f(-0.1), 0.0);
        assert_abs_diff_eq!(f.f(0.1), 0.1, epsilon = 1e-16);
        assert_eq!(f.fp(-0.1), 0.0);
        assert_eq!(f.fp(0.1), 0.0);
        assert_abs_diff_eq!(f.fpp(-0.1 + 1e-13), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.fpp(0.1 - 1e-13), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn delta_plus_is_the_g_peak() {
        let f = aux_profile(0.3).unwrap();
        let dp = f.delta_plus();
        assert!(dp > 0.0 && dp < 0.1);
        assert_abs_diff_eq!(dp, 0.0983060574377641, epsilon = 1e-12);
        let peak = -0.1 + dp;
        assert_abs_diff_eq!(f.gp(peak), 0.0, epsilon = 1e-12);
        // Strict monotonicity on each side.
        let mut prev = f.g(-0.1);
        for i in 1..=200 {
            let s = -0.1 + (peak + 0.1) * i as f64 / 200.0;
            assert!(f.g(s) > prev);
            prev = f.g(s);
        }
        let mut prev = f.g(peak);
        for i in 1..=200 {
            let s = peak + (0.1 - peak) * i as f64 / 200.0;
            assert!(f.g(s) < prev);
            prev = f.g(s);
        }
    }

    #[test]
    fn hbar_euler_identity_and_values() {
        let hbar = build_hbar(pendulum_gauge());
        assert_abs_diff_eq!(
            hbar.eval(&PhasePoint::new(vec![6.0], vec![0.0])).unwrap(),
            14.0,
            epsilon = 1e-9
        );
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let p = rng.gen_range(0.3..12.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let q = rng.gen_range(-7.0..7.0);
            let x = PhasePoint::new(vec![p], vec![q]);
            let h = hbar.eval(&x).unwrap();
            let (gp, _) = hbar.grad(&x).unwrap();
            assert!((p * gp[0] - 2.0 * h).abs() <= 1e-9 * (1.0 + h.abs()));
        }
    }

    #[test]
    fn quadratic_bounds_pendulum() {
        let hbar = build_hbar(pendulum_gauge());
        let mut samples = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..400 {
            samples.push(PhasePoint::new(
                vec![rng.gen_range(0.1..21.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }],
                vec![rng.gen_range(0.0..std::f64::consts::TAU)],
            ));
        }
        let b = quadratic_bounds(&hbar, &samples).unwrap();
        assert_abs_diff_eq!(b.a1, 3.5 / 9.0, epsilon = 1e-3);
        assert_abs_diff_eq!(b.a2, 0.7, epsilon = 1e-3);
        assert!(b.a3 > 0.0 && b.a4 > 0.0);
        for x in samples.iter().take(50) {
            let p2: f64 = x.p.iter().map(|v| v * v).sum();
            let h = hbar.eval(x).unwrap();
            assert!(b.a1 - 1e-12 <= h / p2 && h / p2 <= b.a2 + 1e-12);
        }
    }

    #[test]
    fn extended_lattice_constants() {
        let hh = pendulum_hhat();
        assert_eq!(hh.r_delta, 10);
        assert_abs_diff_eq!(hh.n0, 22.0, epsilon = 0.0);
        assert!(hh.m1 > 0.0 && hh.m2 > 0.0);
    }

    #[test]
    fn extended_exact_periodicity_and_zero() {
        let hh = pendulum_hhat();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let p = rng.gen_range(-11.0..11.0);
            let q = rng.gen_range(-7.0..7.0);
            let a = hh.eval(&PhasePoint::new(vec![p], vec![q])).unwrap();
            let b = hh.eval(&PhasePoint::new(vec![p + 22.0], vec![q])).unwrap();
            let c = hh.eval(&PhasePoint::new(vec![p - 44.0], vec![q])).unwrap();
            assert!((a - b).abs() <= 1e-12);
            assert!((a - c).abs() <= 1e-12);
        }
        assert_eq!(
            hh.eval(&PhasePoint::new(vec![0.0], vec![1.3])).unwrap(),
            0.0
        );
    }

    #[test]
    fn extended_surface_value_and_range() {
        let hh = pendulum_hhat();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let q = rng.gen_range(-7.0..7.0);
            let sigma = hh.gauge.sigma(&[1.0], &[q]).unwrap();
            let v = hh.eval(&PhasePoint::new(vec![sigma], vec![q])).unwrap();
            assert_abs_diff_eq!(v, 0.05, epsilon = 1e-11);
            let any = hh
                .eval(&PhasePoint::new(vec![rng.gen_range(-30.0..30.0)], vec![q]))
                .unwrap();
            assert!((0.0..=0.1 + 1e-15).contains(&any));
        }
    }

    #[test]
    fn extended_gradient_matches_finite_differences() {
        let hh = pendulum_hhat();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0;
        while checked < 100 {
            let p = rng.gen_range(1.8..3.3) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let q = rng.gen_range(-7.0..7.0);
            let ev = hh.value_grad(&[p], &[q], None).unwrap();
            if !(ev.s > -0.095 && ev.s < 0.095) {
                continue;
            }
            checked += 1;
            let h = 1e-6;
            let fd_p = (hh.eval(&PhasePoint::new(vec![p + h], vec![q])).unwrap()
                - hh.eval(&PhasePoint::new(vec![p - h], vec![q])).unwrap())
                / (2.0 * h);
            let fd_q = (hh.eval(&PhasePoint::new(vec![p], vec![q + h])).unwrap()
                - hh.eval(&PhasePoint::new(vec![p], vec![q - h])).unwrap())
                / (2.0 * h);
            assert!((fd_p - ev.grad_p[0]).abs() <= 1e-5 * (1.0 + ev.grad_p[0].abs()));
            assert!((fd_q - ev.grad_q[0]).abs() <= 1e-5 * (1.0 + ev.grad_q[0].abs()));
        }
        // Identically zero outside the annulus.
        let ev = hh.value_grad(&[0.5], &[0.3], None).unwrap();
        assert_eq!(ev.grad_p[0], 0.0);
        let ev = hh.value_grad(&[9.9], &[0.3], None).unwrap();
        assert_eq!(ev.grad_p[0], 0.0);
    }

    #[test]
    fn level_shell_inverts_f() {
        let prof = aux_profile(0.3).unwrap();
        assert_abs_diff_eq!(level_shell(&prof, 0.05).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(level_shell(&prof, 0.0).unwrap(), -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(level_shell(&prof, 0.1).unwrap(), 0.1, epsilon = 1e-15);
        for b in [0.02, 0.05, 0.08, 0.0999] {
            let s = level_shell(&prof, b).unwrap();
            assert!((prof.f(s) - b).abs() <= 1e-12);
        }
        assert!(level_shell(&prof, 0.2).is_err());
        assert!(level_shell(&prof, -0.01).is_err());
    }

    #[test]
    fn level_sets_sit_on_shells() {
        let hh = pendulum_hhat();
        let prof = hh.profile;
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for b in [0.02, 0.05, 0.08] {
            let s = level_shell(&prof, b).unwrap();
            for _ in 0..50 {
                let q = rng.gen_range(-7.0..7.0);
                let sigma = hh.gauge.sigma(&[1.0], &[q]).unwrap();
                let p = sigma * s.exp();
                let v = hh.eval(&PhasePoint::new(vec![p], vec![q])).unwrap();
                assert!((v - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn mismatched_widths_rejected() {
        let gauge = pendulum_gauge();
        let profile = aux_profile(0.3).unwrap();
        assert!(build_extended(&gauge, &profile, &standard_dilation().with_delta(0.2)).is_err());
    }
}

//! Symplectic dilations: the field `xi`, its flow `phi^s`, conformality
//! checks, and the transport law moving orbits between shells.
//!
//! The standard dilation `xi = (p, 0)` has the closed-form flow
//! `phi^s(p, q) = (e^s p, q)` and rescales the symplectic form by `e^s`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonians::PhasePoint;
use crate::modification::{AuxProfile, ExtendedHamiltonian};
use crate::ode;

type XiField = Arc<dyn Fn(&PhasePoint) -> PhasePoint + Send + Sync>;
type FlowMap = Arc<dyn Fn(f64, &PhasePoint) -> PhasePoint + Send + Sync>;

/// A dilation field with optional closed-form flow and half-width `delta`.
#[derive(Clone)]
pub struct DilationSpec {
    pub delta: f64,
    xi: XiField,
    closed_form_flow: Option<FlowMap>,
}

impl std::fmt::Debug for DilationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DilationSpec")
            .field("delta", &self.delta)
            .field("closed_form", &self.closed_form_flow.is_some())
            .finish()
    }
}

impl DilationSpec {
    pub fn new(delta: f64, xi: XiField, closed_form_flow: Option<FlowMap>) -> Self {
        Self {
            delta,
            xi,
            closed_form_flow,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn xi(&self, x: &PhasePoint) -> PhasePoint {
        (self.xi)(x)
    }

    /// The flow map `phi^s`, closed form when available, ODE otherwise.
    pub fn flow(&self, s: f64, x: &PhasePoint) -> Result<PhasePoint> {
        if let Some(cf) = &self.closed_form_flow {
            Ok(cf(s, x))
        } else {
            integrate_dilation(self, s, x)
        }
    }
}

/// The standard dilation `xi(p, q) = (p, 0)`, `phi^s(p, q) = (e^s p, q)`,
/// with the default half-width 0.3.
pub fn standard_dilation() -> DilationSpec {
    DilationSpec {
        delta: 0.3,
        xi: Arc::new(|x: &PhasePoint| PhasePoint::new(x.p.clone(), vec![0.0; x.q.len()])),
        closed_form_flow: Some(Arc::new(|s: f64, x: &PhasePoint| {
            PhasePoint::new(x.p.iter().map(|v| v * s.exp()).collect(), x.q.clone())
        })),
    }
}

/// Integrates the flow ODE `d/ds y = xi(y)` from 0 to `s`.
pub fn integrate_dilation(spec: &DilationSpec, s: f64, x: &PhasePoint) -> Result<PhasePoint> {
    if s.abs() >= spec.delta {
        return Err(Error::DilationDomain(format!(
            "|s| = {} reaches the dilation half-width {}",
            s.abs(),
            spec.delta
        )));
    }
    let pd = x.p.len();
    let mut y0 = x.p.clone();
    y0.extend_from_slice(&x.q);
    let f = |_t: f64, y: &[f64]| -> Vec<f64> {
        let xp = PhasePoint::new(y[..pd].to_vec(), y[pd..].to_vec());
        let v = (spec.xi)(&xp);
        let mut out = v.p;
        out.extend_from_slice(&v.q);
        out
    };
    let y = ode::integrate(&f, 0.0, s, &y0, 1e-11)?;
    Ok(PhasePoint::new(y[..pd].to_vec(), y[pd..].to_vec()))
}

fn standard_j(dim: usize) -> DMatrix<f64> {
    // Blocks ordered (p, q): J (a, b) = (-b, a).
    let n = dim / 2;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// Max defect of `(D phi^s)^T J (D phi^s) = e^s J` over the samples.
///
/// Jacobians by central differences with step `1e-6 (1 + |x|)`; the check
/// passes when the result is at most `1e-5`.
pub fn verify_conformal(spec: &DilationSpec, s: f64, samples: &[PhasePoint]) -> Result<f64> {
    if s.abs() >= spec.delta {
        return Err(Error::DilationDomain(format!(
            "conformality check at |s| = {} outside half-width {}",
            s.abs(),
            spec.delta
        )));
    }
    let mut worst = 0.0f64;
    for x in samples {
        let pd = x.p.len();
        let dim = pd + x.q.len();
        let norm: f64 =
            x.p.iter()
                .chain(x.q.iter())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
        let h = 1e-6 * (1.0 + norm);
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            if j < pd {
                xp.p[j] += h;
                xm.p[j] -= h;
            } else {
                xp.q[j - pd] += h;
                xm.q[j - pd] -= h;
            }
            let yp = spec.flow(s, &xp)?;
            let ym = spec.flow(s, &xm)?;
            for i in 0..dim {
                let vp = if i < pd { yp.p[i] } else { yp.q[i - pd] };
                let vm = if i < pd { ym.p[i] } else { ym.q[i - pd] };
                jac[(i, j)] = (vp - vm) / (2.0 * h);
            }
        }
        let jmat = standard_j(dim);
        let defect = jac.transpose() * &jmat * &jac - s.exp() * &jmat;
        worst = worst.max(defect.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    Ok(worst)
}

/// Transports a time-sampled orbit from shell `s1` to shell `s2`.
///
/// Returns the transported samples `x2(t) = phi^{s2-s1}(x1(t))` and the rate
/// factor `e^{s2-s1} f'(s1)/f'(s2)` with which `x2` follows the `Hhat` field.
pub fn transport_orbit(
    spec: &DilationSpec,
    profile: &AuxProfile,
    orbit: &[PhasePoint],
    s1: f64,
    s2: f64,
) -> Result<(Vec<PhasePoint>, f64)> {
    let c = profile.c();
    if s1.abs() >= c || s2.abs() >= c {
        return Err(Error::DilationDomain(format!(
            "shells ({s1}, {s2}) must lie strictly inside (-{c}, {c}) where f' > 0"
        )));
    }
    let ds = s2 - s1;
    let factor = ds.exp() * profile.fp(s1) / profile.fp(s2);
    let mut out = Vec::with_capacity(orbit.len());
    for x in orbit {
        out.push(spec.flow(ds, x)?);
    }
    Ok((out, factor))
}

/// Defect of the transport law: compares `D phi^{s2-s1} X_Hhat(x1)` against
/// `factor * X_Hhat(phi^{s2-s1} x1)` pointwise along the orbit.
pub fn transport_defect(
    spec: &DilationSpec,
    hhat: &ExtendedHamiltonian,
    orbit: &[PhasePoint],
    s1: f64,
    s2: f64,
) -> Result<f64> {
    let (transported, factor) = transport_orbit(spec, &hhat.profile, orbit, s1, s2)?;
    let ds = s2 - s1;
    let mut worst = 0.0f64;
    for (x1, x2) in orbit.iter().zip(transported.iter()) {
        let v1 = hamiltonian_field(hhat, x1)?;
        // Push the velocity forward through the flow by finite differences.
        let pd = x1.p.len();
        let dim = pd + x1.q.len();
        let h = 1e-6;
        let mut push = vec![0.0; dim];
        for j in 0..dim {
            let mut xp = x1.clone();
            let mut xm = x1.clone();
            if j < pd {
                xp.p[j] += h;
                xm.p[j] -= h;
            } else {
                xp.q[j - pd] += h;
                xm.q[j - pd] -= h;
            }
            let yp = spec.flow(ds, &xp)?;
            let ym = spec.flow(ds, &xm)?;
            for i in 0..dim {
                let vp = if i < pd { yp.p[i] } else { yp.q[i - pd] };
                let vm = if i < pd { ym.p[i] } else { ym.q[i - pd] };
                push[i] += (vp - vm) / (2.0 * h) * v1[j];
            }
        }
        let v2 = hamiltonian_field(hhat, x2)?;
        for i in 0..dim {
            worst = worst.max((push[i] - factor * v2[i]).abs());
        }
    }
    Ok(worst)
}

/// `X_Hhat(x) = J Hhat'(x) = (-Hhat_q, Hhat_p)` as a flat vector.
pub fn hamiltonian_field(hhat: &ExtendedHamiltonian, x: &PhasePoint) -> Result<Vec<f64>> {
    let ev = hhat.value_grad(&x.p, &x.q, None)?;
    let mut out: Vec<f64> = ev.grad_q.iter().map(|v| -v).collect();
    out.extend_from_slice(&ev.grad_p);
    Ok(out)
}

/// Max defect of `X_F = (F' . xi) X_Hhat` over surface samples.
///
/// On `D_0` the normalization `Hhat' . xi = f'(0) = 1` holds, so the identity
/// is checked in the plain form above.
pub fn field_ratio_check<F>(
    grad_f: F,
    hhat: &ExtendedHamiltonian,
    spec: &DilationSpec,
    samples: &[PhasePoint],
) -> Result<f64>
where
    F: Fn(&PhasePoint) -> Result<(Vec<f64>, Vec<f64>)>,
{
    let mut worst = 0.0f64;
    for x in samples {
        let shell = hhat.gauge.shell_coordinate(x)?;
        if shell.abs() > 1e-8 {
            return Err(Error::NotASolution(format!(
                "field-ratio sample off D_0: shell coordinate {shell:.3e}"
            )));
        }
        let (fp, fq) = grad_f(x)?;
        let xi = spec.xi(x);
        let pairing: f64 = fp.iter().zip(xi.p.iter()).map(|(a, b)| a * b).sum::<f64>()
            + fq.iter().zip(xi.q.iter()).map(|(a, b)| a * b).sum::<f64>();
        let xh = hamiltonian_field(hhat, x)?;
        let pd = x.p.len();
        for i in 0..pd + x.q.len() {
            let xf = if i < pd { -fq[i] } else { fp[i - pd] };
            worst = worst.max((xf - pairing * xh[i]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeField;
    use crate::hamiltonians::{build_system, energy_context};
    use crate::modification::{aux_profile, build_extended, build_hbar};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pendulum_setup() -> (GaugeField, ExtendedHamiltonian, DilationSpec) {
        let sys = build_system("pendulum").unwrap();
        let ctx = energy_context(&sys, 3.5).unwrap();
        let gauge = GaugeField::new(sys, ctx);
        let spec = standard_dilation();
        let profile = aux_profile(0.3).unwrap();
        let hhat = build_extended(&gauge, &profile, &spec).unwrap();
        (gauge, hhat, spec)
    }

    fn random_points(count: usize, seed: u64) -> Vec<PhasePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                PhasePoint::new(
                    vec![rng.gen_range(0.5..6.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }],
                    vec![rng.gen_range(-4.0..4.0)],
                )
            })
            .collect()
    }

    #[test]
    fn standard_flow_group_law() {
        let spec = standard_dilation();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = PhasePoint::new(
                vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
            );
            let id = spec.flow(0.0, &x).unwrap();
            assert_eq!(id.p, x.p);
            let (s1, s2) = (rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
            let a = spec.flow(s1, &spec.flow(s2, &x).unwrap()).unwrap();
            let b = spec.flow(s1 + s2, &x).unwrap();
            for i in 0..2 {
                assert_abs_diff_eq!(a.p[i], b.p[i], epsilon = 1e-12);
                assert_abs_diff_eq!(a.q[i], b.q[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flow_shifts_shell_coordinate() {
        let (gauge, _, spec) = pendulum_setup();
        let x = PhasePoint::new(vec![3.0], vec![0.0]);
        let y = spec.flow(0.2, &x).unwrap();
        assert_abs_diff_eq!(y.p[0], 3.0 * 0.2f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(gauge.shell_coordinate(&y).unwrap(), 0.2, epsilon = 1e-10);
    }

    #[test]
    fn ode_flow_matches_closed_form() {
        let spec = standard_dilation();
        let x = PhasePoint::new(vec![3.0], vec![0.0]);
        let y = integrate_dilation(&spec, 0.29, &x).unwrap();
        assert_abs_diff_eq!(y.p[0], 3.0 * 0.29f64.exp(), epsilon = 1e-9);
        let back = integrate_dilation(&spec, -0.29, &y).unwrap();
        assert_abs_diff_eq!(back.p[0], 3.0, epsilon = 1e-9);
        assert!(integrate_dilation(&spec, 0.31, &x).is_err());
    }

    #[test]
    fn conformality_standard_dilation() {
        let spec = standard_dilation();
        let samples = random_points(20, 5);
        for s in [-0.2, 0.1, 0.29] {
            let defect = verify_conformal(&spec, s, &samples).unwrap();
            assert!(defect <= 1e-5, "defect {defect} at s = {s}");
        }
    }

    #[test]
    fn conformality_rejects_wrong_field() {
        // xi = (p, q) flows to (e^s p, e^s q) and scales omega by e^{2s}.
        let wrong = DilationSpec::new(
            0.3,
            Arc::new(|x: &PhasePoint| x.clone()),
            Some(Arc::new(|s: f64, x: &PhasePoint| {
                PhasePoint::new(
                    x.p.iter().map(|v| v * s.exp()).collect(),
                    x.q.iter().map(|v| v * s.exp()).collect(),
                )
            })),
        );
        let samples = random_points(20, 7);
        let defect = verify_conformal(&wrong, 0.2, &samples).unwrap();
        assert!(defect > 1e-2, "wrong field slipped through: {defect}");
    }

    #[test]
    fn transport_identity_and_preconditions() {
        let (_, hhat, spec) = pendulum_setup();
        let orbit = vec![PhasePoint::new(vec![3.0], vec![0.0])];
        let (moved, factor) = transport_orbit(&spec, &hhat.profile, &orbit, 0.05, 0.05).unwrap();
        assert_eq!(moved[0].p, orbit[0].p);
        assert_eq!(factor, 1.0);
        assert!(transport_orbit(&spec, &hhat.profile, &orbit, 0.0, 0.1).is_err());
        assert!(transport_orbit(&spec, &hhat.profile, &orbit, -0.1, 0.0).is_err());
    }

    #[test]
    fn transport_law_residual_small() {
        let (gauge, hhat, spec) = pendulum_setup();
        // Sample an Hhat-flow orbit on D_0 by direct integration.
        let x0 = gauge.chart_f2(&[1.0], &[0.0]).unwrap();
        let f = |_t: f64, y: &[f64]| {
            hamiltonian_field(&hhat, &PhasePoint::new(vec![y[0]], vec![y[1]])).unwrap()
        };
        let path = ode::integrate_sampled(&f, 0.0, 2.0, &[x0.p[0], x0.q[0]], 1e-11, 40).unwrap();
        let orbit: Vec<PhasePoint> = path
            .iter()
            .map(|y| PhasePoint::new(vec![y[0]], vec![y[1]]))
            .collect();
        let defect = transport_defect(&spec, &hhat, &orbit, 0.0, 0.05).unwrap();
        assert!(defect <= 1e-6, "transport defect {defect}");
        let defect = transport_defect(&spec, &hhat, &orbit, 0.0, -0.07).unwrap();
        assert!(defect <= 1e-6, "transport defect {defect}");
    }

    #[test]
    fn field_ratio_for_h_hbar_hhat() {
        let (gauge, hhat, spec) = pendulum_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<PhasePoint> = (0..30)
            .map(|_| {
                let q = rng.gen_range(-4.0..4.0);
                let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                gauge.chart_f2(&[dir], &[q]).unwrap()
            })
            .collect();
        let sys = gauge.sys.clone();
        let defect_h =
            field_ratio_check(|x| Ok(sys.grad(&x.p, &x.q)), &hhat, &spec, &samples).unwrap();
        assert!(defect_h <= 1e-6, "H defect {defect_h}");

        let hbar = build_hbar(gauge.clone());
        let defect_hbar = field_ratio_check(|x| hbar.grad(x), &hhat, &spec, &samples).unwrap();
        assert!(defect_hbar <= 1e-6, "Hbar defect {defect_hbar}");
        // And F' . xi = 2M for Hbar on the surface.
        for x in samples.iter().take(5) {
            let (gp, _) = hbar.grad(x).unwrap();
            let dot: f64 = gp.iter().zip(x.p.iter()).map(|(a, b)| a * b).sum();
            assert_abs_diff_eq!(dot, 7.0, epsilon = 1e-8);
        }

        let defect_hhat = field_ratio_check(
            |x| {
                let ev = hhat.value_grad(&x.p, &x.q, None)?;
                Ok((ev.grad_p, ev.grad_q))
            },
            &hhat,
            &spec,
            &samples,
        )
        .unwrap();
        assert!(defect_hhat <= 1e-9, "Hhat defect {defect_hhat}");
    }
}

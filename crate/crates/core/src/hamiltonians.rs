//! Hamiltonian systems with separable kinetic energy and trigonometric
//! potential, assumption checks, and the derived energy-context constants.
//!
//! A system is `H(p, q) = |p|^2 / 2 + V(q)` with `V` a finite cosine series
//! that is periodic with respect to the configuration lattice `L`. The
//! certificate pair `(mu, r)` asserts the superlinear growth condition
//! `0 < mu H <= p . H_p` for `|p| >= r`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::opt::{grid_starts, multistart_min, unit_from_angles};

/// A point `(p, q)` of phase space, momentum block first.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PhasePoint {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        Self { p, q }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|v| v.is_finite())
    }
}

/// One cosine term `amplitude * cos(sum_j modes_j * (2 pi / L_j) q_j)`.
#[derive(Debug, Clone, Serialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub modes: Vec<i64>,
}

/// A Hamiltonian system satisfying (H0)-(H2) on `R^{2n-l} x T^l`.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    pub name: String,
    /// Half phase dimension.
    pub n: usize,
    /// Torus dimension; the solver pipeline requires `ell == n`.
    pub ell: usize,
    /// Configuration period lattice, positive entries.
    pub lattice: Vec<f64>,
    pub mu: f64,
    pub r: f64,
    terms: Vec<TrigTerm>,
}

impl HamiltonianSystem {
    /// Momentum dimension `2n - ell`.
    pub fn pdim(&self) -> usize {
        2 * self.n - self.ell
    }

    pub fn qdim(&self) -> usize {
        self.ell
    }

    fn phase(&self, term: &TrigTerm, q: &[f64]) -> f64 {
        term.modes
            .iter()
            .zip(q.iter().zip(self.lattice.iter()))
            .map(|(&m, (&qj, &lj))| m as f64 * std::f64::consts::TAU / lj * qj)
            .sum()
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * self.phase(t, q).cos())
            .sum()
    }

    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        0.5 * p.iter().map(|v| v * v).sum::<f64>() + self.potential(q)
    }

    pub fn eval_point(&self, x: &PhasePoint) -> f64 {
        self.eval(&x.p, &x.q)
    }

    /// Gradient `(H_p, H_q)` written into the provided buffers.
    pub fn grad_into(&self, p: &[f64], q: &[f64], hp: &mut [f64], hq: &mut [f64]) {
        hp.copy_from_slice(p);
        for v in hq.iter_mut() {
            *v = 0.0;
        }
        for t in &self.terms {
            let s = self.phase(t, q).sin();
            for (j, &m) in t.modes.iter().enumerate() {
                hq[j] -= t.amplitude * s * m as f64 * std::f64::consts::TAU / self.lattice[j];
            }
        }
    }

    pub fn grad(&self, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut hp = vec![0.0; p.len()];
        let mut hq = vec![0.0; q.len()];
        self.grad_into(p, q, &mut hp, &mut hq);
        (hp, hq)
    }

    /// Analytic Hessian, `2n x 2n`, blocks ordered `(p, q)`.
    pub fn hess(&self, _p: &[f64], q: &[f64]) -> DMatrix<f64> {
        let pd = self.pdim();
        let qd = self.qdim();
        let dim = pd + qd;
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..pd {
            h[(i, i)] = 1.0;
        }
        for t in &self.terms {
            let c = self.phase(t, q).cos();
            for (j, &mj) in t.modes.iter().enumerate() {
                for (l, &ml) in t.modes.iter().enumerate() {
                    let wj = mj as f64 * std::f64::consts::TAU / self.lattice[j];
                    let wl = ml as f64 * std::f64::consts::TAU / self.lattice[l];
                    h[(pd + j, pd + l)] -= t.amplitude * c * wj * wl;
                }
            }
        }
        h
    }

    /// Wrap a configuration vector into the fundamental cell `[0, L_j)`.
    pub fn wrap_q(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(self.lattice.iter())
            .map(|(&qj, &lj)| qj.rem_euclid(lj))
            .collect()
    }
}

/// Builds a catalog system by name.
pub fn build_system(name: &str) -> Result<HamiltonianSystem> {
    let tau = std::f64::consts::TAU;
    match name {
        "pendulum" => Ok(HamiltonianSystem {
            name: name.to_string(),
            n: 1,
            ell: 1,
            lattice: vec![tau],
            mu: 1.0,
            r: 2.0,
            terms: vec![TrigTerm {
                amplitude: -1.0,
                modes: vec![1],
            }],
        }),
        "coupled_pendulum" => Ok(HamiltonianSystem {
            name: name.to_string(),
            n: 2,
            ell: 2,
            lattice: vec![tau, tau],
            mu: 1.0,
            r: 2.1,
            terms: vec![
                TrigTerm {
                    amplitude: -1.0,
                    modes: vec![1, 0],
                },
                TrigTerm {
                    amplitude: -1.0,
                    modes: vec![0, 1],
                },
            ],
        }),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// Builds a `custom_trig` system from a coefficient table.
pub fn build_custom(
    n: usize,
    lattice: Vec<f64>,
    terms: Vec<TrigTerm>,
    mu: f64,
    r: f64,
) -> Result<HamiltonianSystem> {
    if n == 0 {
        return Err(Error::InvalidSystem("n must be positive".into()));
    }
    if lattice.len() != n {
        return Err(Error::InvalidSystem(format!(
            "lattice has {} entries, expected ell = n = {}",
            lattice.len(),
            n
        )));
    }
    if lattice.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidSystem(
            "lattice entries must be positive".into(),
        ));
    }
    if mu <= 0.0 || r <= 0.0 {
        return Err(Error::InvalidSystem("mu and r must be positive".into()));
    }
    for t in &terms {
        if t.modes.len() != n {
            return Err(Error::InvalidSystem(format!(
                "term mode vector has {} entries, expected {}",
                t.modes.len(),
                n
            )));
        }
        if !t.amplitude.is_finite() {
            return Err(Error::InvalidSystem("non-finite amplitude".into()));
        }
    }
    Ok(HamiltonianSystem {
        name: "custom_trig".into(),
        n,
        ell: n,
        lattice,
        mu,
        r,
        terms,
    })
}

/// Assumption-check report; passes iff every violation is `<= 0`.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// `max |H(p, q + L m) - H(p, q)|` minus the periodicity tolerance.
    pub h1_violation: f64,
    /// `max (mu H - p . H_p)` over the grid.
    pub h2_growth_violation: f64,
    /// `max (-H)` over the grid (positivity of `H` for `|p| >= r`).
    pub h2_positivity_violation: f64,
    pub pass: bool,
}

/// Samples (H1) and (H2) over `|p| in [r, 3r]` and one period cell in `q`.
pub fn check_assumptions(sys: &HamiltonianSystem, per_dim: usize) -> AssumptionReport {
    let pd = sys.pdim();
    let qd = sys.qdim();
    let nq = per_dim.max(4);
    let q_grid = grid_starts(&vec![0.0; qd], &sys.lattice, nq);
    let dirs = direction_grid(pd, 4 * per_dim);
    let mut h1 = 0.0f64;
    let mut growth = f64::NEG_INFINITY;
    let mut positivity = f64::NEG_INFINITY;
    let mut hp = vec![0.0; pd];
    let mut hq = vec![0.0; qd];
    for dir in &dirs {
        for im in 0..per_dim.max(4) {
            let mag = sys.r * (1.0 + 2.0 * im as f64 / (per_dim.max(4) - 1) as f64);
            let p: Vec<f64> = dir.iter().map(|d| d * mag).collect();
            for q in &q_grid {
                let h = sys.eval(&p, q);
                sys.grad_into(&p, q, &mut hp, &mut hq);
                let php: f64 = p.iter().zip(hp.iter()).map(|(a, b)| a * b).sum();
                growth = growth.max(sys.mu * h - php);
                positivity = positivity.max(-h);
                let q_shift: Vec<f64> = q
                    .iter()
                    .zip(sys.lattice.iter())
                    .map(|(&qj, &lj)| qj + 2.0 * lj)
                    .collect();
                h1 = h1.max((sys.eval(&p, &q_shift) - h).abs());
            }
        }
    }
    let h1_violation = h1 - 1e-12;
    let pass = h1_violation <= 0.0 && growth <= 0.0 && positivity <= 0.0;
    AssumptionReport {
        h1_violation,
        h2_growth_violation: growth,
        h2_positivity_violation: positivity,
        pass,
    }
}

fn direction_grid(pdim: usize, count: usize) -> Vec<Vec<f64>> {
    match pdim {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => {
            // Angle grid over the sphere; pdim <= 2 in the catalog but keep it general.
            let per = (count.max(8) as f64).powf(1.0 / (pdim - 1) as f64).ceil() as usize;
            grid_starts(
                &vec![0.0; pdim - 1],
                &vec![std::f64::consts::TAU; pdim - 1],
                per,
            )
            .into_iter()
            .map(|a| unit_from_angles(&a, pdim))
            .collect()
        }
    }
}

/// Energy level data: `M`, the threshold `M*`, the growth constant `a`, and
/// the momentum radii `r' <= |p| <= r''` enclosing the surface.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyContext {
    pub m: f64,
    pub mstar: f64,
    pub a: f64,
    pub rlow: f64,
    pub rhigh: f64,
}

/// Computes the energy-context constants for `M > M*`.
pub fn energy_context(sys: &HamiltonianSystem, m: f64) -> Result<EnergyContext> {
    energy_context_impl(sys, m, true)
}

/// Energy context without the `M > M*` gate, for descriptive surface scans.
///
/// The solver pipeline needs the full `M > M*` margin, but the radial section
/// exists (and the charts make sense) as soon as the surface stays clear of
/// `p = 0`, i.e. `M > max_q V(q)`. Used by `analyze`-style surface reports.
pub fn energy_context_relaxed(sys: &HamiltonianSystem, m: f64) -> Result<EnergyContext> {
    energy_context_impl(sys, m, false)
}

fn energy_context_impl(sys: &HamiltonianSystem, m: f64, strict: bool) -> Result<EnergyContext> {
    let pd = sys.pdim();
    let qd = sys.qdim();

    // M* = max H over the ball |p| <= r times one q-cell.
    let clamp_ball = |p: &[f64]| -> Vec<f64> {
        let norm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= sys.r {
            p.to_vec()
        } else {
            p.iter().map(|v| v * sys.r / norm).collect()
        }
    };
    let neg_h = |x: &[f64]| -> f64 {
        let p = clamp_ball(&x[..pd]);
        -sys.eval(&p, &x[pd..])
    };
    let mut lo = vec![-sys.r; pd];
    let mut hi = vec![sys.r; pd];
    lo.extend(vec![0.0; qd]);
    hi.extend_from_slice(&sys.lattice);
    let per = if pd + qd <= 2 { 17 } else { 7 };
    let starts = grid_starts(&lo, &hi, per);
    let (_, neg_mstar) = multistart_min(&neg_h, &starts, 0.05 * sys.r, 1e-12, 8);
    let mstar = -neg_mstar;

    // a = min over |p| = r and q of H / |p|^mu.
    let ratio = |angles_q: &[f64]| -> f64 {
        let dir = unit_from_angles(&angles_q[..pd - 1], pd);
        let p: Vec<f64> = dir.iter().map(|d| d * sys.r).collect();
        sys.eval(&p, &angles_q[pd - 1..]) / sys.r.powf(sys.mu)
    };
    let mut lo = vec![0.0; pd - 1];
    let mut hi = vec![std::f64::consts::TAU; pd - 1];
    lo.extend(vec![0.0; qd]);
    hi.extend_from_slice(&sys.lattice);
    let starts = grid_starts(&lo, &hi, if pd - 1 + qd <= 2 { 17 } else { 7 });
    let (_, a) = multistart_min(&ratio, &starts, 0.1, 1e-12, 8);
    if !(a > 0.0) {
        return Err(Error::InvalidSystem(format!(
            "growth constant a = {a} is not positive; (H2) fails at |p| = r"
        )));
    }

    if strict && m <= mstar {
        return Err(Error::EnergyBelowMstar { m, mstar });
    }
    if !strict {
        // Below M* the surface still projects radially as long as it stays
        // clear of p = 0, i.e. M exceeds the potential everywhere.
        let neg_v = |q: &[f64]| -> f64 { -sys.potential(q) };
        let q_starts = grid_starts(&vec![0.0; qd], &sys.lattice, if qd <= 2 { 17 } else { 7 });
        let (_, neg_vmax) = multistart_min(&neg_v, &q_starts, 0.1, 1e-12, 8);
        if m <= -neg_vmax + 1e-10 {
            return Err(Error::EnergyBelowMstar { m, mstar });
        }
    }
    let rhigh = (m / a).powf(1.0 / sys.mu);

    // r' = min |p| over the surface, scanned through the radial section sigma.
    let sigma_obj = |angles_q: &[f64]| -> f64 {
        let dir = unit_from_angles(&angles_q[..pd - 1], pd);
        sigma_root(sys, m, &dir, &angles_q[pd - 1..], sys.r, 2.0 * rhigh, None)
            .unwrap_or(f64::INFINITY)
    };
    let starts = grid_starts(&lo, &hi, if pd - 1 + qd <= 2 { 17 } else { 9 });
    let (_, rlow) = multistart_min(&sigma_obj, &starts, 0.05, 1e-12, 8);
    if !rlow.is_finite() {
        return Err(Error::BracketFailure(
            "radial section scan found no surface point".into(),
        ));
    }

    Ok(EnergyContext {
        m,
        mstar,
        a,
        rlow,
        rhigh,
    })
}

/// Solves `H(sigma dir, q) = M` for the unique `sigma` above the (H2) radius.
///
/// Bisection narrows the bracket `[lo, hi]`, then Newton polishes to
/// `|H - M| <= 1e-12`. A warm-start `guess` skips straight to Newton.
pub fn sigma_root(
    sys: &HamiltonianSystem,
    m: f64,
    dir: &[f64],
    q: &[f64],
    lo: f64,
    hi: f64,
    guess: Option<f64>,
) -> Result<f64> {
    let pd = sys.pdim();
    let mut hp = vec![0.0; pd];
    let mut hq = vec![0.0; sys.qdim()];
    let eval = |s: f64| -> f64 {
        let p: Vec<f64> = dir.iter().map(|d| d * s).collect();
        sys.eval(&p, q) - m
    };
    let deriv = |s: f64, hp: &mut [f64], hq: &mut [f64]| -> f64 {
        let p: Vec<f64> = dir.iter().map(|d| d * s).collect();
        sys.grad_into(&p, q, hp, hq);
        dir.iter().zip(hp.iter()).map(|(d, g)| d * g).sum()
    };
    let newton = |s0: f64, hp: &mut [f64], hq: &mut [f64]| -> Option<f64> {
        let mut s = s0;
        for _ in 0..50 {
            let f = eval(s);
            if f.abs() <= 1e-12 * (1.0 + m.abs()) {
                return Some(s);
            }
            let d = deriv(s, hp, hq);
            if d.abs() < 1e-14 {
                return None;
            }
            let snew = s - f / d;
            if !snew.is_finite() || snew <= 0.0 || snew > 4.0 * hi {
                return None;
            }
            s = snew;
        }
        None
    };
    if let Some(g) = guess {
        if let Some(s) = newton(g, &mut hp, &mut hq) {
            return Ok(s);
        }
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (eval(a), eval(b));
    // The surface can dip below `lo` when M is close to the potential ridge;
    // walk the lower end toward 0 until H - M changes sign there.
    while fa > 0.0 && a > 1e-8 * hi {
        a *= 0.5;
        fa = eval(a);
    }
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::BracketFailure(format!(
            "H - M has no sign change on [{a}, {b}]: ({fa:.3e}, {fb:.3e}); (H2) violated numerically"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if eval(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-6 * (1.0 + b) {
            break;
        }
    }
    newton(0.5 * (a + b), &mut hp, &mut hq)
        .ok_or_else(|| Error::RootDivergence("sigma Newton polish failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pendulum_direct_evaluation() {
        let sys = build_system("pendulum").unwrap();
        assert_abs_diff_eq!(sys.eval(&[2.0], &[0.0]), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn coupled_pendulum_direct_evaluation() {
        let sys = build_system("coupled_pendulum").unwrap();
        assert_abs_diff_eq!(sys.eval(&[1.0, 1.0], &[0.0, 0.0]), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn pendulum_configuration_periodicity() {
        let sys = build_system("pendulum").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = [rng.gen_range(-5.0..5.0)];
            let q = [rng.gen_range(-10.0..10.0)];
            let shifted = [q[0] + std::f64::consts::TAU];
            assert_abs_diff_eq!(sys.eval(&p, &q), sys.eval(&p, &shifted), epsilon = 1e-12);
        }
    }

    #[test]
    fn unknown_catalog_name_rejected() {
        assert!(matches!(build_system("nope"), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn custom_spec_validation() {
        assert!(build_custom(1, vec![-1.0], vec![], 1.0, 2.0).is_err());
        assert!(build_custom(1, vec![6.28], vec![], 0.0, 2.0).is_err());
        assert!(build_custom(
            2,
            vec![6.28, 6.28],
            vec![TrigTerm {
                amplitude: 1.0,
                modes: vec![1]
            }],
            1.0,
            2.0
        )
        .is_err());
    }

    #[test]
    fn assumptions_pendulum_pass_and_fail() {
        let sys = build_system("pendulum").unwrap();
        assert!(check_assumptions(&sys, 12).pass);

        let mut small_r = sys.clone();
        small_r.r = 1.0;
        let report = check_assumptions(&small_r, 12);
        assert!(!report.pass);
        assert!(report.h2_positivity_violation > 0.0);
    }

    #[test]
    fn assumptions_coupled_pendulum_pass() {
        let sys = build_system("coupled_pendulum").unwrap();
        assert!(check_assumptions(&sys, 8).pass);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sys = build_system("coupled_pendulum").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-7.0..7.0)).collect();
            let (hp, hq) = sys.grad(&p, &q);
            let h = 1e-6;
            for j in 0..2 {
                let mut pp = p.clone();
                pp[j] += h;
                let mut pm = p.clone();
                pm[j] -= h;
                let fd = (sys.eval(&pp, &q) - sys.eval(&pm, &q)) / (2.0 * h);
                assert!((fd - hp[j]).abs() <= 1e-6 * (1.0 + hp[j].abs()));
                let mut qp = q.clone();
                qp[j] += h;
                let mut qm = q.clone();
                qm[j] -= h;
                let fd = (sys.eval(&p, &qp) - sys.eval(&p, &qm)) / (2.0 * h);
                assert!((fd - hq[j]).abs() <= 1e-6 * (1.0 + hq[j].abs()));
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let sys = build_system("coupled_pendulum").unwrap();
        let p = [0.3, -1.1];
        let q = [0.9, 2.4];
        let hess = sys.hess(&p, &q);
        let h = 1e-5;
        for j in 0..2 {
            let mut qp = q.to_vec();
            qp[j] += h;
            let mut qm = q.to_vec();
            qm[j] -= h;
            let (_, gqp) = sys.grad(&p, &qp);
            let (_, gqm) = sys.grad(&p, &qm);
            for l in 0..2 {
                let fd = (gqp[l] - gqm[l]) / (2.0 * h);
                assert!((fd - hess[(2 + l, 2 + j)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn energy_context_pendulum_closed_forms() {
        let sys = build_system("pendulum").unwrap();
        let ctx = energy_context(&sys, 3.5).unwrap();
        assert_abs_diff_eq!(ctx.mstar, 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(ctx.a, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(ctx.rhigh, 7.0, epsilon = 1e-7);
        assert_abs_diff_eq!(ctx.rlow, 5.0f64.sqrt(), epsilon = 1e-7);
    }

    #[test]
    fn energy_context_coupled_closed_forms() {
        let sys = build_system("coupled_pendulum").unwrap();
        let ctx = energy_context(&sys, 4.5).unwrap();
        assert_abs_diff_eq!(ctx.mstar, 0.5 * 2.1 * 2.1 + 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(ctx.rlow, 5.0f64.sqrt(), epsilon = 1e-7);
    }

    #[test]
    fn energy_below_mstar_rejected() {
        let sys = build_system("pendulum").unwrap();
        assert!(matches!(
            energy_context(&sys, 2.0),
            Err(Error::EnergyBelowMstar { .. })
        ));
    }
}

//! Radial gauge of the energy surface.
//!
//! The gauge `alpha(p, q)` is the positively homogeneous degree-one function
//! with `H(p / alpha, q) = M`; the surface is exactly `alpha = 1`. Built on
//! it: the radial section `sigma`, the charts `F1` / `F2` identifying the
//! surface with `S^{2n-l-1} x R^l`, and the shell coordinate `ln alpha`.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::hamiltonians::{sigma_root, EnergyContext, HamiltonianSystem, PhasePoint};

/// Gauge of `H^{-1}(M)`; owns a warm-start cache for the radial root-finds.
#[derive(Debug)]
pub struct GaugeField {
    pub sys: HamiltonianSystem,
    pub ctx: EnergyContext,
    cache: Mutex<HashMap<Vec<i64>, f64>>,
}

impl Clone for GaugeField {
    fn clone(&self) -> Self {
        Self {
            sys: self.sys.clone(),
            ctx: self.ctx,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

const CACHE_QUANTUM: f64 = 1e-9;

impl GaugeField {
    pub fn new(sys: HamiltonianSystem, ctx: EnergyContext) -> Self {
        Self {
            sys,
            ctx,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// The unique `sigma > 0` with `H(sigma p_dir, q) = M`; `|p_dir| = 1`.
    ///
    /// The cache only supplies Newton warm starts, so results are identical
    /// with the cache disabled up to the root tolerance.
    pub fn sigma(&self, p_dir: &[f64], q: &[f64]) -> Result<f64> {
        let key: Vec<i64> = p_dir
            .iter()
            .chain(q.iter())
            .map(|v| (v / CACHE_QUANTUM).round() as i64)
            .collect();
        let guess = self.cache.lock().unwrap().get(&key).copied();
        let s = self.sigma_with_guess(p_dir, q, guess)?;
        if guess.is_none() {
            let mut cache = self.cache.lock().unwrap();
            if cache.len() < 200_000 {
                cache.insert(key, s);
            }
        }
        Ok(s)
    }

    /// `sigma` with an explicit Newton warm start, bypassing the cache.
    ///
    /// Callers that evaluate along trajectories should thread the previous
    /// value through as the guess; convergence then takes one or two steps.
    pub fn sigma_with_guess(&self, p_dir: &[f64], q: &[f64], guess: Option<f64>) -> Result<f64> {
        let lo = self.sys.r.min(0.5 * self.ctx.rlow);
        sigma_root(
            &self.sys,
            self.ctx.m,
            p_dir,
            q,
            lo,
            2.0 * self.ctx.rhigh,
            guess,
        )
    }

    /// Gauge value `alpha = |p| / sigma(p/|p|, q)`; rejects `p = 0`.
    pub fn alpha(&self, x: &PhasePoint) -> Result<f64> {
        let norm: f64 = x.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroMomentum("alpha".into()));
        }
        let dir: Vec<f64> = x.p.iter().map(|v| v / norm).collect();
        Ok(norm / self.sigma(&dir, &x.q)?)
    }

    /// Gradient `(alpha_p, alpha_q)` by implicit differentiation of
    /// `H(p / alpha, q) = M`.
    pub fn alpha_gradient(&self, x: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.alpha(x)?;
        let u: Vec<f64> = x.p.iter().map(|v| v / a).collect();
        let (hp, hq) = self.sys.grad(&u, &x.q);
        let denom: f64 = hp.iter().zip(u.iter()).map(|(g, v)| g * v).sum();
        if denom.abs() < 1e-12 {
            return Err(Error::GaugeSingularity(denom.abs()));
        }
        let ap: Vec<f64> = hp.iter().map(|g| g / denom).collect();
        let aq: Vec<f64> = hq.iter().map(|g| a * g / denom).collect();
        Ok((ap, aq))
    }

    /// Gauge value together with the radial section used, for warm-starting.
    pub fn alpha_with_guess(&self, x: &PhasePoint, guess: Option<f64>) -> Result<(f64, f64)> {
        let norm: f64 = x.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroMomentum("alpha".into()));
        }
        let dir: Vec<f64> = x.p.iter().map(|v| v / norm).collect();
        let s = self.sigma_with_guess(&dir, &x.q, guess)?;
        Ok((norm / s, s))
    }

    /// Chart `F1: H^{-1}(M) -> S^{2n-l-1} x R^l`, `(p, q) -> (p/|p|, q)`.
    ///
    /// Rejects points further than `1e-8` from the surface (in gauge units).
    pub fn chart_f1(&self, x: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.alpha(x)?;
        if (a - 1.0).abs() > 1e-8 {
            return Err(Error::NotASolution(format!(
                "point off the energy surface: alpha = {a}"
            )));
        }
        let norm: f64 = x.p.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((x.p.iter().map(|v| v / norm).collect(), x.q.clone()))
    }

    /// Chart `F2: S^{2n-l-1} x R^l -> H^{-1}(M)`, `(dir, q) -> (sigma dir, q)`.
    pub fn chart_f2(&self, dir: &[f64], q: &[f64]) -> Result<PhasePoint> {
        let s = self.sigma(dir, q)?;
        Ok(PhasePoint::new(
            dir.iter().map(|d| d * s).collect(),
            q.to_vec(),
        ))
    }

    /// Shell coordinate `s = ln alpha`; zero exactly on the surface.
    pub fn shell_coordinate(&self, x: &PhasePoint) -> Result<f64> {
        Ok(self.alpha(x)?.ln())
    }

    /// Radial projection onto the surface: `p -> p / alpha(p, q)`.
    pub fn project_to_surface(&self, x: &PhasePoint) -> Result<PhasePoint> {
        let a = self.alpha(x)?;
        Ok(PhasePoint::new(
            x.p.iter().map(|v| v / a).collect(),
            x.q.clone(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_system, energy_context, energy_context_relaxed};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pendulum_gauge() -> GaugeField {
        let sys = build_system("pendulum").unwrap();
        let ctx = energy_context(&sys, 3.5).unwrap();
        GaugeField::new(sys, ctx)
    }

    #[test]
    fn sigma_pendulum_closed_form() {
        let g = pendulum_gauge();
        assert_abs_diff_eq!(g.sigma(&[1.0], &[0.0]).unwrap(), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(
            g.sigma(&[1.0], &[std::f64::consts::PI]).unwrap(),
            5.0f64.sqrt(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn sigma_periodic_in_q() {
        let g = pendulum_gauge();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = rng.gen_range(-8.0..8.0);
            let a = g.sigma(&[1.0], &[q]).unwrap();
            let b = g.sigma(&[1.0], &[q + std::f64::consts::TAU]).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-11);
        }
    }

    #[test]
    fn alpha_surface_and_homogeneity() {
        let g = pendulum_gauge();
        assert_abs_diff_eq!(
            g.alpha(&PhasePoint::new(vec![3.0], vec![0.0])).unwrap(),
            1.0,
            epsilon = 1e-11
        );
        assert_abs_diff_eq!(
            g.alpha(&PhasePoint::new(vec![6.0], vec![0.0])).unwrap(),
            2.0,
            epsilon = 1e-10
        );
        assert!(g.alpha(&PhasePoint::new(vec![0.0], vec![0.5])).is_err());
    }

    #[test]
    fn defining_identity_on_random_points() {
        let g = pendulum_gauge();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = rng.gen_range(0.1..20.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let q = rng.gen_range(-7.0..7.0);
            let x = PhasePoint::new(vec![p], vec![q]);
            let a = g.alpha(&x).unwrap();
            let h = g.sys.eval(&[p / a], &[q]);
            assert!((h - g.ctx.m).abs() <= 1e-10);
        }
    }

    #[test]
    fn alpha_gradient_pendulum_closed_form() {
        let g = pendulum_gauge();
        let (ap, aq) = g
            .alpha_gradient(&PhasePoint::new(vec![3.0], vec![0.0]))
            .unwrap();
        assert_abs_diff_eq!(ap[0], 1.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(aq[0], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn alpha_gradient_matches_finite_differences() {
        let g = pendulum_gauge();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = rng.gen_range(0.5..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let q = rng.gen_range(-7.0..7.0);
            let x = PhasePoint::new(vec![p], vec![q]);
            let (ap, aq) = g.alpha_gradient(&x).unwrap();
            let h = 1e-6;
            let fd_p = (g.alpha(&PhasePoint::new(vec![p + h], vec![q])).unwrap()
                - g.alpha(&PhasePoint::new(vec![p - h], vec![q])).unwrap())
                / (2.0 * h);
            let fd_q = (g.alpha(&PhasePoint::new(vec![p], vec![q + h])).unwrap()
                - g.alpha(&PhasePoint::new(vec![p], vec![q - h])).unwrap())
                / (2.0 * h);
            assert!((fd_p - ap[0]).abs() <= 1e-6 * (1.0 + ap[0].abs()));
            assert!((fd_q - aq[0]).abs() <= 1e-6 * (1.0 + aq[0].abs()));
        }
    }

    #[test]
    fn alpha_gradient_momentum_part_degree_zero() {
        let g = pendulum_gauge();
        let x = PhasePoint::new(vec![2.4], vec![1.3]);
        let (ap1, _) = g.alpha_gradient(&x).unwrap();
        let scaled = PhasePoint::new(vec![2.4 * 7.3], vec![1.3]);
        let (ap2, _) = g.alpha_gradient(&scaled).unwrap();
        assert_abs_diff_eq!(ap1[0], ap2[0], epsilon = 1e-9);
    }

    #[test]
    fn charts_invert_each_other() {
        let g = pendulum_gauge();
        assert_abs_diff_eq!(
            g.chart_f2(&[1.0], &[0.0]).unwrap().p[0],
            3.0,
            epsilon = 1e-10
        );
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let q = rng.gen_range(-7.0..7.0);
            let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let x = g.chart_f2(&[dir], &[q]).unwrap();
            let (d2, q2) = g.chart_f1(&x).unwrap();
            assert_abs_diff_eq!(d2[0], dir, epsilon = 1e-9);
            assert_abs_diff_eq!(q2[0], q, epsilon = 1e-9);
            let x2 = g.chart_f2(&d2, &q2).unwrap();
            assert_abs_diff_eq!(x2.p[0], x.p[0], epsilon = 1e-9);
        }
        // Off-surface input rejected.
        assert!(g.chart_f1(&PhasePoint::new(vec![4.0], vec![0.0])).is_err());
    }

    #[test]
    fn coupled_pendulum_radius_range() {
        let sys = build_system("coupled_pendulum").unwrap();
        // M = 3 sits below M* = 4.205 but above the potential ridge, so the
        // surface is still radially resolvable through the relaxed context.
        assert!(energy_context(&sys, 3.0).is_err());
        let ctx = energy_context_relaxed(&sys, 3.0).unwrap();
        let g = GaugeField::new(sys, ctx);
        let mut min_r = f64::INFINITY;
        let mut max_r = f64::NEG_INFINITY;
        let dir = [1.0 / 2.0f64.sqrt(), 1.0 / 2.0f64.sqrt()];
        for i in 0..=16 {
            for j in 0..=16 {
                let q = [
                    std::f64::consts::TAU * i as f64 / 16.0,
                    std::f64::consts::TAU * j as f64 / 16.0,
                ];
                let x = g.chart_f2(&dir, &q).unwrap();
                let r: f64 = x.p.iter().map(|v| v * v).sum::<f64>().sqrt();
                min_r = min_r.min(r);
                max_r = max_r.max(r);
            }
        }
        assert_abs_diff_eq!(min_r, 2.0f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(max_r, 10.0f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn shell_coordinate_values() {
        let g = pendulum_gauge();
        assert_abs_diff_eq!(
            g.shell_coordinate(&PhasePoint::new(vec![3.0], vec![0.0]))
                .unwrap(),
            0.0,
            epsilon = 1e-11
        );
        assert_abs_diff_eq!(
            g.shell_coordinate(&PhasePoint::new(vec![6.0], vec![0.0]))
                .unwrap(),
            2.0f64.ln(),
            epsilon = 1e-10
        );
        let x = PhasePoint::new(vec![-2.7], vec![0.8]);
        let s0 = g.shell_coordinate(&x).unwrap();
        let scaled = PhasePoint::new(vec![-2.7 * (0.1f64).exp()], vec![0.8]);
        let s1 = g.shell_coordinate(&scaled).unwrap();
        assert_abs_diff_eq!(s1 - s0, 0.1, epsilon = 1e-11);
    }
}

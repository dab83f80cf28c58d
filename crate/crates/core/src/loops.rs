//! Fourier representation of 1-periodic loops in `R^{2n}`, the operator
//! `A = -J d/dt`, the spectral projections `P` / `P_perp`, and `A_0^{-1}`.
//!
//! A loop is stored through the complexification `z_j = p_j + i q_j`, under
//! which `J` becomes multiplication by `i` and the real basis `e^{2 pi m t J}`
//! becomes `e^{2 pi i m t}`. `A` then acts diagonally as `2 pi m` per mode.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A truncated loop: modes `m` in `[-d_grid, d_grid]`, coefficients in `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLoop {
    pub n: usize,
    pub d_grid: usize,
    /// Layout: `coeffs[(m + d_grid) * n + j]` is mode `m`, coordinate `j`.
    pub coeffs: Vec<Complex64>,
}

impl FourierLoop {
    pub fn zero(n: usize, d_grid: usize) -> Self {
        Self {
            n,
            d_grid,
            coeffs: vec![Complex64::ZERO; n * (2 * d_grid + 1)],
        }
    }

    pub fn mode(&self, m: i64) -> &[Complex64] {
        let base = ((m + self.d_grid as i64) as usize) * self.n;
        &self.coeffs[base..base + self.n]
    }

    pub fn mode_mut(&mut self, m: i64) -> &mut [Complex64] {
        let base = ((m + self.d_grid as i64) as usize) * self.n;
        &mut self.coeffs[base..base + self.n]
    }

    /// The mean `c_0`, i.e. the loop's center of mass `w`.
    pub fn mean(&self) -> &[Complex64] {
        self.mode(0)
    }

    /// Direct evaluation at a single time (used off the collocation grid).
    pub fn eval_at(&self, t: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; self.n];
        let d = self.d_grid as i64;
        for m in -d..=d {
            let ph = Complex64::from_polar(1.0, std::f64::consts::TAU * m as f64 * t);
            for (o, c) in out.iter_mut().zip(self.mode(m).iter()) {
                *o += c * ph;
            }
        }
        out
    }

    /// Derivative loop `dx/dt` (mode `m` multiplied by `2 pi i m`).
    pub fn derivative(&self) -> Self {
        let mut out = self.clone();
        let d = self.d_grid as i64;
        for m in -d..=d {
            let factor = Complex64::new(0.0, std::f64::consts::TAU * m as f64);
            for c in out.mode_mut(m) {
                *c *= factor;
            }
        }
        out
    }

    /// L^2 inner product of the underlying real loops.
    pub fn inner(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= alpha;
        }
    }
}

/// `A = -J d/dt`: multiplies mode `m` by `2 pi m`.
pub fn apply_a(x: &FourierLoop) -> FourierLoop {
    let mut out = x.clone();
    let d = x.d_grid as i64;
    for m in -d..=d {
        let factor = std::f64::consts::TAU * m as f64;
        for c in out.mode_mut(m) {
            *c *= factor;
        }
    }
    out
}

/// Spectral cutoff: the smallest half-integer multiple of `2 pi` above
/// `2 |That| M2`, at least `3 pi`. Returns `(d_cut, Lambda)`.
pub fn spectral_cutoff(that: f64, m2: f64) -> Result<(usize, f64)> {
    if that == 0.0 || !(m2 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "spectral cutoff needs That != 0 and M2 > 0, got ({that}, {m2})"
        )));
    }
    let target = 2.0 * that.abs() * m2;
    let d_cut = ((target / std::f64::consts::TAU - 0.5).ceil().max(1.0)) as usize;
    let lambda = std::f64::consts::TAU * (d_cut as f64 + 0.5);
    Ok((d_cut, lambda))
}

/// Keeps modes `|m| <= d_cut`, zeroing the rest.
pub fn project_p(x: &FourierLoop, d_cut: usize) -> FourierLoop {
    let mut out = x.clone();
    let d = x.d_grid as i64;
    for m in -d..=d {
        if m.unsigned_abs() as usize > d_cut {
            for c in out.mode_mut(m) {
                *c = Complex64::ZERO;
            }
        }
    }
    out
}

/// Keeps modes `d_cut < |m| <= d_grid`, zeroing the rest.
pub fn project_pperp(x: &FourierLoop, d_cut: usize) -> FourierLoop {
    let mut out = x.clone();
    let d = x.d_grid as i64;
    for m in -d..=d {
        if m.unsigned_abs() as usize <= d_cut {
            for c in out.mode_mut(m) {
                *c = Complex64::ZERO;
            }
        }
    }
    out
}

/// Inverse of `A` restricted to the high-mode space `Y`.
pub fn invert_a0(y: &FourierLoop, d_cut: usize) -> Result<FourierLoop> {
    let mut out = y.clone();
    let d = y.d_grid as i64;
    for m in -d..=d {
        if m.unsigned_abs() as usize <= d_cut {
            let leak: f64 = y.mode(m).iter().map(|c| c.norm_sqr()).sum();
            if leak > 1e-28 {
                return Err(Error::DimensionMismatch(format!(
                    "A0 inverse applied to a loop with low mode m = {m}"
                )));
            }
        } else {
            let factor = 1.0 / (std::f64::consts::TAU * m as f64);
            for c in out.mode_mut(m) {
                *c *= factor;
            }
        }
    }
    Ok(out)
}

fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = plans.lock().unwrap();
    map.entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Collocation samples at `t_k = k / n_t`; layout `samples[k * n + j]`.
pub fn grid_eval(x: &FourierLoop, n_t: usize) -> Result<Vec<Complex64>> {
    check_grid(x.d_grid, n_t)?;
    let plan = fft_plan(n_t, true);
    let mut out = vec![Complex64::ZERO; n_t * x.n];
    let mut buf = vec![Complex64::ZERO; n_t];
    let d = x.d_grid as i64;
    for j in 0..x.n {
        for c in buf.iter_mut() {
            *c = Complex64::ZERO;
        }
        for m in -d..=d {
            let slot = m.rem_euclid(n_t as i64) as usize;
            buf[slot] = x.mode(m)[j];
        }
        plan.process(&mut buf);
        for k in 0..n_t {
            out[k * x.n + j] = buf[k];
        }
    }
    Ok(out)
}

/// Fits modes `|m| <= d_grid` to collocation samples; returns the loop and
/// the relative energy discarded beyond `d_grid` (the aliasing guard).
pub fn grid_fit(samples: &[Complex64], n: usize, d_grid: usize) -> Result<(FourierLoop, f64)> {
    if n == 0 || samples.len() % n != 0 {
        return Err(Error::DimensionMismatch(format!(
            "sample buffer of {} entries does not tile into n = {n} coordinates",
            samples.len()
        )));
    }
    let n_t = samples.len() / n;
    check_grid(d_grid, n_t)?;
    let plan = fft_plan(n_t, false);
    let mut out = FourierLoop::zero(n, d_grid);
    let mut buf = vec![Complex64::ZERO; n_t];
    let mut kept = 0.0f64;
    let mut dropped = 0.0f64;
    for j in 0..n {
        for (k, c) in buf.iter_mut().enumerate() {
            *c = samples[k * n + j];
        }
        plan.process(&mut buf);
        for (slot, c) in buf.iter().enumerate() {
            let m = if slot <= n_t / 2 {
                slot as i64
            } else {
                slot as i64 - n_t as i64
            };
            let e = c.norm_sqr();
            if m.unsigned_abs() as usize <= d_grid {
                out.mode_mut(m)[j] = c / n_t as f64;
                kept += e;
            } else {
                dropped += e;
            }
        }
    }
    let total = kept + dropped;
    let ratio = if total > 0.0 {
        (dropped / total).sqrt()
    } else {
        0.0
    };
    Ok((out, ratio))
}

fn check_grid(d_grid: usize, n_t: usize) -> Result<()> {
    if n_t < 4 * (d_grid + 1) || !n_t.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "collocation grid N_t = {n_t} must be a power of two >= {}",
            4 * (d_grid + 1)
        )));
    }
    Ok(())
}

/// The default collocation size: next power of two at or above `8 (d_grid+1)`.
pub fn default_grid_size(d_grid: usize) -> usize {
    (8 * (d_grid + 1)).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_loop(n: usize, d_grid: usize, seed: u64) -> FourierLoop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = FourierLoop::zero(n, d_grid);
        for c in x.coeffs.iter_mut() {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        x
    }

    #[test]
    fn apply_a_spectrum() {
        let mut x = FourierLoop::zero(2, 3);
        x.mode_mut(0)[0] = Complex64::new(1.0, 0.5);
        assert_eq!(apply_a(&x).norm(), 0.0);

        let mut x = FourierLoop::zero(2, 3);
        x.mode_mut(1)[0] = Complex64::new(1.0, 0.0);
        let ax = apply_a(&x);
        assert_abs_diff_eq!(ax.mode(1)[0].re, std::f64::consts::TAU, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_form_two_ways() {
        let x = random_loop(2, 6, 3);
        let ax = apply_a(&x);
        let mode_sum = ax.inner(&x);
        // Grid quadrature of <Ax, x>: A x = -J dx/dt, and -J is -i on z.
        let n_t = 64;
        let dx = x.derivative();
        let xs = grid_eval(&x, n_t).unwrap();
        let dxs = grid_eval(&dx, n_t).unwrap();
        let mut quad = 0.0;
        for (a, b) in dxs.iter().zip(xs.iter()) {
            let ja = -Complex64::i() * a;
            quad += (ja.conj() * b).re;
        }
        quad /= n_t as f64;
        assert_abs_diff_eq!(mode_sum, quad, epsilon = 1e-10 * (1.0 + mode_sum.abs()));
    }

    #[test]
    fn cutoff_examples() {
        let pi = std::f64::consts::PI;
        let (d, l) = spectral_cutoff(1.0, pi).unwrap();
        assert_eq!(d, 1);
        assert_abs_diff_eq!(l, 3.0 * pi, epsilon = 1e-12);
        let (d, l) = spectral_cutoff(1.0, 10.0).unwrap();
        assert_eq!(d, 3);
        assert_abs_diff_eq!(l, 7.0 * pi, epsilon = 1e-12);
        // Tiny product still yields d_cut >= 1 and Lambda > 2 pi.
        let (d, l) = spectral_cutoff(0.1, 0.1).unwrap();
        assert_eq!(d, 1);
        assert!(l > std::f64::consts::TAU);
        assert!(spectral_cutoff(0.0, 1.0).is_err());
    }

    #[test]
    fn projections_partition() {
        let x = random_loop(3, 8, 5);
        let z = project_p(&x, 2);
        let y = project_pperp(&x, 2);
        let mut sum = z.clone();
        sum.axpy(1.0, &y);
        for (a, b) in sum.coeffs.iter().zip(x.coeffs.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-15);
        }
        assert_eq!(project_p(&z, 2), z);
        assert_abs_diff_eq!(z.inner(&y), 0.0, epsilon = 1e-14);
        // Constant loop is entirely in the z-part.
        let mut c = FourierLoop::zero(3, 8);
        c.mode_mut(0)[1] = Complex64::new(2.0, -1.0);
        assert_eq!(project_pperp(&c, 2).norm(), 0.0);
    }

    #[test]
    fn a0_inverse_bound_and_roundtrip() {
        let x = random_loop(2, 8, 7);
        let y = project_pperp(&x, 2);
        let inv = invert_a0(&y, 2).unwrap();
        let back = apply_a(&inv);
        for (a, b) in back.coeffs.iter().zip(y.coeffs.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
        }
        assert!(inv.norm() <= y.norm() / (std::f64::consts::TAU * 3.0) + 1e-12);
        assert!(invert_a0(&x, 2).is_err());
    }

    #[test]
    fn grid_round_trip_and_parseval() {
        let x = random_loop(2, 5, 9);
        let n_t = default_grid_size(5);
        let samples = grid_eval(&x, n_t).unwrap();
        let (back, ratio) = grid_fit(&samples, 2, 5).unwrap();
        assert!(ratio <= 1e-12);
        for (a, b) in back.coeffs.iter().zip(x.coeffs.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
        }
        // Parseval: grid quadrature of <x, y> matches the mode sum.
        let y = random_loop(2, 5, 11);
        let ys = grid_eval(&y, n_t).unwrap();
        let quad: f64 = samples
            .iter()
            .zip(ys.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / n_t as f64;
        let modes = x.inner(&y);
        assert_abs_diff_eq!(quad, modes, epsilon = 1e-10 * (1.0 + modes.abs()));
    }

    #[test]
    fn aliasing_guard_flags_high_mode() {
        // A pure mode above d_grid shows up in the discarded band.
        let n_t = 64usize;
        let mut samples = vec![Complex64::ZERO; n_t];
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 / n_t as f64;
            *s = Complex64::from_polar(1.0, std::f64::consts::TAU * 9.0 * t);
        }
        let (_, ratio) = grid_fit(&samples, 1, 5).unwrap();
        assert!(ratio > 0.9, "aliasing ratio {ratio}");
        assert!(grid_fit(&samples, 1, 20).is_err());
    }

    #[test]
    fn eval_at_matches_grid() {
        let x = random_loop(2, 4, 13);
        let n_t = 64;
        let samples = grid_eval(&x, n_t).unwrap();
        for k in [0usize, 7, 33] {
            let v = x.eval_at(k as f64 / n_t as f64);
            for j in 0..2 {
                assert_abs_diff_eq!(v[j].re, samples[k * 2 + j].re, epsilon = 1e-11);
                assert_abs_diff_eq!(v[j].im, samples[k * 2 + j].im, epsilon = 1e-11);
            }
        }
    }

    proptest::proptest! {
        // Band-limited loops survive the grid round trip with no aliasing
        // leak, for any admissible grid size.
        #[test]
        fn grid_round_trip_is_lossless(seed in 0u64..256, d_grid in 1usize..12) {
            let x = random_loop(2, d_grid, seed);
            let n_t = default_grid_size(d_grid);
            let samples = grid_eval(&x, n_t).unwrap();
            let (back, leak) = grid_fit(&samples, 2, d_grid).unwrap();
            proptest::prop_assert!(leak < 1e-12);
            for (a, b) in back.coeffs.iter().zip(x.coeffs.iter()) {
                proptest::prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}

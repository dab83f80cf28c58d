//! Saddle-point reduction of the fixed-period action to finitely many Fourier
//! modes, and the critical-point search for the reduced functional.
//!
//! With `A = -J d/dt` and the action gradient `B'(x) = That Hhat'(x + t
//! (0, kv)) + J (0, kv)`, the high modes are slaved through the contraction `y
//! = A_0^{-1} P_perp B'(z + y)`; critical points of `G(z) = <A x, x>/2 -
//! B(x(z))` on the low-mode space correspond to solutions of the fixed-period
//! problem.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loops::{
    apply_a, default_grid_size, grid_eval, grid_fit, invert_a0, project_pperp, spectral_cutoff,
    FourierLoop,
};
use crate::modification::ExtendedHamiltonian;
use crate::orbits::fphh_residual;

/// Sizes, tolerances, and the extended Hamiltonian for one reduction run.
#[derive(Debug, Clone)]
pub struct ReductionContext {
    pub hhat: ExtendedHamiltonian,
    pub that: f64,
    pub k: Vec<i64>,
    /// `L (.) k`, the winding translation in configuration space.
    pub kvec: Vec<f64>,
    pub d_cut: usize,
    /// Spectral gap bound `Lambda = 2 pi (d_cut + 1/2)`.
    pub lambda: f64,
    pub d_grid: usize,
    pub n_t: usize,
    pub tol_fp: f64,
    pub tol_crit: f64,
    pub max_fp_iter: usize,
}

impl ReductionContext {
    /// Builds the context with the cutoff from `2 |That| M2 < Lambda`.
    pub fn new(hhat: ExtendedHamiltonian, that: f64, k: &[i64]) -> Result<Self> {
        let (d_cut, lambda) = spectral_cutoff(that, hhat.m2)?;
        Self::with_cutoff(hhat, that, k, d_cut, lambda)
    }

    fn with_cutoff(
        hhat: ExtendedHamiltonian,
        that: f64,
        k: &[i64],
        d_cut: usize,
        lambda: f64,
    ) -> Result<Self> {
        let sys = &hhat.gauge.sys;
        if k.len() != sys.qdim() {
            return Err(Error::DimensionMismatch(format!(
                "k has {} entries for {} angle coordinates",
                k.len(),
                sys.qdim()
            )));
        }
        let kvec: Vec<f64> = sys
            .lattice
            .iter()
            .zip(k.iter())
            .map(|(l, &ki)| l * ki as f64)
            .collect();
        let d_grid = 4 * d_cut;
        let n_t = default_grid_size(d_grid);
        Ok(Self {
            hhat,
            that,
            k: k.to_vec(),
            kvec,
            d_cut,
            lambda,
            d_grid,
            n_t,
            tol_fp: 1e-11,
            tol_crit: 1e-9,
            max_fp_iter: 400,
        })
    }

    /// Applies explicit cutoff / collocation overrides, recomputing the
    /// dependent sizes.
    pub fn with_overrides(mut self, d_cut: Option<usize>, n_t: Option<usize>) -> Result<Self> {
        if let Some(d) = d_cut {
            let d = d.max(1);
            self.d_cut = d;
            self.lambda = std::f64::consts::TAU * (d as f64 + 0.5);
            self.d_grid = 4 * d;
            self.n_t = default_grid_size(self.d_grid);
        }
        if let Some(nt) = n_t {
            if !nt.is_power_of_two() || nt < 4 * (self.d_grid + 1) {
                return Err(Error::InvalidConfig(format!(
                    "N_t = {nt} must be a power of two >= {}",
                    4 * (self.d_grid + 1)
                )));
            }
            self.n_t = nt;
        }
        Ok(self)
    }

    /// Rebuilds with an inflated curvature bound (`NonContraction` recovery).
    pub fn inflate(&self, factor: f64) -> Result<Self> {
        let (d_cut, lambda) = spectral_cutoff(self.that, self.hhat.m2 * factor)?;
        let mut out = Self::with_cutoff(self.hhat.clone(), self.that, &self.k, d_cut, lambda)?;
        out.tol_fp = self.tol_fp;
        out.tol_crit = self.tol_crit;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.hhat.gauge.sys.n
    }

    /// Real dimension of the reduced space `Z`.
    pub fn dim(&self) -> usize {
        2 * self.n() * (2 * self.d_cut + 1)
    }

    pub fn zero_z(&self) -> FourierLoop {
        FourierLoop::zero(self.n(), self.d_cut)
    }

    pub fn pack(&self, z: &FourierLoop) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for c in &z.coeffs {
            v.push(c.re);
            v.push(c.im);
        }
        v
    }

    pub fn unpack(&self, v: &[f64]) -> FourierLoop {
        let mut z = self.zero_z();
        for (c, pair) in z.coeffs.iter_mut().zip(v.chunks_exact(2)) {
            *c = Complex64::new(pair[0], pair[1]);
        }
        z
    }

    /// Embeds a low-mode point into the full collocation truncation.
    pub fn embed(&self, z: &FourierLoop) -> FourierLoop {
        let mut x = FourierLoop::zero(self.n(), self.d_grid);
        let d = z.d_grid as i64;
        for m in -d..=d {
            x.mode_mut(m).copy_from_slice(z.mode(m));
        }
        x
    }

    /// Truncates a full loop to the low-mode space.
    pub fn truncate(&self, x: &FourierLoop) -> FourierLoop {
        let mut z = self.zero_z();
        let d = self.d_cut.min(x.d_grid) as i64;
        for m in -d..=d {
            z.mode_mut(m).copy_from_slice(x.mode(m));
        }
        z
    }
}

/// Warm-start state reused across nearby evaluations: per-grid-index radial
/// roots for the gauge solve and the slaved high-mode part.
#[derive(Debug, Clone, Default)]
pub struct EvalScratch {
    sigma: Vec<Option<f64>>,
    pub warm_y: Option<FourierLoop>,
}

impl EvalScratch {
    pub fn new(n_t: usize) -> Self {
        Self {
            sigma: vec![None; n_t],
            warm_y: None,
        }
    }
}

/// Action value and gradient loop `B'(x)` by collocation.
pub fn b_value_gradient(
    ctx: &ReductionContext,
    x: &FourierLoop,
    scratch: &mut EvalScratch,
) -> Result<(f64, FourierLoop)> {
    let n = ctx.n();
    let n_t = ctx.n_t;
    if scratch.sigma.len() != n_t {
        scratch.sigma = vec![None; n_t];
    }
    let xs = grid_eval(x, n_t)?;
    let mut grads = vec![Complex64::ZERO; n_t * n];
    let mut hsum = 0.0f64;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for kdx in 0..n_t {
        let t = kdx as f64 / n_t as f64;
        for j in 0..n {
            let z = xs[kdx * n + j];
            p[j] = z.re;
            q[j] = z.im + t * ctx.kvec[j];
        }
        let ev = ctx.hhat.value_grad(&p, &q, scratch.sigma[kdx])?;
        scratch.sigma[kdx] = ev.sigma;
        hsum += ev.value;
        for j in 0..n {
            grads[kdx * n + j] = ctx.that * Complex64::new(ev.grad_p[j], ev.grad_q[j]);
        }
    }
    let (mut bp, _) = grid_fit(&grads, n, ctx.d_grid)?;
    // The linear winding term: J (0, kv) = (-kv, 0) acts on the mean mode.
    for (c, kv) in bp.mode_mut(0).iter_mut().zip(ctx.kvec.iter()) {
        *c += Complex64::new(-kv, 0.0);
    }
    let mean = x.mean();
    let linear: f64 = mean
        .iter()
        .zip(ctx.kvec.iter())
        .map(|(c, kv)| -kv * c.re)
        .sum();
    Ok((ctx.that * hsum / n_t as f64 + linear, bp))
}

/// The slaved loop `x = z + y(z)` together with the contraction diagnostics.
#[derive(Debug, Clone)]
pub struct SlavedLoop {
    pub x: FourierLoop,
    pub y: FourierLoop,
    /// Worst observed ratio of successive fixed-point increments.
    pub ratio: f64,
}

/// Solves the high-mode fixed point `y = A_0^{-1} P_perp B'(z + y)`.
pub fn solve_y(
    ctx: &ReductionContext,
    z: &FourierLoop,
    scratch: &mut EvalScratch,
) -> Result<SlavedLoop> {
    let zfull = ctx.embed(z);
    let mut y = match &scratch.warm_y {
        Some(w) if w.n == zfull.n && w.d_grid == zfull.d_grid => project_pperp(w, ctx.d_cut),
        _ => FourierLoop::zero(ctx.n(), ctx.d_grid),
    };
    let mut prev_step = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    for iter in 0..ctx.max_fp_iter {
        let mut x = zfull.clone();
        x.axpy(1.0, &y);
        let (_, bp) = b_value_gradient(ctx, &x, scratch)?;
        let ynew = invert_a0(&project_pperp(&bp, ctx.d_cut), ctx.d_cut)?;
        let mut diff = ynew.clone();
        diff.axpy(-1.0, &y);
        let step = diff.norm();
        y = ynew;
        if step <= ctx.tol_fp {
            let mut x = zfull;
            x.axpy(1.0, &y);
            scratch.warm_y = Some(y.clone());
            return Ok(SlavedLoop {
                x,
                y,
                ratio: ratio_max,
            });
        }
        if prev_step.is_finite() && prev_step > 0.0 {
            let ratio = step / prev_step;
            if iter >= 2 {
                ratio_max = ratio_max.max(ratio);
            }
            if iter >= 3 && ratio > 0.9 {
                return Err(Error::NonContraction(ratio));
            }
        }
        prev_step = step;
    }
    Err(Error::NonContraction(1.0))
}

/// The reduced functional `G(z) = <A x, x>/2 - B(x(z))`.
pub fn reduced_value(
    ctx: &ReductionContext,
    z: &FourierLoop,
    scratch: &mut EvalScratch,
) -> Result<f64> {
    let slaved = solve_y(ctx, z, scratch)?;
    let (bval, _) = b_value_gradient(ctx, &slaved.x, scratch)?;
    Ok(0.5 * apply_a(&slaved.x).inner(&slaved.x) - bval)
}

/// The reduced gradient `G'(z) = A z - P B'(x(z))`, a low-mode loop.
pub fn reduced_gradient(
    ctx: &ReductionContext,
    z: &FourierLoop,
    scratch: &mut EvalScratch,
) -> Result<FourierLoop> {
    let slaved = solve_y(ctx, z, scratch)?;
    let (_, bp) = b_value_gradient(ctx, &slaved.x, scratch)?;
    let mut g = apply_a(z);
    g.axpy(-1.0, &ctx.truncate(&bp));
    Ok(g)
}

/// A converged and validated critical point of the reduced functional.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub z: FourierLoop,
    /// The full slaved loop `x = z + y(z)`.
    pub x: FourierLoop,
    /// Mean `Hhat` level along the sheared loop.
    pub b: f64,
    pub grad_norm: f64,
    /// Sup-norm residual of the fixed-period equation.
    pub residual_loop: f64,
    /// Sup-norm gap `|x(1) - x(0)|` of the representation.
    pub closure: f64,
    /// Set when deduplication fell into the ambiguous Hausdorff band.
    pub ambiguous: bool,
}

/// Low-mode seed obtained by truncating a full loop (e.g. a transferred
/// oracle orbit).
pub fn seed_from_orbit(ctx: &ReductionContext, x: &FourierLoop) -> FourierLoop {
    ctx.truncate(x)
}

/// Deterministic mean-mode starts: winding-aligned momenta on the surface
/// over a coarse grid of angle means, plus random first-mode perturbations.
pub fn default_starts(
    ctx: &ReductionContext,
    q_per_dim: usize,
    n_random: usize,
    seed: u64,
) -> Vec<FourierLoop> {
    let sys = &ctx.hhat.gauge.sys;
    let n = ctx.n();
    let knorm: f64 = ctx.kvec.iter().map(|v| v * v).sum::<f64>().sqrt();
    if knorm == 0.0 {
        return Vec::new();
    }
    let dir: Vec<f64> = ctx.kvec.iter().map(|v| v / knorm).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::new();
    let grid = q_per_dim.max(1);
    let total = grid.pow(n as u32).min(128);
    for idx in 0..total {
        let mut rem = idx;
        let mut q = vec![0.0; n];
        for j in 0..n {
            q[j] = sys.lattice[j] * (rem % grid) as f64 / grid as f64;
            rem /= grid;
        }
        for sgn in [1.0f64, -1.0] {
            let d: Vec<f64> = dir.iter().map(|v| sgn * v).collect();
            let sigma = match ctx.hhat.gauge.sigma(&d, &q) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let mut z = ctx.zero_z();
            for j in 0..n {
                z.mode_mut(0)[j] = Complex64::new(sigma * d[j], q[j]);
            }
            starts.push(z);
        }
    }
    let base = starts.clone();
    for i in 0..n_random {
        if base.is_empty() {
            break;
        }
        let mut z = base[i % base.len()].clone();
        if ctx.d_cut >= 1 {
            for j in 0..n {
                z.mode_mut(1)[j] +=
                    0.1 * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                z.mode_mut(-1)[j] +=
                    0.1 * Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        starts.push(z);
    }
    starts
}

fn grad_and_norm(
    ctx: &ReductionContext,
    z: &FourierLoop,
    scratch: &mut EvalScratch,
) -> Result<(FourierLoop, f64)> {
    let g = reduced_gradient(ctx, z, scratch)?;
    let norm = g.norm();
    Ok((g, norm))
}

/// Short damped flow along `sign * G'` used to spread candidates across
/// basins before the Newton stage.
fn damped_flow(
    ctx: &ReductionContext,
    z0: &FourierLoop,
    sign: f64,
    steps: usize,
    scratch: &mut EvalScratch,
) -> FourierLoop {
    let eta = 0.3 / ctx.lambda;
    let mut z = z0.clone();
    for _ in 0..steps {
        match reduced_gradient(ctx, &z, scratch) {
            Ok(g) => {
                let gnorm = g.norm();
                let cap = if gnorm > 1.0 { 1.0 / gnorm } else { 1.0 };
                z.axpy(-sign * eta * cap, &g);
            }
            Err(_) => break,
        }
    }
    z
}

fn fd_jacobian(
    ctx: &ReductionContext,
    z: &FourierLoop,
    r0: &[f64],
    scratch: &mut EvalScratch,
) -> Result<DMatrix<f64>> {
    let dim = ctx.dim();
    let v = ctx.pack(z);
    let mut jac = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let h = 1e-6 * (1.0 + v[j].abs());
        let mut vp = v.clone();
        vp[j] += h;
        let zp = ctx.unpack(&vp);
        let (gp, _) = grad_and_norm(ctx, &zp, scratch)?;
        let rp = ctx.pack(&gp);
        for i in 0..dim {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
    }
    Ok(jac)
}

fn newton_polish(
    ctx: &ReductionContext,
    z0: &FourierLoop,
    scratch: &mut EvalScratch,
) -> Result<(FourierLoop, f64)> {
    let dim = ctx.dim();
    let mut z = z0.clone();
    let (g, mut rnorm) = grad_and_norm(ctx, &z, scratch)?;
    let mut r = ctx.pack(&g);
    let mut jac: Option<DMatrix<f64>> = None;
    let mut fresh = false;
    for _iter in 0..80 {
        if rnorm <= ctx.tol_crit {
            return Ok((z, rnorm));
        }
        if jac.is_none() {
            jac = Some(fd_jacobian(ctx, &z, &r, scratch)?);
            fresh = true;
        }
        let jm = jac.as_ref().unwrap();
        let rv = DVector::from_column_slice(&r);
        let step = jm
            .clone()
            .lu()
            .solve(&rv)
            .or_else(|| jm.clone().svd(true, true).solve(&rv, 1e-12).ok())
            .ok_or_else(|| Error::RootDivergence("singular reduced Jacobian".into()))?;
        let v = ctx.pack(&z);
        let mut lambda = 1.0f64;
        let mut accepted = None;
        for _ in 0..12 {
            let cand: Vec<f64> = v
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a - lambda * s)
                .collect();
            let zc = ctx.unpack(&cand);
            if let Ok((gc, nc)) = grad_and_norm(ctx, &zc, scratch) {
                if nc < rnorm {
                    accepted = Some((zc, gc, nc, lambda));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((zc, gc, nc, lambda)) => {
                let rc = ctx.pack(&gc);
                // Broyden update of the Jacobian along the accepted step.
                let dz: DVector<f64> = -lambda * &step;
                let dznorm2 = dz.norm_squared();
                if dznorm2 > 0.0 {
                    let dr =
                        DVector::from_iterator(dim, rc.iter().zip(r.iter()).map(|(a, b)| a - b));
                    let correction = (&dr - jac.as_ref().unwrap() * &dz) / dznorm2;
                    let jm = jac.as_mut().unwrap();
                    *jm += correction * dz.transpose();
                }
                z = zc;
                r = rc;
                rnorm = nc;
                fresh = false;
            }
            None => {
                if fresh {
                    return Err(Error::RootDivergence(format!(
                        "reduced Newton stalled at |G'| = {rnorm:.3e}"
                    )));
                }
                jac = None; // retry with a fresh finite-difference Jacobian
            }
        }
    }
    Err(Error::RootDivergence(format!(
        "reduced Newton did not reach tolerance (|G'| = {rnorm:.3e})"
    )))
}

/// Time-shift and lattice normalization of a critical point.
pub fn canonicalize(ctx: &ReductionContext, z: &FourierLoop) -> FourierLoop {
    let n = ctx.n();
    let mut out = z.clone();
    if ctx.d_cut >= 1 {
        // Rotate time so the dominant first-mode coefficient has phase zero;
        // a shift by tau also advances the winding term on the mean.
        let mut best = (0usize, 0.0f64);
        for j in 0..n {
            let a = z.mode(1)[j].norm();
            if a > best.1 {
                best = (j, a);
            }
        }
        if best.1 > 1e-12 {
            let tau = -z.mode(1)[best.0].arg() / std::f64::consts::TAU;
            let d = ctx.d_cut as i64;
            for m in -d..=d {
                let ph = Complex64::from_polar(1.0, std::f64::consts::TAU * m as f64 * tau);
                for c in out.mode_mut(m) {
                    *c *= ph;
                }
            }
            for (c, kv) in out.mode_mut(0).iter_mut().zip(ctx.kvec.iter()) {
                *c += Complex64::new(0.0, tau * kv);
            }
        }
    }
    let lattice = ctx.hhat.gauge.sys.lattice.clone();
    for (j, c) in out.mode_mut(0).iter_mut().enumerate() {
        let pw = c.re - ctx.hhat.n0 * (c.re / ctx.hhat.n0).round_ties_even();
        let qw = c.im - lattice[j] * (c.im / lattice[j]).round_ties_even();
        *c = Complex64::new(pw, qw);
    }
    out
}

fn wrapped_trace(ctx: &ReductionContext, x: &FourierLoop, n_s: usize) -> Result<Vec<Vec<f64>>> {
    let n = ctx.n();
    // Evaluate on the full collocation grid, then thin to about n_s points.
    let n_full = ctx.n_t.max(default_grid_size(x.d_grid));
    let stride = (n_full / n_s).max(1);
    let xs = grid_eval(x, n_full)?;
    let lattice = &ctx.hhat.gauge.sys.lattice;
    let mut out = Vec::with_capacity(n_full / stride);
    for kdx in (0..n_full).step_by(stride) {
        let t = kdx as f64 / n_full as f64;
        let mut pt = Vec::with_capacity(2 * n);
        for j in 0..n {
            pt.push(xs[kdx * n + j].re);
        }
        for j in 0..n {
            pt.push((xs[kdx * n + j].im + t * ctx.kvec[j]).rem_euclid(lattice[j]));
        }
        out.push(pt);
    }
    Ok(out)
}

fn trace_hausdorff(ctx: &ReductionContext, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = ctx.n();
    let mut periods: Vec<Option<f64>> = vec![Some(ctx.hhat.n0); n];
    periods.extend(ctx.hhat.gauge.sys.lattice.iter().map(|l| Some(*l)));
    crate::orbits::polyline_hausdorff(a, b, &periods)
}

/// Runs the full critical-point search from the given low-mode starts.
///
/// Each start is spread by short `+G'`/`-G'` flows, polished by a damped
/// Newton iteration on `G' = 0`, validated against the fixed-period equation,
/// canonicalized, and deduplicated by the Hausdorff distance of wrapped
/// traces. Results are sorted by the level `b`.
pub fn find_critical_points(
    ctx: &ReductionContext,
    starts: &[FourierLoop],
) -> Result<Vec<CriticalPoint>> {
    let mut found: Vec<CriticalPoint> = Vec::new();
    let mut traces: Vec<Vec<Vec<f64>>> = Vec::new();
    for start in starts {
        let mut scratch = EvalScratch::new(ctx.n_t);
        let mut candidates = vec![start.clone()];
        if let Ok((_, gnorm)) = grad_and_norm(ctx, start, &mut scratch) {
            if gnorm > 10.0 * ctx.tol_crit {
                candidates.push(damped_flow(ctx, start, 1.0, 15, &mut scratch));
                candidates.push(damped_flow(ctx, start, -1.0, 15, &mut scratch));
            }
        } else {
            continue;
        }
        for cand in candidates {
            let polished = match newton_polish(ctx, &cand, &mut scratch) {
                Ok(p) => p,
                Err(Error::NonContraction(msg)) => return Err(Error::NonContraction(msg)),
                Err(_) => continue,
            };
            let (z, grad_norm) = polished;
            let z = canonicalize(ctx, &z);
            let slaved = match solve_y(ctx, &z, &mut scratch) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let residual_loop =
                match fphh_residual(&ctx.hhat, ctx.that, &ctx.kvec, &slaved.x, ctx.n_t) {
                    Ok(r) => r,
                    Err(_) => continue,
                };
            if residual_loop > 1e-7 {
                continue;
            }
            let mut closure = 0.0f64;
            for (a, b) in slaved
                .x
                .eval_at(1.0)
                .iter()
                .zip(slaved.x.eval_at(0.0).iter())
            {
                closure = closure.max((a - b).norm());
            }
            if closure > 1e-9 {
                continue;
            }
            let b = match mean_level(ctx, &slaved.x, &mut scratch) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let trace = match wrapped_trace(ctx, &slaved.x, 256) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let mut duplicate = false;
            let mut ambiguous = false;
            for (existing, tr) in found.iter_mut().zip(traces.iter()) {
                let d = trace_hausdorff(ctx, &trace, tr);
                if d <= 1e-4 {
                    duplicate = true;
                    break;
                } else if d <= 1e-2 {
                    duplicate = true;
                    ambiguous = true;
                    existing.ambiguous = true;
                    break;
                }
            }
            let _ = ambiguous;
            if duplicate {
                continue;
            }
            found.push(CriticalPoint {
                z,
                x: slaved.x,
                b,
                grad_norm,
                residual_loop,
                closure,
                ambiguous: false,
            });
            traces.push(trace);
        }
    }
    let mut order: Vec<usize> = (0..found.len()).collect();
    order.sort_by(|&i, &j| {
        found[i]
            .b
            .partial_cmp(&found[j].b)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                found[i]
                    .x
                    .norm()
                    .partial_cmp(&found[j].x.norm())
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    Ok(order.into_iter().map(|i| found[i].clone()).collect())
}

fn mean_level(ctx: &ReductionContext, x: &FourierLoop, scratch: &mut EvalScratch) -> Result<f64> {
    let n = ctx.n();
    let xs = grid_eval(x, ctx.n_t)?;
    let mut sum = 0.0;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for kdx in 0..ctx.n_t {
        let t = kdx as f64 / ctx.n_t as f64;
        for j in 0..n {
            p[j] = xs[kdx * n + j].re;
            q[j] = xs[kdx * n + j].im + t * ctx.kvec[j];
        }
        let ev = ctx
            .hhat
            .value_grad(&p, &q, scratch.sigma.get(kdx).copied().flatten())?;
        sum += ev.value;
    }
    Ok(sum / ctx.n_t as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::standard_dilation;
    use crate::gauge::GaugeField;
    use crate::hamiltonians::{build_system, energy_context};
    use crate::modification::{aux_profile, build_extended};
    use crate::oracle::{default_seeds, shoot_rotation_orbit};
    use crate::orbits::transfer_to_fixed_period;
    use approx::assert_abs_diff_eq;

    fn pendulum_ctx(that: f64) -> ReductionContext {
        let sys = build_system("pendulum").unwrap();
        let ectx = energy_context(&sys, 3.5).unwrap();
        let gauge = GaugeField::new(sys, ectx);
        let profile = aux_profile(0.3).unwrap();
        let spec = standard_dilation();
        let hhat = build_extended(&gauge, &profile, &spec).unwrap();
        ReductionContext::new(hhat, that, &[1]).unwrap()
    }

    fn surface_start(ctx: &ReductionContext, q: f64, sign: f64) -> FourierLoop {
        let sigma = ctx.hhat.gauge.sigma(&[sign], &[q]).unwrap();
        let mut z = ctx.zero_z();
        z.mode_mut(0)[0] = Complex64::new(sign * sigma, q);
        z
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ctx = pendulum_ctx(0.5);
        let mut z = surface_start(&ctx, 0.3, 1.0);
        z.mode_mut(1)[0] = Complex64::new(0.05, -0.02);
        z.mode_mut(-1)[0] = Complex64::new(-0.03, 0.04);
        let mut scratch = EvalScratch::new(ctx.n_t);
        let g = reduced_gradient(&ctx, &z, &mut scratch).unwrap();
        let gv = ctx.pack(&g);
        let v = ctx.pack(&z);
        for i in 0..ctx.dim() {
            let h = 1e-5;
            let mut vp = v.clone();
            vp[i] += h;
            let mut vm = v.clone();
            vm[i] -= h;
            let fp = reduced_value(&ctx, &ctx.unpack(&vp), &mut scratch).unwrap();
            let fm = reduced_value(&ctx, &ctx.unpack(&vm), &mut scratch).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert_abs_diff_eq!(gv[i], fd, epsilon = 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn gradient_is_lattice_periodic() {
        let ctx = pendulum_ctx(0.5);
        let mut z = surface_start(&ctx, 0.7, 1.0);
        z.mode_mut(1)[0] = Complex64::new(0.02, 0.01);
        let mut scratch = EvalScratch::new(ctx.n_t);
        let g0 = reduced_gradient(&ctx, &z, &mut scratch).unwrap();
        let mut zp = z.clone();
        zp.mode_mut(0)[0] += Complex64::new(ctx.hhat.n0, 0.0);
        let mut s1 = EvalScratch::new(ctx.n_t);
        let gp = reduced_gradient(&ctx, &zp, &mut s1).unwrap();
        let mut zq = z.clone();
        zq.mode_mut(0)[0] += Complex64::new(0.0, std::f64::consts::TAU);
        let mut s2 = EvalScratch::new(ctx.n_t);
        let gq = reduced_gradient(&ctx, &zq, &mut s2).unwrap();
        for (a, b) in g0.coeffs.iter().zip(gp.coeffs.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        for (a, b) in g0.coeffs.iter().zip(gq.coeffs.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn fixed_point_contracts() {
        use rand::{Rng, SeedableRng};
        let ctx = pendulum_ctx(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..6 {
            let q = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut z = surface_start(&ctx, q, if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
            z.mode_mut(1)[0] = Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
            let mut scratch = EvalScratch::new(ctx.n_t);
            let slaved = solve_y(&ctx, &z, &mut scratch).unwrap();
            assert!(
                slaved.ratio <= 0.5 + 1e-6,
                "contraction ratio {} exceeds bound",
                slaved.ratio
            );
        }
    }

    #[test]
    fn oracle_seed_converges_to_critical_point() {
        let sys = build_system("pendulum").unwrap();
        let ectx = energy_context(&sys, 3.5).unwrap();
        let gauge = GaugeField::new(sys.clone(), ectx);
        let seeds = default_seeds(&sys, &gauge, &[1]).unwrap();
        let sol = shoot_rotation_orbit(&sys, &gauge, &[1], &seeds[0]).unwrap();
        let spec = standard_dilation();
        let profile = aux_profile(0.3).unwrap();
        let hhat = build_extended(&gauge, &profile, &spec).unwrap();
        // A cheap first transfer pins down That; the second uses the sizes
        // the reduction context derives from it.
        let (_, that) = transfer_to_fixed_period(&sys, &spec, &sol, 8, 64).unwrap();
        let ctx = ReductionContext::new(hhat, that, &[1]).unwrap();
        let (xloop, _) = transfer_to_fixed_period(&sys, &spec, &sol, ctx.d_grid, ctx.n_t).unwrap();
        let seed = seed_from_orbit(&ctx, &xloop);
        let cps = find_critical_points(&ctx, &[seed]).unwrap();
        assert_eq!(cps.len(), 1, "expected one critical point from the seed");
        let cp = &cps[0];
        assert!(cp.grad_norm <= ctx.tol_crit);
        assert!(
            cp.residual_loop <= 1e-7,
            "loop residual {}",
            cp.residual_loop
        );
        assert!(cp.closure <= 1e-9);
        // The seed sits on the central shell: b = f(0) = delta / 6.
        assert_abs_diff_eq!(cp.b, 0.3 / 6.0, epsilon = 1e-7);
    }
}

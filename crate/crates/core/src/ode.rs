//! Adaptive Dormand-Prince 5(4) integrator.
//!
//! Short-horizon, tight-tolerance integration backend for the oracle, the
//! dilation flow, and the time-map quadratures. Step endpoints can be forced
//! so that trajectories are sampled on exact grids.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order embedded weights.
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` (either direction).
///
/// Local error controlled to `tol` (mixed absolute/relative). Returns the
/// state at `t1`.
pub fn integrate<F>(f: &F, t0: f64, t1: f64, y0: &[f64], tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut y = y0.to_vec();
    let mut t = t0;
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y);
    }
    let dir = span.signum();
    let mut h = (span.abs() * 0.01).max(1e-10) * dir;
    let mut k1 = f(t, &y);
    let dim = y.len();
    let mut rejected_in_a_row = 0usize;

    while (t1 - t) * dir > 0.0 {
        if h.abs() > (t1 - t).abs() {
            h = t1 - t;
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepCollapse(t));
        }
        let stage = |c: &[(f64, &Vec<f64>)]| -> Vec<f64> {
            (0..dim)
                .map(|i| y[i] + h * c.iter().map(|(a, k)| a * k[i]).sum::<f64>())
                .collect()
        };
        let y2 = stage(&[(A21, &k1)]);
        let k2 = f(t + 0.2 * h, &y2);
        let y3 = stage(&[(A31, &k1), (A32, &k2)]);
        let k3 = f(t + 0.3 * h, &y3);
        let y4 = stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k4 = f(t + 0.8 * h, &y4);
        let y5 = stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = f(t + 8.0 / 9.0 * h, &y5);
        let y6 = stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = f(t + h, &y6);
        let ynew: Vec<f64> = (0..dim)
            .map(|i| y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]))
            .collect();
        let k7 = f(t + h, &ynew);
        let mut err = 0.0f64;
        for i in 0..dim {
            let ylow = y[i]
                + h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = 1.0 + y[i].abs().max(ynew[i].abs());
            err = err.max((ynew[i] - ylow).abs() / scale);
        }
        if err <= tol {
            t += h;
            y = ynew;
            k1 = k7; // FSAL
            rejected_in_a_row = 0;
        } else {
            rejected_in_a_row += 1;
            if rejected_in_a_row > 40 {
                return Err(Error::StepCollapse(t));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.1, 5.0)
        };
        h *= factor;
    }
    Ok(y)
}

/// Integrate and record the state at `n_out + 1` equally spaced times
/// `t0 + j (t1 - t0)/n_out`, forcing step endpoints onto the grid.
pub fn integrate_sampled<F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    tol: f64,
    n_out: usize,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut out = Vec::with_capacity(n_out + 1);
    let mut y = y0.to_vec();
    out.push(y.clone());
    for j in 0..n_out {
        let ta = t0 + (t1 - t0) * j as f64 / n_out as f64;
        let tb = t0 + (t1 - t0) * (j + 1) as f64 / n_out as f64;
        y = integrate(f, ta, tb, &y, tol)?;
        out.push(y.clone());
    }
    Ok(out)
}

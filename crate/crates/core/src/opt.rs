//! Small derivative-free optimizer used for the energy-context constants.
//!
//! Multistart local refinement: evaluate a coarse grid of starts, then polish
//! the best candidates with Nelder-Mead down to a tight simplex tolerance.

/// Nelder-Mead minimization of `f` starting from `x0` with initial step `h`.
///
/// Returns `(x_min, f_min)`. Termination on simplex diameter and value spread
/// below `tol`, or `max_eval` function evaluations.
pub fn nelder_mead<F>(f: F, x0: &[f64], h: f64, tol: f64, max_eval: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        let v = f(x0);
        return (x0.to_vec(), v);
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += h;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evals = dim + 1;

    while evals < max_eval {
        // Order the simplex.
        let mut idx: Vec<usize> = (0..=dim).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let simplex_sorted: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let values_sorted: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        let spread = values[dim] - values[0];
        let diam = (0..dim)
            .map(|j| {
                simplex
                    .iter()
                    .map(|v| (v[j] - simplex[0][j]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= tol && diam <= tol.max(1e-14) {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for v in simplex.iter().take(dim) {
            for j in 0..dim {
                centroid[j] += v[j] / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let reflect: Vec<f64> = (0..dim).map(|j| 2.0 * centroid[j] - worst[j]).collect();
        let fr = f(&reflect);
        evals += 1;

        if fr < values[0] {
            let expand: Vec<f64> = (0..dim)
                .map(|j| 3.0 * centroid[j] - 2.0 * worst[j])
                .collect();
            let fe = f(&expand);
            evals += 1;
            if fe < fr {
                simplex[dim] = expand;
                values[dim] = fe;
            } else {
                simplex[dim] = reflect;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflect;
            values[dim] = fr;
        } else {
            let contract: Vec<f64> = (0..dim).map(|j| 0.5 * (centroid[j] + worst[j])).collect();
            let fc = f(&contract);
            evals += 1;
            if fc < values[dim] {
                simplex[dim] = contract;
                values[dim] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=dim {
                    for j in 0..dim {
                        simplex[i][j] = 0.5 * (simplex[i][j] + simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
                evals += dim;
            }
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

/// Multistart: refine the `keep` best grid candidates with Nelder-Mead.
pub fn multistart_min<F>(
    f: &F,
    starts: &[Vec<f64>],
    h: f64,
    tol: f64,
    keep: usize,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!starts.is_empty());
    let mut scored: Vec<(f64, &Vec<f64>)> = starts.iter().map(|x| (f(x), x)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (_, x0) in scored.iter().take(keep.max(1)) {
        let (x, v) = nelder_mead(f, x0, h, tol, 4000);
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((x, v));
        }
    }
    best.unwrap()
}

/// Unit vector in `R^dim` from `dim - 1` spherical angles.
pub fn unit_from_angles(angles: &[f64], dim: usize) -> Vec<f64> {
    assert_eq!(angles.len() + 1, dim.max(1));
    if dim == 1 {
        return vec![1.0];
    }
    // u_i = cos(a_i) * prod_{j<i} sin(a_j); last = prod sin(a_j).
    let mut u = vec![0.0; dim];
    let mut sin_prod = 1.0;
    for (i, &a) in angles.iter().enumerate() {
        u[i] = a.cos() * sin_prod;
        sin_prod *= a.sin();
    }
    u[dim - 1] = sin_prod;
    u
}

/// Uniform grid of points over a box, `per_dim` points per dimension.
pub fn grid_starts(lo: &[f64], hi: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
    let dim = lo.len();
    if dim == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut index = vec![0usize; dim];
    loop {
        let point: Vec<f64> = (0..dim)
            .map(|j| {
                if per_dim == 1 {
                    0.5 * (lo[j] + hi[j])
                } else {
                    lo[j] + (hi[j] - lo[j]) * index[j] as f64 / (per_dim - 1) as f64
                }
            })
            .collect();
        out.push(point);
        let mut carry = 0;
        loop {
            index[carry] += 1;
            if index[carry] < per_dim {
                break;
            }
            index[carry] = 0;
            carry += 1;
            if carry == dim {
                return out;
            }
        }
    }
}

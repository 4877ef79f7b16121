//! Derivative-free simplex minimization and finite-difference derivatives,
//! shared by the fitting routines.

/// Outcome of a simplex run. `converged` means the vertex values collapsed to
/// the requested relative spread before the evaluation budget ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead with standard coefficients. `scale` sets the initial vertex
/// displacement per coordinate and must be nonzero.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    max_eval: usize,
    tol: f64,
) -> SimplexResult {
    let n = x0.len();
    assert!(n >= 1 && scale.len() == n);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += scale[k];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let mut converged = false;
    while evals < max_eval {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for vert in &simplex[..n] {
            for k in 0..n {
                centroid[k] += vert.0[k] / n as f64;
            }
        }
        let point = |coef: f64| -> Vec<f64> {
            let worst_x = &simplex[n].0;
            (0..n)
                .map(|k| centroid[k] + coef * (centroid[k] - worst_x[k]))
                .collect()
        };
        let xr = point(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = point(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = point(0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            } else {
                let x = point(-0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best_x = simplex[0].0.clone();
                for vert in simplex.iter_mut().skip(1) {
                    for k in 0..n {
                        vert.0[k] = best_x[k] + 0.5 * (vert.0[k] - best_x[k]);
                    }
                    vert.1 = eval(&vert.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    SimplexResult {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        evaluations: evals,
        converged,
    }
}

/// Simplex run followed by restarts from the incumbent with a 20x smaller
/// initial simplex; escapes the degenerate collapsed shapes Nelder-Mead is
/// prone to.
pub fn nelder_mead_restarted<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    max_eval: usize,
    tol: f64,
    restarts: usize,
) -> SimplexResult {
    let mut best = nelder_mead(&mut f, x0, scale, max_eval, tol);
    let mut small: Vec<f64> = scale.iter().map(|s| s / 20.0).collect();
    for _ in 0..restarts {
        let again = nelder_mead(&mut f, &best.x, &small, max_eval, tol);
        let improved = again.value < best.value;
        if improved {
            best = again;
        } else {
            best.converged = best.converged || again.converged;
            break;
        }
        for s in &mut small {
            *s /= 20.0;
        }
    }
    best
}

/// Central-difference Jacobian of a residual vector, row i = d r_i / d x_k.
pub fn fd_jacobian<F: FnMut(&[f64]) -> Vec<f64>>(
    mut r: F,
    x: &[f64],
    steps: &[f64],
) -> nalgebra::DMatrix<f64> {
    let n = x.len();
    assert_eq!(steps.len(), n);
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let h = steps[k];
        let mut xp = x.to_vec();
        xp[k] += h;
        let mut xm = x.to_vec();
        xm[k] -= h;
        let rp = r(&xp);
        let rm = r(&xm);
        assert_eq!(rp.len(), rm.len());
        cols.push(nalgebra::DVector::from_iterator(
            rp.len(),
            rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)),
        ));
    }
    nalgebra::DMatrix::from_columns(&cols)
}

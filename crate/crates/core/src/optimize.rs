//! Local minimizers used by the numerical verification.

use nalgebra::{DMatrix, DVector};

/// Result of a local minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Whether the stopping rule fired before the iteration budget ran out.
    pub converged: bool,
}

/// Nelder–Mead simplex descent with dimension-adapted coefficients.
///
/// Stops once the spread of objective values over the simplex is at most
/// `tol`, or after `max_iter` iterations.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> Outcome {
    let d = x0.len();
    if d == 0 {
        return Outcome { x: Vec::new(), value: f(x0), iterations: 0, converged: true };
    }
    let df = d as f64;
    let (alpha, chi, rho, shrink) = (1.0, 1.0 + 2.0 / df, 0.75 - 0.5 / df, 1.0 - 1.0 / df);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut order: Vec<usize> = (0..=d).collect();
    let mut centroid = vec![0.0; d];
    let along =
        |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(ci, wi)| ci + t * (ci - wi)).collect() };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, second, worst) = (order[0], order[d - 1], order[d]);
        if values[worst] - values[best] <= tol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.fill(0.0);
        for &i in &order[..d] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / df;
            }
        }
        let xr = along(&centroid, &simplex[worst], alpha);
        let fr = f(&xr);
        if fr < values[best] {
            let xe = along(&centroid, &simplex[worst], alpha * chi);
            let fe = f(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < values[worst] {
            let xc = along(&centroid, &simplex[worst], alpha * rho);
            let fc = f(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(&centroid, &simplex[worst], -rho);
            let fc = f(&xc);
            (xc, fc, fc < values[worst])
        };
        if accept {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + shrink * (*x - a);
            }
            values[i] = f(&simplex[i]);
        }
    }

    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Outcome { x: simplex[best].clone(), value: values[best], iterations, converged }
}

/// Nelder–Mead restarted from its own optimum with a fresh, smaller simplex
/// until a restart improves the objective by no more than `tol`.
///
/// `max_iter` bounds the total iterations across restarts.
pub fn nelder_mead_with_restarts(f: impl Fn(&[f64]) -> f64, x0: &[f64], tol: f64, max_iter: usize) -> Outcome {
    const STEPS: [f64; 3] = [0.5, 0.05, 0.005];
    let mut best = nelder_mead(&f, x0, STEPS[0], tol, max_iter);
    let mut used = best.iterations;
    let mut round = 1;
    while best.converged && used < max_iter {
        let step = STEPS[round.min(STEPS.len() - 1)];
        round += 1;
        let next = nelder_mead(&f, &best.x, step, tol, max_iter - used);
        used += next.iterations;
        let improvement = best.value - next.value;
        if improvement > 0.0 {
            best = next;
        }
        if improvement <= tol {
            break;
        }
    }
    best.iterations = used;
    best
}

/// Levenberg–Marquardt on `‖r(x)‖²` with a central-difference Jacobian.
///
/// Stops when an accepted step lowers the objective by at most `tol`, when
/// the objective itself falls below `tol²`, or when the damping grows past
/// any useful size.
pub fn levenberg_marquardt(r: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], tol: f64, max_iter: usize) -> Outcome {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut res = r(&x);
    let mut cost = sum_sq(&res);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = d == 0;

    while !converged && iterations < max_iter {
        iterations += 1;
        if cost <= tol * tol {
            converged = true;
            break;
        }
        let m = res.len();
        let mut jac = DMatrix::<f64>::zeros(m, d);
        for j in 0..d {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let (rp, rm) = (r(&xp), r(&xm));
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let gradient = &jt * DVector::from_column_slice(&res);

        loop {
            let mut damped = normal.clone();
            for j in 0..d {
                damped[(j, j)] += lambda * (1.0 + normal[(j, j)]);
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&gradient)));
            let candidate = step.map(|s| x.iter().zip(s.iter()).map(|(a, b)| a + b).collect::<Vec<f64>>());
            if let Some(candidate) = candidate {
                let cand_res = r(&candidate);
                let cand_cost = sum_sq(&cand_res);
                if cand_cost < cost {
                    let drop = cost - cand_cost;
                    x = candidate;
                    res = cand_res;
                    cost = cand_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    if drop <= tol {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    Outcome { x, value: cost, iterations, converged }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

//! Derivative-free minimisation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadOptions {
    /// Evaluation budget; 0 selects 2000 per parameter.
    pub max_evals: usize,
    /// Relative spread of simplex values at convergence.
    pub ftol: f64,
    /// Largest vertex distance from the best vertex at convergence.
    pub xtol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
    /// Restarts from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 0, ftol: 1e-10, xtol: 1e-7, step: 0.1, restarts: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder-Mead with dimension-adaptive coefficients. Non-finite values
/// are treated as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let budget = if opts.max_evals == 0 { 2000 * n.max(1) } else { opts.max_evals };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return Minimum { x: Vec::new(), value: v, evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let mut best_x = x0.to_vec();
    let mut best_v = eval(x0, &mut evals);
    let mut converged = false;
    for round in 0..=opts.restarts {
        let start_v = best_v;
        let mut pts: Vec<Vec<f64>> = vec![best_x.clone()];
        let mut vals = vec![best_v];
        for i in 0..n {
            let mut p = best_x.clone();
            p[i] += opts.step;
            vals.push(eval(&p, &mut evals));
            pts.push(p);
        }
        converged = false;
        let mut c = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];
        while evals < budget {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = idx.iter().map(|&i| pts[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            let spread = vals[n] - vals[0];
            let size = pts[1..].iter().map(|p| p.iter().zip(&pts[0]).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)).fold(0.0, f64::max);
            if spread <= opts.ftol * (libm::fabs(vals[0]) + opts.ftol) && size <= opts.xtol {
                converged = true;
                break;
            }
            c.iter_mut().for_each(|v| *v = 0.0);
            for p in &pts[..n] {
                for j in 0..n {
                    c[j] += p[j] / nf;
                }
            }
            for j in 0..n {
                trial[j] = c[j] + alpha * (c[j] - pts[n][j]);
            }
            let fr = eval(&trial, &mut evals);
            if fr < vals[0] {
                for j in 0..n {
                    trial2[j] = c[j] + beta * (trial[j] - c[j]);
                }
                let fe = eval(&trial2, &mut evals);
                if fe < fr {
                    pts[n].copy_from_slice(&trial2);
                    vals[n] = fe;
                } else {
                    pts[n].copy_from_slice(&trial);
                    vals[n] = fr;
                }
                continue;
            }
            if fr < vals[n - 1] {
                pts[n].copy_from_slice(&trial);
                vals[n] = fr;
                continue;
            }
            let outside = fr < vals[n];
            for j in 0..n {
                trial2[j] = if outside { c[j] + gamma * (trial[j] - c[j]) } else { c[j] + gamma * (pts[n][j] - c[j]) };
            }
            let fc = eval(&trial2, &mut evals);
            if (outside && fc <= fr) || (!outside && fc < vals[n]) {
                pts[n].copy_from_slice(&trial2);
                vals[n] = fc;
                continue;
            }
            for i in 1..=n {
                for j in 0..n {
                    pts[i][j] = pts[0][j] + delta * (pts[i][j] - pts[0][j]);
                }
                vals[i] = eval(&pts[i], &mut evals);
            }
        }
        let (bi, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if vals[bi] <= best_v {
            best_v = vals[bi];
            best_x = pts[bi].clone();
        }
        if !converged || evals >= budget {
            break;
        }
        if round > 0 && libm::fabs(start_v - best_v) <= opts.ftol * (libm::fabs(best_v) + opts.ftol) {
            break;
        }
    }
    Minimum { x: best_x, value: best_v, evals, converged }
}

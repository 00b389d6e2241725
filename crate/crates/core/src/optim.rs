//! Small derivative-free minimizers used by the parameter fitter.

use nalgebra::{DMatrix, DVector};

/// Outcome of a minimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex search with dimension-adaptive coefficients.
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when every vertex is within this distance (per coordinate) of the best.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evaluations: 2000,
            f_tol: 1e-24,
            x_tol: 1e-12,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `x0` with an axis-aligned initial simplex whose edge
    /// along coordinate i is `steps[i]`. Errors returned by `f` abort the search.
    pub fn minimize<F, E>(&self, mut f: F, x0: &[f64], steps: &[f64]) -> Result<Minimum, E>
    where
        F: FnMut(&[f64]) -> Result<f64, E>,
    {
        let n = x0.len();
        assert_eq!(steps.len(), n);
        let nf = n as f64;
        let (alpha, gamma, rho, sigma) = if n >= 2 {
            (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
        } else {
            (1.0, 2.0, 0.5, 0.5)
        };

        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64, E> {
            *evals += 1;
            f(x)
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0, &mut evals)?;
        simplex.push((x0.to_vec(), v0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += steps[i];
            let v = eval(&x, &mut evals)?;
            simplex.push((x, v));
        }

        let mut converged = false;
        while evals < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let spread = (worst - best).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol && size <= self.x_tol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(alpha);
            let fr = eval(&xr, &mut evals)?;
            if fr < simplex[0].1 {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals)?;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            // contraction, outside or inside
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(alpha * rho);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink toward the best vertex
            let best_x = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best_x.iter().zip(&vertex.0).map(|(b, v)| b + sigma * (v - b)).collect();
                let v = eval(&x, &mut evals)?;
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Ok(Minimum {
            x,
            value,
            evaluations: evals,
            converged,
        })
    }
}

/// Levenberg-Marquardt on a residual vector with a central-difference Jacobian.
#[derive(Debug, Clone)]
pub struct LevenbergMarquardt {
    pub max_iterations: usize,
    /// Relative step for the finite-difference Jacobian.
    pub fd_step: f64,
    /// Stop when the relative decrease of the squared norm falls below this.
    pub rel_tol: f64,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        LevenbergMarquardt {
            max_iterations: 100,
            fd_step: 1e-6,
            rel_tol: 1e-14,
        }
    }
}

impl LevenbergMarquardt {
    /// Minimizes ½‖r(x)‖². `scale[i]` sets the finite-difference step floor
    /// for coordinate i. `value` of the result is the mean squared residual.
    pub fn minimize<F, E>(&self, mut residuals: F, x0: &[f64], scale: &[f64]) -> Result<Minimum, E>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>, E>,
    {
        let n = x0.len();
        let mut evals = 0usize;
        let mut x = x0.to_vec();
        let mut r = residuals(&x)?;
        evals += 1;
        let m = r.len();
        let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let mut cost = sq(&r);
        let mut lambda = 1e-3;
        let mut converged = false;

        for _ in 0..self.max_iterations {
            if !cost.is_finite() || cost == 0.0 {
                converged = cost == 0.0;
                break;
            }
            let mut jac = DMatrix::<f64>::zeros(m, n);
            for j in 0..n {
                let h = self.fd_step * x[j].abs().max(scale[j]);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let rp = residuals(&xp)?;
                let rm = residuals(&xm)?;
                evals += 2;
                for i in 0..m {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let rv = DVector::from_column_slice(&r);
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * rv;

            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for k in 0..n {
                    a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let delta = chol.solve(&(-&jtr));
                let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                let r_trial = residuals(&trial)?;
                evals += 1;
                let c_trial = sq(&r_trial);
                if c_trial.is_finite() && c_trial < cost {
                    let rel = (cost - c_trial) / cost;
                    x = trial;
                    r = r_trial;
                    cost = c_trial;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel < self.rel_tol {
                        converged = true;
                    }
                    break;
                }
                lambda *= 4.0;
            }
            if !improved || converged {
                converged |= !improved;
                break;
            }
        }
        Ok(Minimum {
            x,
            value: cost / m.max(1) as f64,
            evaluations: evals,
            converged,
        })
    }
}

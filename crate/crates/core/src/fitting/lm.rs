use nalgebra::{DMatrix, DVector};

use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when `‖Jᵀr‖∞` falls below this.
    pub gradient_tol: f64,
    /// Stop when the relative parameter step falls below this.
    pub step_tol: f64,
    /// Relative finite-difference step.
    pub diff_step: f64,
    /// Central rather than forward differences.
    pub central: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            gradient_tol: 1e-10,
            step_tol: 1e-12,
            diff_step: 1e-7,
            central: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    /// `(JᵀJ)⁻¹ rss/(m−p)`, or an error when `JᵀJ` is numerically singular.
    pub fn covariance(&self) -> Result<DMatrix<f64>, FitError> {
        let (m, p) = self.jacobian.shape();
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let svd = jtj.clone().svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        if !(max > 0.0) || min <= 1e-13 * max {
            return Err(FitError::Unidentifiable(format!(
                "normal matrix condition {:e}",
                if min > 0.0 { max / min } else { f64::INFINITY }
            )));
        }
        let inv = svd
            .pseudo_inverse(0.0)
            .map_err(|e| FitError::Unidentifiable(e.to_string()))?;
        let dof = m.saturating_sub(p).max(1) as f64;
        Ok(inv * (self.rss / dof))
    }
}

/// Residual vector as a function of the parameters.
pub type Residuals<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>, FitError> + 'a;

fn rss(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(f: &Residuals, x: &[f64], r0: &[f64], opts: &LmOptions) -> Result<DMatrix<f64>, FitError> {
    let m = r0.len();
    let mut j = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let h = opts.diff_step * x[k].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[k] += h;
        let rp = f(&xp)?;
        if opts.central {
            let mut xm = x.to_vec();
            xm[k] -= h;
            let rm = f(&xm)?;
            for i in 0..m {
                j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        } else {
            for i in 0..m {
                j[(i, k)] = (rp[i] - r0[i]) / h;
            }
        }
    }
    Ok(j)
}

/// Minimizes `Σ f(x)_i²` from `x0`.
pub fn levenberg_marquardt(f: &Residuals, x0: &[f64], opts: &LmOptions) -> Result<LmOutcome, FitError> {
    let p = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    if r.len() < p {
        return Err(FitError::InvalidInput(format!(
            "{} residuals for {p} parameters",
            r.len()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::InvalidInput(
            "non-finite residual at the initial guess".into(),
        ));
    }
    let mut cost = rss(&r);
    let mut lambda = 1e-3;
    let mut j = jacobian(f, &x, &r, opts)?;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let rv = DVector::from_column_slice(&r);
        let g = j.transpose() * &rv;
        if g.amax() < opts.gradient_tol || cost == 0.0 {
            converged = true;
            break;
        }
        let jtj = j.transpose() * &j;
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = match f(&xn) {
                Ok(v) if v.iter().all(|e| e.is_finite()) => v,
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cn = rss(&rn);
            if cn <= cost {
                let rel_step = step
                    .iter()
                    .zip(&x)
                    .map(|(s, v)| s.abs() / v.abs().max(1.0))
                    .fold(0.0, f64::max);
                let small_gain = cost - cn <= 1e-15 * cost;
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                j = jacobian(f, &x, &r, opts)?;
                if rel_step < opts.step_tol || (small_gain && rel_step < 1e-8) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !improved {
            // No downhill step at any damping: a stationary point to
            // working precision.
            converged = true;
            break;
        }
    }
    Ok(LmOutcome {
        x,
        residuals: r,
        rss: cost,
        jacobian: j,
        iterations,
        converged,
    })
}

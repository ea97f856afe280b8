//! Adaptive Dormand-Prince 5(4) integration of `dρ/dt = L ρ`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::density::DensityOperator;
use super::generator::Generator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-8,
            atol: 1e-12,
            max_steps: 5_000_000,
        }
    }
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type M = DMatrix<Complex64>;

fn lin(terms: &[(f64, &M)], base: &M, h: f64) -> M {
    let mut out = base.clone();
    for &(c, m) in terms {
        if c != 0.0 {
            out += m * Complex64::new(c * h, 0.0);
        }
    }
    out
}

/// Evolves `rho0` and returns the state at each time in `t_grid` (ns,
/// ascending, starting at or after 0).
pub fn evolve(gen: &Generator, rho0: &DensityOperator, t_grid: &[f64], tol: Tolerance) -> Result<Vec<DensityOperator>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidArgument(
            "time grid must be ascending and non-negative".into(),
        ));
    }
    if rho0.hilbert() != gen.hilbert() {
        return Err(Error::InvalidArgument(
            "initial state and generator use different truncations".into(),
        ));
    }
    let hilbert = gen.hilbert();
    let mut y = rho0.matrix().clone();
    let mut t = 0.0;
    let mut k1 = gen.apply(&y);
    let scale0 = k1.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut h = if scale0 > 0.0 { 0.01 / scale0 } else { 1.0 };
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(t_grid.len());

    for &target in t_grid {
        while t < target {
            if steps >= tol.max_steps {
                return Err(Error::Integration {
                    t_ns: t,
                    reason: format!("step budget of {} exhausted", tol.max_steps),
                });
            }
            let (h_step, last) = if t + h >= target {
                (target - t, true)
            } else {
                (h, false)
            };
            let k2 = gen.apply(&lin(&[(A21, &k1)], &y, h_step));
            let k3 = gen.apply(&lin(&[(A31, &k1), (A32, &k2)], &y, h_step));
            let k4 = gen.apply(&lin(&[(A41, &k1), (A42, &k2), (A43, &k3)], &y, h_step));
            let k5 = gen.apply(&lin(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &y, h_step));
            let k6 = gen.apply(&lin(
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                &y,
                h_step,
            ));
            let y_new = lin(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], &y, h_step);
            let k7 = gen.apply(&y_new);
            let zero = M::zeros(y.nrows(), y.ncols());
            let err = lin(
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
                &zero,
                h_step,
            );
            let mut en = 0.0f64;
            for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
                let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
                en = en.max(e.norm() / sc);
            }
            steps += 1;
            if en <= 1.0 {
                t = if last { target } else { t + h_step };
                y = y_new;
                k1 = k7;
                let fac = if en == 0.0 {
                    5.0
                } else {
                    (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h = h_step * fac;
                }
            } else {
                h = h_step * (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
                if h < 1e-14 * t.max(1.0) {
                    return Err(Error::Integration {
                        t_ns: t,
                        reason: "step size underflow".into(),
                    });
                }
            }
        }
        out.push(DensityOperator::new(hilbert, y.clone())?);
    }
    Ok(out)
}

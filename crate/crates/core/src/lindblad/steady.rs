//! Fixed points of the Lindbladian.

use nalgebra::{DMatrix, DVector};

use super::coords::{RealSuperop, ReducedSuperop};
use super::density::DensityOperator;
use super::generator::Generator;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
const NULL_TOL: f64 = 1e-9;
/// Required `‖L ρ‖` of a returned steady state.
pub const RESIDUAL_TOL: f64 = 1e-10;

fn null_dim(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().singular_values();
    let max = sv.max();
    sv.iter().filter(|s| **s <= NULL_TOL * max).count()
}

/// Solves `A x = 0`, `tr·x = 1` for a matrix with a one-dimensional kernel.
fn solve_kernel(a: &DMatrix<f64>, tr: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let dim = null_dim(a);
    if dim > 1 {
        return Err(Error::DegenerateSteadyState { dim });
    }
    if dim == 0 {
        return Err(Error::Numerical("generator has no stationary state".into()));
    }
    // The rows of A are dependent with weights `tr`, so any row with a
    // non-zero trace weight can be replaced by the normalization.
    let row = (0..n)
        .find(|&i| tr[i] != 0.0)
        .ok_or_else(|| Error::Numerical("no population coordinate".into()))?;
    let mut m = a.clone();
    m.set_row(row, &tr.transpose());
    let mut rhs = DVector::zeros(n);
    rhs[row] = 1.0;
    let lu = m.clone().lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular steady-state system".into()))?;
    // One step of iterative refinement.
    let r = &rhs - &m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let norm = tr.dot(&x);
    Ok(x / norm)
}

fn finish(state: DensityOperator, residual: f64) -> Result<DensityOperator> {
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "steady-state residual {residual:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    state.check()?;
    Ok(state)
}

/// The unique stationary state on the full space.
pub fn steady_state(gen: &Generator) -> Result<DensityOperator> {
    let s = RealSuperop::new(gen);
    let a = s.to_dense();
    let tr = s.coords().trace_functional();
    let x = solve_kernel(&a, &tr)?;
    let rho = DensityOperator::new(gen.hilbert(), s.coords().from_coords(&x))?;
    let residual = gen.apply(rho.matrix()).norm();
    finish(rho, residual)
}

/// The stationary state reached from `rho0`, solved on the coordinates
/// reachable from its support. Unique whenever that subspace has a single
/// fixed point even if the full space does not.
pub fn steady_state_from(gen: &Generator, rho0: &DensityOperator) -> Result<DensityOperator> {
    let s = RealSuperop::new(gen);
    let r = s.restrict_to_states(&[rho0]);
    steady_state_reduced(gen, &r)
}

pub(crate) fn steady_state_reduced(gen: &Generator, r: &ReducedSuperop) -> Result<DensityOperator> {
    let x = solve_kernel(r.matrix(), &r.trace_functional())?;
    let rho = r.density(&x);
    let residual = gen.apply(rho.matrix()).norm();
    finish(rho, residual)
}

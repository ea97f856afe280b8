//! Density operators on the truncated space.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::space::{HilbertConfig, Level, SparseOp};
use crate::error::{Error, Result};

/// Tolerances used by [`DensityOperator::check`].
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    hilbert: HilbertConfig,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(hilbert: HilbertConfig, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != hilbert.dim() || matrix.ncols() != hilbert.dim() {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be {0}x{0}, got {1}x{2}",
                hilbert.dim(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityOperator { hilbert, matrix })
    }

    /// `|level, n⟩⟨level, n|`.
    pub fn pure_basis(hilbert: HilbertConfig, level: Level, n: usize) -> Self {
        let mut m = DMatrix::zeros(hilbert.dim(), hilbert.dim());
        let k = hilbert.index(level, n);
        m[(k, k)] = Complex64::new(1.0, 0.0);
        DensityOperator { hilbert, matrix: m }
    }

    /// `f |a,0⟩⟨a,0| + (1−f) |b,0⟩⟨b,0|`.
    pub fn ground_mixture(hilbert: HilbertConfig, a: Level, b: Level, f: f64) -> Self {
        let mut m = DMatrix::zeros(hilbert.dim(), hilbert.dim());
        m[(hilbert.index(a, 0), hilbert.index(a, 0))] += Complex64::new(f, 0.0);
        m[(hilbert.index(b, 0), hilbert.index(b, 0))] += Complex64::new(1.0 - f, 0.0);
        DensityOperator { hilbert, matrix: m }
    }

    pub fn hilbert(&self) -> HilbertConfig {
        self.hilbert
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity against the module
    /// tolerances.
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        let tr = self.trace();
        let min = self.min_eigenvalue();
        if herm > HERMITIAN_TOL || (tr - 1.0).abs() > TRACE_TOL || min < -POSITIVITY_TOL {
            return Err(Error::Numerical(format!(
                "invalid density operator: hermiticity error {herm:e}, trace {tr}, min eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    pub fn expect(&self, op: &SparseOp) -> Complex64 {
        op.trace_with(&self.matrix)
    }

    pub fn population(&self, level: Level) -> f64 {
        (0..=self.hilbert.n_max)
            .map(|n| {
                let k = self.hilbert.index(level, n);
                self.matrix[(k, k)].re
            })
            .sum()
    }

    pub fn photon_number(&self) -> f64 {
        (0..self.hilbert.dim())
            .map(|k| self.hilbert.photons_of(k) as f64 * self.matrix[(k, k)].re)
            .sum()
    }

    /// Population of the highest retained Fock level.
    pub fn edge_population(&self) -> f64 {
        Level::ALL
            .iter()
            .map(|&l| {
                let k = self.hilbert.index(l, self.hilbert.n_max);
                self.matrix[(k, k)].re
            })
            .sum()
    }
}

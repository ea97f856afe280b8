//! Truncated Hilbert space `|level⟩ ⊗ |n⟩` and sparse operators on it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Emitter level. Numbering follows `|1⟩ = |↑⟩`, `|2⟩ = |↓⟩`, `|3⟩` = trion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    One = 0,
    Two = 1,
    Three = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::One, Level::Two, Level::Three];
}

/// Fock-space cutoff for the cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertConfig {
    pub n_max: usize,
}

impl HilbertConfig {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidArgument(format!("n_max must be >= 1, got {n_max}")));
        }
        Ok(HilbertConfig { n_max })
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        3 * self.fock_dim()
    }

    pub fn index(&self, level: Level, n: usize) -> usize {
        debug_assert!(n <= self.n_max);
        level as usize * self.fock_dim() + n
    }

    pub fn level_of(&self, index: usize) -> Level {
        Level::ALL[index / self.fock_dim()]
    }

    pub fn photons_of(&self, index: usize) -> usize {
        index % self.fock_dim()
    }

    /// Cavity annihilation operator `c`.
    pub fn annihilation(&self) -> SparseOp {
        let mut op = SparseOp::zeros(self.dim());
        for level in Level::ALL {
            for n in 1..=self.n_max {
                op.push(
                    self.index(level, n - 1),
                    self.index(level, n),
                    Complex64::new((n as f64).sqrt(), 0.0),
                );
            }
        }
        op
    }

    /// Transition operator `σ_ij = |i⟩⟨j| ⊗ 1`.
    pub fn sigma(&self, i: Level, j: Level) -> SparseOp {
        let mut op = SparseOp::zeros(self.dim());
        for n in 0..=self.n_max {
            op.push(self.index(i, n), self.index(j, n), Complex64::new(1.0, 0.0));
        }
        op
    }

    /// Photon number `c†c`.
    pub fn number(&self) -> SparseOp {
        let mut op = SparseOp::zeros(self.dim());
        for level in Level::ALL {
            for n in 1..=self.n_max {
                let k = self.index(level, n);
                op.push(k, k, Complex64::new(n as f64, 0.0));
            }
        }
        op
    }

    pub fn identity(&self) -> SparseOp {
        let mut op = SparseOp::zeros(self.dim());
        for k in 0..self.dim() {
            op.push(k, k, Complex64::new(1.0, 0.0));
        }
        op
    }
}

/// Sparse square operator stored as `(row, col, value)` triplets, kept
/// merged and sorted by `(col, row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        SparseOp {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    fn push(&mut self, row: usize, col: usize, v: Complex64) {
        self.entries.push((row, col, v));
        self.normalize();
    }

    fn normalize(&mut self) {
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != Complex64::new(0.0, 0.0));
        self.entries = merged;
    }

    fn from_entries(dim: usize, entries: Vec<(usize, usize, Complex64)>) -> Self {
        let mut op = SparseOp { dim, entries };
        op.normalize();
        op
    }

    pub fn scale(&self, s: Complex64) -> SparseOp {
        SparseOp::from_entries(self.dim, self.entries.iter().map(|&(r, c, v)| (r, c, v * s)).collect())
    }

    pub fn scale_re(&self, s: f64) -> SparseOp {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let mut e = self.entries.clone();
        e.extend_from_slice(&other.entries);
        SparseOp::from_entries(self.dim, e)
    }

    pub fn sub(&self, other: &SparseOp) -> SparseOp {
        self.add(&other.scale_re(-1.0))
    }

    pub fn adjoint(&self) -> SparseOp {
        SparseOp::from_entries(
            self.dim,
            self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    /// Product `self · other`.
    pub fn mul(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.dim, other.dim);
        let mut by_row: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.entries {
            by_row[r].push((c, v));
        }
        let mut out = Vec::new();
        for &(r, k, a) in &self.entries {
            for &(c, b) in &by_row[k] {
                out.push((r, c, a * b));
            }
        }
        SparseOp::from_entries(self.dim, out)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Entries grouped by column: `cols[j]` lists `(row, value)`.
    pub fn columns(&self) -> Vec<Vec<(usize, Complex64)>> {
        let mut cols = vec![Vec::new(); self.dim];
        for &(r, c, v) in &self.entries {
            cols[c].push((r, v));
        }
        cols
    }

    /// `self · m` for dense `m`.
    pub fn mul_dense(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, m.ncols());
        for &(r, k, v) in &self.entries {
            for j in 0..m.ncols() {
                out[(r, j)] += v * m[(k, j)];
            }
        }
        out
    }

    /// `m · self` for dense `m`.
    pub fn dense_mul(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(m.nrows(), self.dim);
        for &(k, c, v) in &self.entries {
            for i in 0..m.nrows() {
                out[(i, c)] += m[(i, k)] * v;
            }
        }
        out
    }

    /// `Tr(self · m)`.
    pub fn trace_with(&self, m: &DMatrix<Complex64>) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| v * m[(c, r)]).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.to_dense();
        (&d - d.adjoint()).iter().all(|z| z.norm() <= tol)
    }
}

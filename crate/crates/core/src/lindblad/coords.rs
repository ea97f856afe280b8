//! Real coordinates for Hermitian operators and the real superoperator.
//!
//! A Hermitian `d×d` matrix maps to `d²` real numbers. Coordinate
//! `k = j·d + i` holds `ρ_ii` when `i = j`, `Re ρ_ij` when `i < j` and
//! `Im ρ_ji` when `i > j`. The Lindbladian maps Hermitian matrices to Hermitian
//! matrices, so in these coordinates it is a real `d²×d²` matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::density::DensityOperator;
use super::generator::Generator;
use super::space::{HilbertConfig, SparseOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealCoords {
    d: usize,
}

impl RealCoords {
    pub fn new(d: usize) -> Self {
        RealCoords { d }
    }

    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.d + i
    }

    /// Basis matrix `E_k` with `ρ = Σ_k x_k E_k`.
    pub fn basis(&self, k: usize) -> DMatrix<Complex64> {
        let (i, j) = (k % self.d, k / self.d);
        let mut m = DMatrix::zeros(self.d, self.d);
        if i == j {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        } else if i < j {
            m[(i, j)] = Complex64::new(1.0, 0.0);
            m[(j, i)] = Complex64::new(1.0, 0.0);
        } else {
            m[(j, i)] = Complex64::new(0.0, 1.0);
            m[(i, j)] = Complex64::new(0.0, -1.0);
        }
        m
    }

    /// Coordinates of a Hermitian matrix (only the upper triangle is read).
    pub fn to_coords(&self, m: &DMatrix<Complex64>) -> DVector<f64> {
        let d = self.d;
        let mut x = DVector::zeros(d * d);
        for j in 0..d {
            for i in 0..=j {
                let v = m[(i, j)];
                if i == j {
                    x[self.index(i, i)] = v.re;
                } else {
                    x[self.index(i, j)] = v.re;
                    x[self.index(j, i)] = v.im;
                }
            }
        }
        x
    }

    pub fn from_coords(&self, x: &DVector<f64>) -> DMatrix<Complex64> {
        let d = self.d;
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            m[(j, j)] = Complex64::new(x[self.index(j, j)], 0.0);
            for i in 0..j {
                let v = Complex64::new(x[self.index(i, j)], x[self.index(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    /// `f` with `Tr(O ρ) = Σ_k f_k x_k`.
    pub fn functional(&self, op: &SparseOp) -> Vec<Complex64> {
        let mut f = vec![Complex64::new(0.0, 0.0); self.len()];
        let i_unit = Complex64::new(0.0, 1.0);
        // Tr(O |a⟩⟨b|) = O_ba
        for &(r, c, v) in op.entries() {
            // entry O_rc contributes through |c⟩⟨r| terms of E_k.
            let (a, b) = (c, r);
            if a == b {
                f[self.index(a, a)] += v;
            } else {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                f[self.index(lo, hi)] += v;
                // E_im = i|lo⟩⟨hi| − i|hi⟩⟨lo|
                if a == lo {
                    f[self.index(hi, lo)] += i_unit * v;
                } else {
                    f[self.index(hi, lo)] -= i_unit * v;
                }
            }
        }
        f
    }

    /// Real part of [`Self::functional`] for Hermitian `op`.
    pub fn real_functional(&self, op: &SparseOp) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.functional(op).into_iter().map(|z| z.re))
    }

    /// The trace functional.
    pub fn trace_functional(&self) -> DVector<f64> {
        let mut f = DVector::zeros(self.len());
        for i in 0..self.d {
            f[self.index(i, i)] = 1.0;
        }
        f
    }
}

/// The Lindbladian in real coordinates, stored by column.
#[derive(Debug, Clone)]
pub struct RealSuperop {
    coords: RealCoords,
    hilbert: HilbertConfig,
    columns: Vec<Vec<(usize, f64)>>,
}

impl RealSuperop {
    pub fn new(gen: &Generator) -> Self {
        let coords = RealCoords::new(gen.dim());
        let columns = (0..coords.len())
            .map(|k| {
                let img = coords.to_coords(&gen.apply(&coords.basis(k)));
                img.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(r, v)| (r, *v))
                    .collect()
            })
            .collect();
        RealSuperop {
            coords,
            hilbert: gen.hilbert(),
            columns,
        }
    }

    pub fn coords(&self) -> RealCoords {
        self.coords
    }

    pub fn hilbert(&self) -> HilbertConfig {
        self.hilbert
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.coords.len();
        let mut m = DMatrix::zeros(n, n);
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Coordinates reachable from `seeds` under repeated application.
    pub fn reachable(&self, seeds: &[usize]) -> Vec<usize> {
        let n = self.coords.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(k) = stack.pop() {
            for &(r, _) in &self.columns[k] {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        (0..n).filter(|&k| seen[k]).collect()
    }

    /// Restriction to an invariant subset of coordinates.
    pub fn restrict(&self, subset: &[usize]) -> ReducedSuperop {
        let n = self.coords.len();
        let mut pos = vec![usize::MAX; n];
        for (p, &k) in subset.iter().enumerate() {
            pos[k] = p;
        }
        let m = subset.len();
        let mut a = DMatrix::zeros(m, m);
        for (c, &k) in subset.iter().enumerate() {
            for &(r, v) in &self.columns[k] {
                debug_assert!(pos[r] != usize::MAX, "subset is not invariant");
                a[(pos[r], c)] = v;
            }
        }
        ReducedSuperop {
            coords: self.coords,
            hilbert: self.hilbert,
            subset: subset.to_vec(),
            matrix: a,
        }
    }

    /// Restriction to the coordinates reachable from the supports of `states`.
    pub fn restrict_to_states(&self, states: &[&DensityOperator]) -> ReducedSuperop {
        let mut seeds = Vec::new();
        for s in states {
            let x = self.coords.to_coords(s.matrix());
            seeds.extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, _)| k));
        }
        self.restrict(&self.reachable(&seeds))
    }
}

/// The real superoperator restricted to an invariant coordinate subset.
#[derive(Debug, Clone)]
pub struct ReducedSuperop {
    coords: RealCoords,
    hilbert: HilbertConfig,
    subset: Vec<usize>,
    matrix: DMatrix<f64>,
}

impl ReducedSuperop {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.subset.len()
    }

    pub fn hilbert(&self) -> HilbertConfig {
        self.hilbert
    }

    pub fn project(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.subset.len(), self.subset.iter().map(|&k| full[k]))
    }

    pub fn embed(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.coords.len());
        for (p, &k) in self.subset.iter().enumerate() {
            full[k] = x[p];
        }
        full
    }

    pub fn state(&self, rho: &DensityOperator) -> DVector<f64> {
        self.project(&self.coords.to_coords(rho.matrix()))
    }

    pub fn density(&self, x: &DVector<f64>) -> DensityOperator {
        DensityOperator::new(self.hilbert, self.coords.from_coords(&self.embed(x))).expect("dimensions match")
    }

    pub fn real_functional(&self, op: &SparseOp) -> DVector<f64> {
        self.project(&self.coords.real_functional(op))
    }

    pub fn functional(&self, op: &SparseOp) -> Vec<Complex64> {
        let f = self.coords.functional(op);
        self.subset.iter().map(|&k| f[k]).collect()
    }

    pub fn trace_functional(&self) -> DVector<f64> {
        self.project(&self.coords.trace_functional())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::generator::{build_generator, DriveSpec};
    use crate::lindblad::propagator::expm;
    use crate::lindblad::space::Level;
    use crate::params::SystemParams;

    fn hermitian(d: usize) -> DMatrix<Complex64> {
        let m = DMatrix::from_fn(d, d, |i, j| {
            Complex64::new((i + 2 * j) as f64 * 0.1, (3 * i + j) as f64 * 0.07 - 0.5)
        });
        &m + m.adjoint()
    }

    #[test]
    fn coordinates_round_trip() {
        let c = RealCoords::new(5);
        let m = hermitian(5);
        let x = c.to_coords(&m);
        assert!((c.from_coords(&x) - &m).norm() < 1e-14);
        // ρ = Σ x_k E_k
        let mut s = DMatrix::zeros(5, 5);
        for k in 0..c.len() {
            s += c.basis(k) * Complex64::new(x[k], 0.0);
        }
        assert!((s - m).norm() < 1e-14);
    }

    #[test]
    fn functionals_match_traces() {
        let h = HilbertConfig::new(2).unwrap();
        let c = RealCoords::new(h.dim());
        let m = hermitian(h.dim());
        let x = c.to_coords(&m);
        let op = h.annihilation().add(&h.sigma(Level::One, Level::Three));
        let f = c.functional(&op);
        let via: Complex64 = f.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        assert!((via - op.trace_with(&m)).norm() < 1e-12);
    }

    #[test]
    fn superop_matches_generator() {
        let h = HilbertConfig::new(2).unwrap();
        let gen = build_generator(&SystemParams::reference_device(), &DriveSpec::from_epsilon(2.0), h).unwrap();
        let s = RealSuperop::new(&gen);
        let m = hermitian(h.dim());
        let x = s.coords().to_coords(&m);
        let y = s.to_dense() * &x;
        let direct = s.coords().to_coords(&gen.apply(&m));
        assert!((y - direct).norm() < 1e-9);
        // Trace preservation: column sums over diagonal coordinates vanish.
        let tr = s.coords().trace_functional();
        let cs = s.to_dense().transpose() * tr;
        assert!(cs.amax() < 1e-10);
    }

    #[test]
    fn spin_down_coherences_are_unreachable() {
        let h = HilbertConfig::new(3).unwrap();
        let gen = build_generator(&SystemParams::reference_device(), &DriveSpec::from_epsilon(3.0), h).unwrap();
        let s = RealSuperop::new(&gen);
        let up = DensityOperator::pure_basis(h, Level::One, 0);
        let r = s.restrict_to_states(&[&up]);
        // At most the blocks {1,3}⊗Fock and {2}⊗Fock: (8² + 4²) coordinates.
        assert!(r.dim() <= 64 + 16, "{}", r.dim());
        let x = r.state(&up);
        assert!((r.density(&x).matrix() - up.matrix()).norm() == 0.0);
        // Reduced and full dynamics agree.
        let full = expm(&s.to_dense(), 0.05) * s.coords().to_coords(up.matrix());
        let reduced = r.embed(&(expm(r.matrix(), 0.05) * x));
        assert!((full - reduced).amax() < 1e-12);
    }
}

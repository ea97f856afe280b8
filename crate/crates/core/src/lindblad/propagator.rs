//! Matrix exponential and its time integral for the reduced superoperator.

use nalgebra::DMatrix;

/// Step propagators over an interval `h`.
#[derive(Debug, Clone)]
pub struct StepPropagator {
    pub h: f64,
    /// `e^{Ah}`.
    pub exp: DMatrix<f64>,
    /// `∫₀ʰ e^{As} ds`.
    pub integral: DMatrix<f64>,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(e^{Ah}, ∫₀ʰ e^{As} ds)` by scaling and squaring a Taylor series.
///
/// The doubling step uses `Q(2t) = Q(t) + e^{At} Q(t)`.
pub fn exp_and_integral(a: &DMatrix<f64>, h: f64) -> StepPropagator {
    let n = a.nrows();
    let ah = a * h;
    let nrm = norm1(&ah);
    let squarings = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let b = &ah * scale;
    let hs = h * scale;

    let eye = DMatrix::<f64>::identity(n, n);
    let mut p = eye.clone();
    let mut phi = eye.clone();
    let mut term = eye;
    // term_k = B^k / k!; phi accumulates B^k/(k+1)!
    for k in 1..40 {
        term = &term * &b / k as f64;
        p += &term;
        let contrib = &term / (k + 1) as f64;
        phi += &contrib;
        if norm1(&term) <= 1e-18 * norm1(&p) {
            break;
        }
    }
    let mut q = phi * hs;
    for _ in 0..squarings {
        q = &q + &p * &q;
        p = &p * &p;
    }
    StepPropagator { h, exp: p, integral: q }
}

/// `e^{At}` alone.
pub fn expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    exp_and_integral(a, t).exp
}

//! Hamiltonian and collapse operators of the driven cavity + three-level
//! emitter, and the resulting Lindblad generator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{HilbertConfig, Level, SparseOp};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::units::{ghz_to_rad_per_ns, photon_flux_per_ns};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coherent probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Incident power before the objective (nW).
    pub power_nw: f64,
    /// In-coupled amplitude `√(β′P/ħω)` in √(photons/ns).
    pub epsilon: f64,
    /// Probe frequency offset from the configured operating point (GHz);
    /// both `Δ_c` and `Δ_x` are reduced by it.
    pub probe_detuning: f64,
}

impl DriveSpec {
    pub fn from_power(power_nw: f64, beta_prime: f64, wavelength_nm: f64) -> Self {
        DriveSpec {
            power_nw,
            epsilon: (beta_prime * photon_flux_per_ns(power_nw, wavelength_nm)).sqrt(),
            probe_detuning: 0.0,
        }
    }

    /// A drive specified directly by its amplitude; `power_nw` is left at 0.
    pub fn from_epsilon(epsilon: f64) -> Self {
        DriveSpec {
            power_nw: 0.0,
            epsilon,
            probe_detuning: 0.0,
        }
    }

    pub fn off() -> Self {
        Self::from_epsilon(0.0)
    }

    /// In-coupled photon flux `ε²` (photons/ns).
    pub fn photon_flux(&self) -> f64 {
        self.epsilon * self.epsilon
    }
}

/// Extra dissipation beyond the optical model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Relaxation {
    /// Intrinsic spin relaxation time; the rate `1/T1` is split evenly
    /// between `↑→↓` and `↓→↑`.
    pub t1_ns: Option<f64>,
    /// Route the cross decay back into `|1⟩` (`Γ → Γ+γ`, `γ → 0`). Coherence
    /// decay is unchanged; the spin-up manifold becomes closed.
    pub close_up_manifold: bool,
}

/// `L ρ = −i[H, ρ] + Σ_k (J_k ρ J_k† − ½{J_k†J_k, ρ})` with rates folded into
/// the jump operators. Times in ns, rates in rad/ns.
#[derive(Debug, Clone)]
pub struct Generator {
    hilbert: HilbertConfig,
    hamiltonian: SparseOp,
    jumps: Vec<SparseOp>,
    jumps_adj: Vec<SparseOp>,
    h_eff: SparseOp,
    h_eff_adj: SparseOp,
    kappa_ex: f64,
    kappa: f64,
    epsilon: f64,
}

pub fn build_generator(p: &SystemParams, drive: &DriveSpec, h: HilbertConfig) -> Result<Generator> {
    build_generator_with(p, drive, h, Relaxation::default())
}

pub fn build_generator_with(
    p: &SystemParams,
    drive: &DriveSpec,
    h: HilbertConfig,
    relax: Relaxation,
) -> Result<Generator> {
    HilbertConfig::new(h.n_max)?;
    if !(drive.epsilon.is_finite() && drive.epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "drive amplitude must be finite and >= 0, got {}",
            drive.epsilon
        )));
    }
    if let Some(t1) = relax.t1_ns {
        if !(t1 > 0.0) {
            return Err(Error::InvalidArgument(format!("T1 must be > 0, got {t1}")));
        }
    }
    let w = p.angular();
    let delta_c = ghz_to_rad_per_ns(p.delta_c - drive.probe_detuning);
    let delta_x = ghz_to_rad_per_ns(p.delta_x - drive.probe_detuning);

    let c = h.annihilation();
    let cd = c.adjoint();
    let s13 = h.sigma(Level::One, Level::Three);
    let s23 = h.sigma(Level::Two, Level::Three);
    let s31 = h.sigma(Level::Three, Level::One);
    let s33 = h.sigma(Level::Three, Level::Three);

    let drive_amp = (0.5 * w.kappa_ex).sqrt() * drive.epsilon;
    let hamiltonian = h
        .number()
        .scale_re(delta_c)
        .add(&s33.scale_re(delta_x))
        .add(&c.mul(&s31).sub(&s13.mul(&cd)).scale(I * w.g))
        .add(&cd.sub(&c).scale(I * drive_amp));

    let (gamma_up, gamma_down) = if relax.close_up_manifold {
        (w.gamma_rad + w.gamma_cross, 0.0)
    } else {
        (w.gamma_rad, w.gamma_cross)
    };
    let mut jumps = vec![
        c.scale_re(w.kappa.sqrt()),
        s13.scale_re(gamma_up.sqrt()),
        s23.scale_re(gamma_down.sqrt()),
        s33.scale_re((2.0 * w.gamma_dephasing).sqrt()),
    ];
    if let Some(t1) = relax.t1_ns {
        let k = (0.5 / t1).sqrt();
        jumps.push(h.sigma(Level::Two, Level::One).scale_re(k));
        jumps.push(h.sigma(Level::One, Level::Two).scale_re(k));
    }
    jumps.retain(|j| !j.entries().is_empty());

    let mut decay = SparseOp::zeros(h.dim());
    for j in &jumps {
        decay = decay.add(&j.adjoint().mul(j));
    }
    let h_eff = hamiltonian.sub(&decay.scale(0.5 * I));
    let h_eff_adj = h_eff.adjoint();
    let jumps_adj = jumps.iter().map(SparseOp::adjoint).collect();
    Ok(Generator {
        hilbert: h,
        hamiltonian,
        jumps,
        jumps_adj,
        h_eff,
        h_eff_adj,
        kappa_ex: w.kappa_ex,
        kappa: w.kappa,
        epsilon: drive.epsilon,
    })
}

impl Generator {
    pub fn hilbert(&self) -> HilbertConfig {
        self.hilbert
    }

    pub fn dim(&self) -> usize {
        self.hilbert.dim()
    }

    pub fn hamiltonian(&self) -> &SparseOp {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[SparseOp] {
        &self.jumps
    }

    /// `κ_ex` in rad/ns.
    pub fn kappa_ex(&self) -> f64 {
        self.kappa_ex
    }

    /// `κ` in rad/ns.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `dρ/dt` for a dense `ρ`.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let a = self.h_eff.mul_dense(rho);
        let b = self.h_eff_adj.dense_mul(rho);
        let mut out = (b - a) * I;
        for (j, jd) in self.jumps.iter().zip(&self.jumps_adj) {
            out += jd.dense_mul(&j.mul_dense(rho));
        }
        out
    }
}

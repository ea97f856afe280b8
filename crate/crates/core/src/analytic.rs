//! Closed-form input-output theory for the cavity-coupled spin.
//!
//! Conventions: detunings are `ω_{c,x} − ω` in a frame rotating at the probe
//! frequency, field amplitudes follow `e^{−iωt}`. All functions are
//! dimensionally homogeneous, so rates may be passed in GHz or rad/ns as long
//! as they are consistent.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::params::{Budget, DerivedParams, Spin, SystemParams};

/// Detection polarization `cos θ |H⟩ + e^{iφ} sin θ |V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationBasis {
    pub theta: f64,
    pub phi: f64,
}

impl PolarizationBasis {
    /// Plain `H` detection.
    pub const H: PolarizationBasis = PolarizationBasis { theta: 0.0, phi: 0.0 };

    /// Wraps angles into `θ ∈ (−π/2, π/2]`, `φ ∈ [0, 2π)`. A shift of θ by π
    /// only flips the overall sign of the projected field.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t > FRAC_PI_2 {
            t -= PI;
        }
        PolarizationBasis {
            theta: t,
            phi: phi.rem_euclid(2.0 * PI),
        }
    }
}

/// Output/input field ratios for an `H`-polarized probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferAmplitudes {
    pub t_h: Complex64,
    pub t_v: Complex64,
}

impl TransferAmplitudes {
    pub fn total_power(&self) -> f64 {
        self.t_h.norm_sqr() + self.t_v.norm_sqr()
    }
}

/// Resonant reflection coefficient `r↑ = 1 − 2α/(C+1)` or `r↓ = 1 − 2α`.
pub fn resonant_reflection(spin: Spin, d: &DerivedParams, alpha: f64) -> f64 {
    match spin {
        Spin::Up => 1.0 - 2.0 * alpha / (d.cooperativity + 1.0),
        Spin::Down => 1.0 - 2.0 * alpha,
    }
}

/// Intracavity response `√(κ_ex/2)⟨c⟩/a_in` for the cavity detuned by
/// `delta_c` and, when coupled, the emitter detuned by `delta_x` with dipole
/// half-width `gamma_dipole`.
fn cavity_response(kappa: f64, kappa_ex: f64, delta_c: f64, coupling: Option<(f64, f64, f64)>) -> Complex64 {
    let mut den = Complex64::new(0.5 * kappa, delta_c);
    if let Some((g, delta_x, gamma_dipole)) = coupling {
        if g != 0.0 {
            den += g * g / Complex64::new(gamma_dipole, delta_x);
        }
    }
    Complex64::new(0.5 * kappa_ex, 0.0) / den
}

/// Transfer amplitudes at cavity-probe detuning `delta_probe` (GHz).
///
/// The emitter detuning follows the probe: `Δ_x = delta_probe + (δ_x − δ_c)`
/// with `δ_x, δ_c` taken from `p`, so `delta_probe = p.delta_c` reproduces the
/// configured operating point. The coupled response uses the dipole
/// half-width `Γ_d` (dephasing included).
pub fn transfer_amplitudes(delta_probe: f64, coupled: bool, p: &SystemParams) -> TransferAmplitudes {
    transfer_amplitudes_with(delta_probe, coupled, p, true)
}

/// As [`transfer_amplitudes`], selecting the dipole half-width: `Γ_d` when
/// `include_dephasing`, else `(Γ+γ)/2`.
pub fn transfer_amplitudes_with(
    delta_probe: f64,
    coupled: bool,
    p: &SystemParams,
    include_dephasing: bool,
) -> TransferAmplitudes {
    let gd = dipole_width(p, include_dephasing);
    let delta_x = delta_probe + (p.delta_x - p.delta_c);
    let coupling = coupled.then_some((p.g, delta_x, gd));
    let x = cavity_response(p.kappa, p.kappa_ex(), delta_probe, coupling);
    TransferAmplitudes {
        t_h: Complex64::new(1.0, 0.0) - x,
        t_v: -x,
    }
}

fn dipole_width(p: &SystemParams, include_dephasing: bool) -> f64 {
    if include_dephasing {
        p.gamma_dipole()
    } else {
        0.5 * (p.gamma_rad + p.gamma_cross)
    }
}

/// Detection angle that cancels the mode-mismatched surface reflection:
/// `θ = arctan(−(S + B)/(S − B))` with `S = √((1−β)(1−β′))`, `B = √(ββ′)`.
/// Returns `π/2` when `S = B` (the limit of the arctangent).
pub fn optimal_polarizer_angle(beta: f64, beta_prime: f64) -> f64 {
    let s = ((1.0 - beta) * (1.0 - beta_prime)).sqrt();
    let b = (beta * beta_prime).sqrt();
    let den = s - b;
    if den == 0.0 {
        FRAC_PI_2
    } else {
        (-(s + b) / den).atan()
    }
}

/// Collection probability `¼β|1+r|²` for a cavity-coupled photon.
pub fn collection_probability(r: Complex64, beta: f64) -> f64 {
    0.25 * beta * (Complex64::new(1.0, 0.0) + r).norm_sqr()
}

/// Collection probability from the excitation fiber through a polarizer at
/// angle `theta`, including the directly reflected mode-mismatched light.
pub fn polarizer_collection_probability(r: Complex64, beta: f64, beta_prime: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let matched = (0.5 * beta * beta_prime).sqrt() * (c + r * s);
    let mismatched = (0.5 * (1.0 - beta) * (1.0 - beta_prime)).sqrt() * (c + s);
    (matched + mismatched).norm_sqr()
}

/// `½ββ′ sin²θ |1+r|²`, the value of [`polarizer_collection_probability`] at
/// `θ = optimal_polarizer_angle(β, β′)`.
pub fn optimal_collection_probability(r: Complex64, beta: f64, beta_prime: f64) -> f64 {
    let s = optimal_polarizer_angle(beta, beta_prime).sin();
    0.5 * beta * beta_prime * s * s * (Complex64::new(1.0, 0.0) + r).norm_sqr()
}

/// Basis nulling the bare-cavity reflection at detuning `delta`:
/// `θ = arctan(2Δ/κ)`, `φ = π/2`.
pub fn detuned_basis(delta: f64, kappa: f64) -> PolarizationBasis {
    PolarizationBasis {
        theta: (2.0 * delta / kappa).atan(),
        phi: FRAC_PI_2,
    }
}

/// Output field in `basis`: `t_h cos θ + t_v e^{iφ} sin θ`.
pub fn project_output(basis: PolarizationBasis, t: TransferAmplitudes) -> Complex64 {
    let (s, c) = basis.theta.sin_cos();
    t.t_h * c + t.t_v * Complex64::from_polar(1.0, basis.phi) * s
}

/// Single-photon reflection and spin-flip probabilities at resonance.
///
/// `P_ref = g⁴/(κD/2 + g²)²`, `P_flip = g²κγ/2/(κD/2 + g²)²` with
/// `D = Γ_d` when `include_dephasing`, else `(Γ+γ)/2`.
pub fn single_photon_probabilities(p: &SystemParams, include_dephasing: bool) -> (f64, f64) {
    let d = dipole_width(p, include_dephasing);
    let g2 = p.g * p.g;
    let den = 0.5 * p.kappa * d + g2;
    if g2 == 0.0 {
        return (0.0, 0.0);
    }
    let den2 = den * den;
    (g2 * g2 / den2, 0.5 * g2 * p.kappa * p.gamma_cross / den2)
}

/// Reflected photons before a spin flip, `N = 2g²/(κγ)`.
pub fn photons_before_flip(p: &SystemParams) -> Budget {
    let num = 2.0 * p.g * p.g;
    let den = p.kappa * p.gamma_cross;
    if den > 0.0 {
        Budget::Finite(num / den)
    } else if num == 0.0 {
        Budget::Finite(0.0)
    } else {
        Budget::Unbounded
    }
}

/// Bare-emitter photon budget `N′ = (1 − R_B)/R_B`.
pub fn bare_dot_photon_budget(r_b: f64) -> Budget {
    if r_b > 0.0 {
        Budget::Finite((1.0 - r_b) / r_b)
    } else {
        Budget::Unbounded
    }
}

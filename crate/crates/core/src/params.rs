//! Device rates, derived figures of merit and the detection chain.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::units::ghz_to_rad_per_ns;

/// Electron spin ground state. `Up` is the state whose optical transition is
/// coupled to the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spin::Up => f.write_str("up"),
            Spin::Down => f.write_str("down"),
        }
    }
}

/// A photon budget that may be unbounded (e.g. a vanishing spin-flip rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Budget {
    Finite(f64),
    Unbounded,
}

impl Budget {
    fn from_ratio(num: f64, den: f64) -> Budget {
        if den > 0.0 {
            Budget::Finite(num / den)
        } else if num == 0.0 {
            Budget::Finite(0.0)
        } else {
            Budget::Unbounded
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Budget::Finite(v) => Some(v),
            Budget::Unbounded => None,
        }
    }

    /// The budget as a float, with `Unbounded` mapped to `+inf`.
    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// Physical rates of the coupled cavity-emitter system.
///
/// All rates are linear frequencies in GHz (the value of `x/2π`); the
/// wavelength is in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Emitter-cavity coupling `g/2π`.
    pub g: f64,
    /// Cavity energy decay rate `κ/2π`.
    pub kappa: f64,
    /// Interference contrast `κ_ex/κ`.
    pub alpha: f64,
    /// Radiative decay of the trion into the spin-up ground state, `Γ/2π`.
    pub gamma_rad: f64,
    /// Cross decay of the trion into the spin-down ground state, `γ/2π`.
    pub gamma_cross: f64,
    /// Pure dephasing of the trion, `γ_d/2π`.
    pub gamma_dephasing: f64,
    /// Cavity-probe detuning `Δ_c = ω_c - ω`.
    pub delta_c: f64,
    /// Transition-probe detuning `Δ_x = ω_x - ω`.
    pub delta_x: f64,
    pub wavelength_nm: f64,
}

impl SystemParams {
    /// Device values extracted from the reflection spectrum and pumping fits.
    pub fn reference_device() -> Self {
        SystemParams {
            g: 10.2,
            kappa: 33.5,
            alpha: 0.92,
            gamma_rad: 0.1,
            gamma_cross: 0.075,
            gamma_dephasing: 4.1125,
            delta_c: 0.0,
            delta_x: 0.0,
            wavelength_nm: 928.0,
        }
    }

    /// Dipole decay rate `Γ_d = (Γ+γ)/2 + γ_d` in GHz.
    pub fn gamma_dipole(&self) -> f64 {
        0.5 * (self.gamma_rad + self.gamma_cross) + self.gamma_dephasing
    }

    pub fn kappa_ex(&self) -> f64 {
        self.alpha * self.kappa
    }

    /// Same system with the cross decay chosen to produce branching ratio
    /// `r_b` at fixed `Γ`.
    pub fn with_branching_ratio(&self, r_b: f64) -> Self {
        SystemParams {
            gamma_cross: self.gamma_rad * r_b / (1.0 - r_b),
            ..*self
        }
    }

    /// Rates converted to angular units (rad/ns).
    pub fn angular(&self) -> AngularRates {
        AngularRates {
            g: ghz_to_rad_per_ns(self.g),
            kappa: ghz_to_rad_per_ns(self.kappa),
            kappa_ex: ghz_to_rad_per_ns(self.kappa_ex()),
            gamma_rad: ghz_to_rad_per_ns(self.gamma_rad),
            gamma_cross: ghz_to_rad_per_ns(self.gamma_cross),
            gamma_dephasing: ghz_to_rad_per_ns(self.gamma_dephasing),
            delta_c: ghz_to_rad_per_ns(self.delta_c),
            delta_x: ghz_to_rad_per_ns(self.delta_x),
        }
    }
}

/// [`SystemParams`] rates in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularRates {
    pub g: f64,
    pub kappa: f64,
    pub kappa_ex: f64,
    pub gamma_rad: f64,
    pub gamma_cross: f64,
    pub gamma_dephasing: f64,
    pub delta_c: f64,
    pub delta_x: f64,
}

impl AngularRates {
    pub fn gamma_dipole(&self) -> f64 {
        0.5 * (self.gamma_rad + self.gamma_cross) + self.gamma_dephasing
    }
}

/// Figures of merit derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// `Γ_d` in GHz.
    pub gamma_dipole: f64,
    /// `κ_ex = ακ` in GHz.
    pub kappa_ex: f64,
    /// Cooperativity `C = 2g²/(κ Γ_d)`.
    pub cooperativity: f64,
    /// Branching ratio `γ/(Γ+γ)`; zero when the trion does not decay.
    pub branching_ratio: f64,
    /// Cavity-modified lifetime `1/(2π · 4g²/κ)` in ns.
    pub tau_mod_ns: f64,
    /// Reflected photons before a spin flip, `2g²/(κγ)`.
    pub photon_budget: Budget,
    /// Bare-dot photon budget `Γ/γ`.
    pub bare_budget: Budget,
}

impl DerivedParams {
    /// `N/N'`, the cavity enhancement of the photon budget.
    pub fn enhancement(&self) -> Budget {
        match (self.photon_budget, self.bare_budget) {
            (Budget::Finite(n), Budget::Finite(np)) if np > 0.0 => Budget::Finite(n / np),
            (Budget::Finite(n), Budget::Finite(_)) => Budget::from_ratio(n, 0.0),
            _ => Budget::Unbounded,
        }
    }
}

pub fn derive_quantities(p: &SystemParams) -> DerivedParams {
    let gamma_dipole = p.gamma_dipole();
    let g2 = p.g * p.g;
    let cooperativity = if g2 == 0.0 {
        0.0
    } else {
        2.0 * g2 / (p.kappa * gamma_dipole)
    };
    let total = p.gamma_rad + p.gamma_cross;
    let branching_ratio = if total > 0.0 { p.gamma_cross / total } else { 0.0 };
    let tau_mod_ns = if g2 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / ghz_to_rad_per_ns(4.0 * g2 / p.kappa)
    };
    DerivedParams {
        gamma_dipole,
        kappa_ex: p.kappa_ex(),
        cooperativity,
        branching_ratio,
        tau_mod_ns,
        photon_budget: Budget::from_ratio(2.0 * g2, p.kappa * p.gamma_cross),
        bare_budget: Budget::from_ratio(p.gamma_rad, p.gamma_cross),
    }
}

/// Optical and electronic efficiency budget plus detector imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// Cavity to collection-fiber mode overlap.
    pub beta: f64,
    /// Excitation fiber to cavity in-coupling.
    pub beta_prime: f64,
    /// Optical throughput after the collection fiber.
    pub eta_optics: f64,
    /// Detector quantum efficiency.
    pub eta_det: f64,
    pub dead_time_ns: f64,
    pub dark_rate_hz: f64,
    pub afterpulse_prob: f64,
    /// Residual bare-cavity leakage through the analyzer, as a fraction of
    /// the in-coupled probe flux.
    pub extinction_floor: f64,
    /// Probability that the pump prepares the requested spin.
    pub init_fidelity: f64,
}

impl DetectionChain {
    pub fn reference_device() -> Self {
        DetectionChain {
            beta: 0.045,
            beta_prime: 0.045,
            eta_optics: 0.9 * 0.73 * 0.4,
            eta_det: 0.35,
            dead_time_ns: 0.0,
            dark_rate_hz: 0.0,
            afterpulse_prob: 0.0,
            extinction_floor: 0.018582,
            init_fidelity: 0.95,
        }
    }

    /// Output-side detection efficiency `β η_optics η_det`.
    pub fn eta_out(&self) -> f64 {
        self.beta * self.eta_optics * self.eta_det
    }

    /// Same chain with no extinction leakage, no dark counts and perfect
    /// spin preparation: only the reflected signal is counted.
    pub fn without_backgrounds(&self) -> Self {
        DetectionChain {
            dark_rate_hz: 0.0,
            extinction_floor: 0.0,
            init_fidelity: 1.0,
            ..*self
        }
    }

    /// Rescales the downstream optics so that `eta_out` equals `eta`,
    /// keeping `β` (which also sets the mode overlap) fixed.
    pub fn with_eta_out(&self, eta: f64) -> Self {
        let base = self.beta * self.eta_det;
        DetectionChain {
            eta_optics: if base > 0.0 { eta / base } else { 0.0 },
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, ok: bool, field: &'static str, message: impl Into<String>) {
        if !ok {
            self.violations.push(Violation {
                field,
                message: message.into(),
            });
        }
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msg = self
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.field, v.message))
                .collect::<Vec<_>>()
                .join("; ");
            Err(crate::Error::InvalidParams(msg))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn unit_interval(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

/// Lists every violated invariant. `cavity_ops` additionally requires a
/// decaying cavity (`κ > 0`).
pub fn validate(p: &SystemParams, d: &DetectionChain, cavity_ops: bool) -> ValidationReport {
    let mut r = ValidationReport::default();
    r.check(finite_nonneg(p.g), "g", "must be finite and >= 0");
    r.check(finite_nonneg(p.kappa), "kappa", "must be finite and >= 0");
    r.check(
        !cavity_ops || p.kappa > 0.0,
        "kappa",
        "must be > 0 for cavity operations",
    );
    r.check(unit_interval(p.alpha), "alpha", "must lie in [0, 1]");
    r.check(finite_nonneg(p.gamma_rad), "gamma_rad", "must be finite and >= 0");
    r.check(finite_nonneg(p.gamma_cross), "gamma_cross", "must be finite and >= 0");
    r.check(
        finite_nonneg(p.gamma_dephasing),
        "gamma_dephasing",
        "must be finite and >= 0",
    );
    r.check(p.delta_c.is_finite(), "delta_c", "must be finite");
    r.check(p.delta_x.is_finite(), "delta_x", "must be finite");
    r.check(
        p.wavelength_nm.is_finite() && p.wavelength_nm > 0.0,
        "wavelength",
        "must be > 0",
    );

    r.check(unit_interval(d.beta), "beta", "must lie in [0, 1]");
    r.check(unit_interval(d.beta_prime), "beta_prime", "must lie in [0, 1]");
    r.check(unit_interval(d.eta_optics), "eta_optics", "must lie in [0, 1]");
    r.check(unit_interval(d.eta_det), "eta_det", "must lie in [0, 1]");
    r.check(finite_nonneg(d.dead_time_ns), "dead_time", "must be finite and >= 0");
    r.check(finite_nonneg(d.dark_rate_hz), "dark_rate", "must be finite and >= 0");
    r.check(
        unit_interval(d.afterpulse_prob),
        "afterpulse_prob",
        "must lie in [0, 1]",
    );
    r.check(
        unit_interval(d.extinction_floor),
        "extinction_floor",
        "must lie in [0, 1]",
    );
    r.check(unit_interval(d.init_fidelity), "init_fidelity", "must lie in [0, 1]");
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn device_cooperativity() {
        let d = derive_quantities(&SystemParams::reference_device());
        assert!((d.gamma_dipole - 4.2).abs() < 1e-12);
        assert!((d.cooperativity - 1.479).abs() < 5e-4, "{}", d.cooperativity);
        assert!((d.cooperativity - 1.46).abs() <= 0.08);
    }

    #[test]
    fn device_enhancement_factor() {
        let d = derive_quantities(&SystemParams::reference_device());
        let n_over_np = d.enhancement().value().unwrap();
        assert!((n_over_np - 62.1).abs() < 0.05, "{n_over_np}");
        assert!((d.branching_ratio - 0.428_571).abs() < 1e-6);
        assert!((d.photon_budget.value().unwrap() - 82.82).abs() < 0.01);
    }

    #[test]
    fn uncoupled_cavity() {
        let p = SystemParams {
            g: 0.0,
            ..SystemParams::reference_device()
        };
        let d = derive_quantities(&p);
        assert_eq!(d.cooperativity, 0.0);
        assert_eq!(d.photon_budget, Budget::Finite(0.0));
        assert!(d.tau_mod_ns.is_infinite());
    }

    #[test]
    fn vanishing_cross_decay_is_unbounded() {
        let p = SystemParams {
            gamma_cross: 0.0,
            ..SystemParams::reference_device()
        };
        let d = derive_quantities(&p);
        assert_eq!(d.photon_budget, Budget::Unbounded);
        assert_eq!(d.bare_budget, Budget::Unbounded);
        assert_eq!(d.branching_ratio, 0.0);
    }

    #[test]
    fn modified_lifetime() {
        let d = derive_quantities(&SystemParams::reference_device());
        assert!((d.tau_mod_ns - 0.012_812).abs() < 1e-6, "{}", d.tau_mod_ns);
    }

    #[test]
    fn overall_efficiency_matches_quoted_budget() {
        let eta = DetectionChain::reference_device().eta_out();
        assert!((eta - 0.0041).abs() < 5e-5, "{eta}");
    }

    #[test]
    fn alpha_out_of_range_is_single_violation() {
        let p = SystemParams {
            alpha: 1.2,
            ..SystemParams::reference_device()
        };
        let r = validate(&p, &DetectionChain::reference_device(), true);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "alpha");
    }

    #[test]
    fn device_set_is_valid() {
        let r = validate(
            &SystemParams::reference_device(),
            &DetectionChain::reference_device(),
            true,
        );
        assert!(r.is_valid(), "{r}");
    }

    #[test]
    fn zero_kappa_rejected_for_cavity_ops() {
        let p = SystemParams {
            kappa: 0.0,
            ..SystemParams::reference_device()
        };
        let d = DetectionChain::reference_device();
        assert!(validate(&p, &d, false).is_valid());
        let r = validate(&p, &d, true);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "kappa");
    }

    #[test]
    fn dipole_rate_without_dephasing() {
        let p = SystemParams {
            gamma_rad: 0.3,
            gamma_cross: 0.3,
            gamma_dephasing: 0.0,
            ..SystemParams::reference_device()
        };
        assert_eq!(p.gamma_dipole(), 0.3);
    }

    #[test]
    fn with_branching_ratio_round_trips() {
        let p = SystemParams::reference_device().with_branching_ratio(0.01);
        let d = derive_quantities(&p);
        assert!((d.branching_ratio - 0.01).abs() < 1e-14);
        assert_eq!(p.gamma_rad, 0.1);
    }

    proptest! {
        #[test]
        fn derive_is_pure(g in 0.0..50.0f64, kappa in 0.1..100.0f64, gr in 0.0..1.0f64,
                          gc in 0.0..1.0f64, gd in 0.0..10.0f64) {
            let p = SystemParams { g, kappa, gamma_rad: gr, gamma_cross: gc, gamma_dephasing: gd,
                                   ..SystemParams::reference_device() };
            let a = derive_quantities(&p);
            let b = derive_quantities(&p);
            prop_assert_eq!(a.cooperativity.to_bits(), b.cooperativity.to_bits());
            prop_assert_eq!(a.tau_mod_ns.to_bits(), b.tau_mod_ns.to_bits());
        }

        #[test]
        fn cooperativity_scaling(g in 0.1..50.0f64, kappa in 0.1..100.0f64, gd in 0.01..10.0f64) {
            let p = SystemParams { g, kappa, gamma_dephasing: gd, ..SystemParams::reference_device() };
            let c = derive_quantities(&p).cooperativity;
            let c2g = derive_quantities(&SystemParams { g: 2.0 * g, ..p }).cooperativity;
            let c2k = derive_quantities(&SystemParams { kappa: 2.0 * kappa, ..p }).cooperativity;
            prop_assert!((c2g / c - 4.0).abs() < 1e-12);
            prop_assert!((c2k / c - 0.5).abs() < 1e-12);
            let p2 = SystemParams { gamma_rad: 2.0 * p.gamma_rad, gamma_cross: 2.0 * p.gamma_cross,
                                    gamma_dephasing: 2.0 * gd, ..p };
            let c2d = derive_quantities(&p2).cooperativity;
            prop_assert!((c2d / c - 0.5).abs() < 1e-12);
        }

        #[test]
        fn bare_budget_matches_branching(gr in 0.01..1.0f64, gc in 0.001..1.0f64) {
            let p = SystemParams { gamma_rad: gr, gamma_cross: gc, ..SystemParams::reference_device() };
            let d = derive_quantities(&p);
            let r = d.branching_ratio;
            prop_assert!((0.0..=1.0).contains(&r));
            let np = d.bare_budget.value().unwrap();
            prop_assert!((np - (1.0 - r) / r).abs() <= 1e-10 * np.max(1.0));
        }
    }
}

//! Physical observables built on the master equation: detected flux, count
//! integrals, optical pumping rate, weak-drive reflection and spectra.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coords::{RealSuperop, ReducedSuperop};
use super::density::DensityOperator;
use super::generator::{build_generator_with, DriveSpec, Generator, Relaxation};
use super::propagator::{exp_and_integral, expm};
use super::space::{HilbertConfig, Level, SparseOp};
use super::steady::steady_state_reduced;
use crate::analytic::{project_output, PolarizationBasis, TransferAmplitudes};
use crate::error::{Error, Result};
use crate::params::{DetectionChain, Spin, SystemParams};
use crate::readout::CountStatistics;
use crate::units::ghz_to_rad_per_ns;

/// Fock-truncation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Starting cutoff.
    pub n_max: usize,
    /// Accept `n` once going to `n+1` changes the observable by less than
    /// this (relative).
    pub truncation_tol: f64,
    /// Largest cutoff tried before giving up.
    pub n_max_cap: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            n_max: 3,
            truncation_tol: 1e-6,
            n_max_cap: 24,
        }
    }
}

/// A value together with the Fock cutoff it was computed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Converged<T> {
    pub value: T,
    pub n_max: usize,
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Raises the cutoff from `start` until the observable vector returned by
/// `measure` changes by less than `opts.truncation_tol` between `n` and
/// `n+1`; returns the `n+1` result.
pub fn converge_fock<T>(
    opts: &EngineOptions,
    start: usize,
    measure: impl Fn(&T) -> Vec<f64>,
    compute: impl Fn(HilbertConfig) -> Result<T>,
) -> Result<Converged<T>> {
    let mut n = start.max(1);
    let mut prev = compute(HilbertConfig::new(n)?)?;
    loop {
        if n + 1 > opts.n_max_cap {
            return Err(Error::Truncation {
                n_max: n,
                tol: opts.truncation_tol,
            });
        }
        let next = compute(HilbertConfig::new(n + 1)?)?;
        if relative_change(&measure(&prev), &measure(&next)) < opts.truncation_tol {
            return Ok(Converged {
                value: next,
                n_max: n + 1,
            });
        }
        prev = next;
        n += 1;
    }
}

/// Cutoff guess from the bare-cavity coherent photon number.
fn fock_guess(p: &SystemParams, epsilon: f64, opts: &EngineOptions) -> usize {
    let w = p.angular();
    let nbar = if w.kappa > 0.0 {
        0.5 * w.kappa_ex * epsilon * epsilon / (0.25 * w.kappa * w.kappa)
    } else {
        0.0
    };
    let guess = (nbar + 3.0 * nbar.sqrt()).ceil() as usize + 1;
    opts.n_max.max(guess).min(opts.n_max_cap.saturating_sub(1)).max(1)
}

/// `b†b` with `b = A ε − √(κ_ex/2) c`, `A = (κ/2)/(κ/2 + iΔ)`: the output flux
/// in the basis that nulls the bare cavity at `basis_delta` (GHz).
pub fn flux_operator(h: HilbertConfig, p: &SystemParams, epsilon: f64, basis_delta: f64) -> SparseOp {
    let w = p.angular();
    let a = Complex64::new(0.5 * w.kappa, 0.0) / Complex64::new(0.5 * w.kappa, ghz_to_rad_per_ns(basis_delta));
    let s = (0.5 * w.kappa_ex).sqrt();
    let c = h.annihilation();
    let cd = c.adjoint();
    h.identity()
        .scale_re(a.norm_sqr() * epsilon * epsilon)
        .sub(&c.scale(a.conj() * epsilon * s))
        .sub(&cd.scale(a * epsilon * s))
        .add(&h.number().scale_re(s * s))
}

/// `⟨b_Δ†b_Δ⟩` in photons/ns before the detection efficiency.
pub fn detected_flux(rho: &DensityOperator, basis_delta: f64, p: &SystemParams, epsilon: f64) -> f64 {
    rho.expect(&flux_operator(rho.hilbert(), p, epsilon, basis_delta)).re
}

/// Count-rate model of one readout configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    pub params: SystemParams,
    pub chain: DetectionChain,
    pub drive: DriveSpec,
    /// Detection basis nulls the bare cavity at this cavity-probe detuning (GHz).
    pub basis_delta: f64,
    pub t1_ns: Option<f64>,
}

/// Time-integrated output flux `∫₀ᵗ ⟨b†b⟩ dt` for the pure spin states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalIntegrals {
    pub t_grid: Vec<f64>,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl CountModel {
    pub fn new(params: SystemParams, chain: DetectionChain, power_nw: f64) -> Self {
        CountModel {
            params,
            chain,
            drive: DriveSpec::from_power(power_nw, chain.beta_prime, params.wavelength_nm),
            basis_delta: params.delta_c,
            t1_ns: None,
        }
    }

    pub fn with_t1(mut self, t1_ns: Option<f64>) -> Self {
        self.t1_ns = t1_ns;
        self
    }

    /// Detected background rate (1/ns): dark counts and analyzer leakage.
    pub fn background_rate(&self) -> f64 {
        self.chain.dark_rate_hz * 1e-9 + self.chain.extinction_floor * self.drive.photon_flux() * self.chain.eta_out()
    }

    pub fn generator(&self, h: HilbertConfig) -> Result<Generator> {
        build_generator_with(
            &self.params,
            &self.drive,
            h,
            Relaxation {
                t1_ns: self.t1_ns,
                close_up_manifold: false,
            },
        )
    }

    /// Signal integrals on `t = k·step`, `k = 0..=n_steps`, at a fixed cutoff.
    pub fn signal_integrals(&self, h: HilbertConfig, step: f64, n_steps: usize) -> Result<SignalIntegrals> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("window step must be > 0, got {step}")));
        }
        let gen = self.generator(h)?;
        let s = RealSuperop::new(&gen);
        let up0 = DensityOperator::pure_basis(h, Level::One, 0);
        let down0 = DensityOperator::pure_basis(h, Level::Two, 0);
        let r = s.restrict_to_states(&[&up0, &down0]);
        let flux = r.real_functional(&flux_operator(h, &self.params, self.drive.epsilon, self.basis_delta));
        let prop = exp_and_integral(r.matrix(), step);
        let g = prop.integral.transpose() * &flux;
        let run = |rho: &DensityOperator| {
            let mut x = r.state(rho);
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n_steps + 1);
            out.push(0.0);
            for _ in 0..n_steps {
                acc += g.dot(&x);
                x = &prop.exp * &x;
                out.push(acc);
            }
            out
        };
        Ok(SignalIntegrals {
            t_grid: (0..=n_steps).map(|k| k as f64 * step).collect(),
            up: run(&up0),
            down: run(&down0),
        })
    }

    pub fn signal_integrals_converged(
        &self,
        opts: &EngineOptions,
        step: f64,
        n_steps: usize,
    ) -> Result<Converged<SignalIntegrals>> {
        converge_fock(
            opts,
            fock_guess(&self.params, self.drive.epsilon, opts),
            |s: &SignalIntegrals| s.up.iter().chain(&s.down).cloned().collect(),
            |h| self.signal_integrals(h, step, n_steps),
        )
    }

    /// Expected detected counts including efficiency, backgrounds and the
    /// preparation-fidelity mixture.
    pub fn statistics_from(&self, s: &SignalIntegrals) -> Result<CountStatistics> {
        let f = self.chain.init_fidelity;
        let eta = self.chain.eta_out();
        let bg = self.background_rate();
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .zip(&s.t_grid)
                .map(|((x, y), t)| eta * (f * x + (1.0 - f) * y) + bg * t)
                .collect()
        };
        CountStatistics::new(s.t_grid.clone(), mix(&s.up, &s.down), mix(&s.down, &s.up))
    }

    pub fn statistics(&self, opts: &EngineOptions, step: f64, n_steps: usize) -> Result<CountStatistics> {
        let s = self.signal_integrals_converged(opts, step, n_steps)?;
        self.statistics_from(&s.value)
    }

    /// Expected detected photons within `[0, t_ns]` for the requested spin.
    pub fn accumulated_counts(&self, opts: &EngineOptions, spin: Spin, t_ns: f64) -> Result<f64> {
        if t_ns == 0.0 {
            return Ok(0.0);
        }
        let stats = self.statistics(opts, t_ns, 1)?;
        Ok(match spin {
            Spin::Up => stats.n_up[1],
            Spin::Down => stats.n_down[1],
        })
    }

    /// Populations, photon number and detected flux on `t = k·step`.
    pub fn trajectory(&self, h: HilbertConfig, spin: Spin, step: f64, n_steps: usize) -> Result<Vec<TrajectoryRow>> {
        let gen = self.generator(h)?;
        let s = RealSuperop::new(&gen);
        let f = self.chain.init_fidelity;
        let rho0 = match spin {
            Spin::Up => DensityOperator::ground_mixture(h, Level::One, Level::Two, f),
            Spin::Down => DensityOperator::ground_mixture(h, Level::Two, Level::One, f),
        };
        let r = s.restrict_to_states(&[&rho0]);
        let flux_op = flux_operator(h, &self.params, self.drive.epsilon, self.basis_delta);
        let p = expm(r.matrix(), step);
        let eta = self.chain.eta_out();
        let bg = self.background_rate();
        let mut x = r.state(&rho0);
        let mut rows = Vec::with_capacity(n_steps + 1);
        for k in 0..=n_steps {
            let rho = r.density(&x);
            rho.check()?;
            rows.push(TrajectoryRow {
                t_ns: k as f64 * step,
                p1: rho.population(Level::One),
                p2: rho.population(Level::Two),
                p3: rho.population(Level::Three),
                n_photon: rho.photon_number(),
                flux_detected: eta * rho.expect(&flux_op).re + bg,
            });
            x = &p * &x;
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_ns: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub n_photon: f64,
    /// Detected photons per ns including backgrounds.
    pub flux_detected: f64,
}

/// Decay rate of the trion population at a fixed cutoff; no intrinsic T1.
pub fn pumping_rate_fixed(p: &SystemParams, epsilon: f64, h: HilbertConfig) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("pumping rate needs a drive".into()));
    }
    let gen = build_generator_with(p, &DriveSpec::from_epsilon(epsilon), h, Relaxation::default())?;
    let s = RealSuperop::new(&gen);
    let rho0 = DensityOperator::pure_basis(h, Level::One, 0);
    let r = s.restrict_to_states(&[&rho0]);
    let o3 = r.real_functional(&h.sigma(Level::Three, Level::Three));
    let do3 = r.matrix().transpose() * &o3;
    let t0 = 20.0 / gen.kappa();
    let mut prop = expm(r.matrix(), t0);
    let mut x = r.state(&rho0);
    let mut t = t0;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let spread = |h: &[(f64, f64)]| -> Option<f64> {
        let (t_end, last) = *h.last()?;
        if h[0].0 > t_end / 10.0 {
            return None;
        }
        let tail = h.iter().filter(|(t, _)| *t >= t_end / 10.0);
        let (lo, hi) = tail.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, g)| {
            (lo.min(*g), hi.max(*g))
        });
        Some((hi - lo) / last.abs())
    };
    for _ in 0..64 {
        x = &prop * &x;
        let p3 = o3.dot(&x);
        if !(p3 > 1e-250) {
            break;
        }
        let rate = -do3.dot(&x) / p3;
        history.push((t, rate));
        if spread(&history).is_some_and(|s| s < 1e-9) {
            break;
        }
        prop = &prop * &prop;
        t *= 2.0;
    }
    let (_, rate) = *history
        .last()
        .ok_or_else(|| Error::Numerical("trion population vanishes".into()))?;
    match spread(&history) {
        Some(s) if s < 0.01 && rate > 0.0 => Ok(rate),
        Some(s) => Err(Error::Numerical(format!(
            "pumping-rate estimate drifts by {:.3}% over the final decade",
            100.0 * s
        ))),
        None => Err(Error::Numerical("pumping-rate tail shorter than a decade".into())),
    }
}

/// Optical pumping rate `γ_p` (1/ns) under a probe of `power_nw`.
pub fn pumping_rate(p: &SystemParams, beta_prime: f64, power_nw: f64, opts: &EngineOptions) -> Result<Converged<f64>> {
    if !(power_nw > 0.0) {
        return Err(Error::InvalidArgument(format!("power must be > 0, got {power_nw}")));
    }
    let eps = DriveSpec::from_power(power_nw, beta_prime, p.wavelength_nm).epsilon;
    pumping_rate_for_flux(p, eps * eps, opts)
}

/// As [`pumping_rate`] with the in-coupled flux `ε²` (photons/ns) given.
pub fn pumping_rate_for_flux(p: &SystemParams, flux: f64, opts: &EngineOptions) -> Result<Converged<f64>> {
    let eps = flux.sqrt();
    converge_fock(
        opts,
        fock_guess(p, eps, opts),
        |g: &f64| vec![*g],
        |h| pumping_rate_fixed(p, eps, h),
    )
}

fn manifold_params(p: &SystemParams, delta_probe: f64) -> SystemParams {
    SystemParams {
        delta_c: delta_probe,
        delta_x: delta_probe + (p.delta_x - p.delta_c),
        ..*p
    }
}

/// Trion population per unit `ε²` in the linear-response limit.
fn weak_p3_per_flux(q: &SystemParams) -> f64 {
    let w = q.angular();
    if w.g == 0.0 {
        return 0.0;
    }
    let dip = Complex64::new(w.gamma_dipole(), w.delta_x);
    let den = Complex64::new(0.5 * w.kappa, w.delta_c) + w.g * w.g / dip;
    0.5 * w.kappa_ex * w.g * w.g / (den.norm_sqr() * dip.norm_sqr())
}

fn weak_reflection_fixed(q: &SystemParams, spin: Spin, epsilon: f64, h: HilbertConfig) -> Result<(Complex64, f64)> {
    let gen = build_generator_with(
        q,
        &DriveSpec::from_epsilon(epsilon),
        h,
        Relaxation {
            t1_ns: None,
            close_up_manifold: true,
        },
    )?;
    let level = match spin {
        Spin::Up => Level::One,
        Spin::Down => Level::Two,
    };
    let rho0 = DensityOperator::pure_basis(h, level, 0);
    let r = RealSuperop::new(&gen).restrict_to_states(&[&rho0]);
    let rho = steady_state_reduced(&gen, &r)?;
    let c = rho.expect(&h.annihilation());
    let t = Complex64::new(1.0, 0.0) - (0.5 * gen.kappa_ex()).sqrt() * c / epsilon;
    Ok((t, rho.population(Level::Three)))
}

/// `1 − √(κ_ex/2)⟨c⟩/ε` from the steady state of the closed spin manifold
/// under a weak probe at cavity-probe detuning `delta_probe` (GHz). The
/// emitter detuning follows the probe as in
/// [`transfer_amplitudes`](crate::analytic::transfer_amplitudes).
pub fn weak_drive_reflection(p: &SystemParams, delta_probe: f64, spin: Spin) -> Result<Complex64> {
    if !(p.kappa > 0.0) {
        return Err(Error::InvalidParams("kappa must be > 0".into()));
    }
    let q = manifold_params(p, delta_probe);
    let per_flux = weak_p3_per_flux(&q);
    let epsilon = if per_flux > 0.0 {
        (1e-8 / per_flux).sqrt().min(1.0)
    } else {
        1e-3
    };
    let opts = EngineOptions {
        n_max: 1,
        truncation_tol: 1e-9,
        n_max_cap: 6,
    };
    let res = converge_fock(
        &opts,
        1,
        |v: &(Complex64, f64)| vec![v.0.re, v.0.im],
        |h| weak_reflection_fixed(&q, spin, epsilon, h),
    )?;
    let (t, p3) = res.value;
    if p3 >= 1e-3 {
        return Err(Error::WeakExcitation(format!(
            "trion population {p3:e} at epsilon {epsilon:e}"
        )));
    }
    Ok(t)
}

/// Reflection intensity per incident photon versus probe detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub delta: Vec<f64>,
    /// Spin-down (emitter decoupled) intensity.
    pub bare: Vec<f64>,
    /// Spin-up intensity.
    pub coupled: Vec<f64>,
}

impl Spectrum {
    /// `coupled/bare` at the grid point closest to `delta`.
    pub fn ratio_at(&self, delta: f64) -> Option<f64> {
        let i = (0..self.delta.len())
            .min_by(|&a, &b| (self.delta[a] - delta).abs().total_cmp(&(self.delta[b] - delta).abs()))?;
        Some(self.coupled[i] / self.bare[i])
    }
}

/// Weak-drive reflection spectrum detected in `basis`, with the analyzer
/// leakage `extinction_floor` added to both curves.
pub fn reflection_spectrum(
    p: &SystemParams,
    basis: PolarizationBasis,
    grid: &[f64],
    extinction_floor: f64,
) -> Result<Spectrum> {
    let rows: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&d| {
            let intensity = |spin| -> Result<f64> {
                let t = weak_drive_reflection(p, d, spin)?;
                let amps = TransferAmplitudes { t_h: t, t_v: t - 1.0 };
                Ok(project_output(basis, amps).norm_sqr() + extinction_floor)
            };
            Ok((intensity(Spin::Down)?, intensity(Spin::Up)?))
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum {
        delta: grid.to_vec(),
        bare: rows.iter().map(|r| r.0).collect(),
        coupled: rows.iter().map(|r| r.1).collect(),
    })
}

/// `dP3/dt` and `P3` at the given state, exposed for cross-checks.
pub fn trion_rate(r: &ReducedSuperop, x: &DVector<f64>) -> (f64, f64) {
    let h = r.hilbert();
    let o3 = r.real_functional(&h.sigma(Level::Three, Level::Three));
    let dx = r.matrix() * x;
    (o3.dot(&dx), o3.dot(x))
}

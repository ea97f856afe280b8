use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::curves::finish;
use super::lm::{levenberg_marquardt, LmOptions};
use super::{FitError, FitResult};
use crate::analytic::single_photon_probabilities;
use crate::lindblad::{pumping_rate_for_flux, EngineOptions};
use crate::params::SystemParams;
use crate::units::{ghz_to_rad_per_ns, photon_flux_per_ns};

/// Master-equation pumping rate as a function of `(γ, β′, P)` with every
/// other device parameter fixed. The rate depends on `β′` and `P` only
/// through the in-coupled flux, so results are cached on `(γ, β′P)`.
#[derive(Debug)]
pub struct PumpingModel {
    base: SystemParams,
    opts: EngineOptions,
    cache: Mutex<HashMap<(u64, u64), f64>>,
    solves: AtomicUsize,
}

impl PumpingModel {
    pub fn new(base: SystemParams, opts: EngineOptions) -> Self {
        PumpingModel {
            base,
            opts,
            cache: Mutex::new(HashMap::new()),
            solves: AtomicUsize::new(0),
        }
    }

    /// `γ_p` in 1/ns.
    pub fn rate(&self, gamma_cross: f64, beta_prime: f64, power_nw: f64) -> Result<f64, FitError> {
        let flux = beta_prime * photon_flux_per_ns(power_nw, self.base.wavelength_nm);
        let key = (gamma_cross.to_bits(), flux.to_bits());
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*v);
        }
        let p = SystemParams {
            gamma_cross,
            ..self.base
        };
        self.solves.fetch_add(1, Ordering::Relaxed);
        let v = pumping_rate_for_flux(&p, flux, &self.opts)
            .map_err(|e| FitError::Model(e.to_string()))?
            .value;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    /// Number of master-equation solves so far.
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}

/// Fits `γ` (GHz) and `β′` to measured pumping rates (1/ns) versus power
/// (nW), all other parameters taken from the model.
pub fn fit_pumping_curve(model: &PumpingModel, powers: &[f64], rates: &[f64]) -> Result<FitResult, FitError> {
    if powers.len() != rates.len() {
        return Err(FitError::InvalidInput("powers and rates differ in length".into()));
    }
    if powers.len() < 5 {
        return Err(FitError::InvalidInput(format!(
            "need at least 5 powers, got {}",
            powers.len()
        )));
    }
    if powers.iter().chain(rates).any(|v| !v.is_finite()) || powers.iter().any(|p| *p <= 0.0) {
        return Err(FitError::InvalidInput(
            "powers must be positive and rates finite".into(),
        ));
    }
    if rates.iter().all(|r| *r == 0.0) {
        return Err(FitError::Unidentifiable("all rates are zero".into()));
    }
    if rates.iter().any(|r| *r <= 0.0) {
        return Err(FitError::InvalidInput("rates must be positive".into()));
    }
    let (pmin, pmax) = powers
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(*p), b.max(*p)));
    if pmax < 10.0 * pmin {
        return Err(FitError::Unidentifiable(format!(
            "powers span {:.2}x; at least a decade is needed to separate γ from β′",
            pmax / pmin
        )));
    }

    // Saturated pumping approaches half the cross-decay rate; the lowest
    // power fixes β′ through the single-photon flip probability.
    let base = model.base;
    let rmax = rates.iter().cloned().fold(0.0, f64::max);
    let gamma0 = (2.0 * rmax / ghz_to_rad_per_ns(1.0)).max(1e-4);
    let k_low = (0..powers.len())
        .min_by(|&a, &b| powers[a].total_cmp(&powers[b]))
        .unwrap();
    let (_, p_flip) = single_photon_probabilities(
        &SystemParams {
            gamma_cross: gamma0,
            ..base
        },
        true,
    );
    let phi = photon_flux_per_ns(powers[k_low], base.wavelength_nm);
    let beta0 = if p_flip > 0.0 {
        (rates[k_low] / (phi * p_flip * base.alpha)).clamp(1e-4, 1.0)
    } else {
        0.05
    };

    let f = |x: &[f64]| -> Result<Vec<f64>, FitError> {
        let (g, b) = (x[0].exp(), x[1].exp());
        powers
            .par_iter()
            .zip(rates)
            .map(|(&p, &r)| Ok(model.rate(g, b, p)? / r - 1.0))
            .collect()
    };
    let opts = LmOptions {
        max_iterations: 60,
        gradient_tol: 1e-10,
        step_tol: 1e-9,
        diff_step: 1e-6,
        central: false,
    };
    let out = levenberg_marquardt(&f, &[gamma0.ln(), beta0.ln()], &opts)?;
    finish(&out, &["gamma_cross_ghz", "beta_prime"], |x| {
        let (g, b) = (x[0].exp(), x[1].exp());
        (
            vec![g, b],
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![g, b])),
        )
    })
}

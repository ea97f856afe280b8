//! Readout probabilities and fidelities from expected-count curves, plus the
//! parameter sweeps built on the master-equation count model.
//!
//! Counts are Poisson with mean `N↑(T)` or `N↓(T)`. The simple criterion calls
//! spin-up on at least one click; the threshold criterion calls spin-up on
//! more than `M` clicks, with `M` where the two Poisson laws cross.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lindblad::{pumping_rate, CountModel, EngineOptions, SignalIntegrals};
use crate::params::{derive_quantities, DetectionChain, SystemParams};

/// Relative tolerance for the monotonicity and labeling checks.
const CURVE_TOL: f64 = 1e-9;

/// Expected detected photons versus counting window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStatistics {
    pub t_grid: Vec<f64>,
    pub n_up: Vec<f64>,
    pub n_down: Vec<f64>,
}

fn check_curve(name: &str, v: &[f64]) -> Result<()> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (k, x) in v.iter().enumerate() {
        if !x.is_finite() || *x < -CURVE_TOL * scale.max(1e-300) {
            return Err(Error::InvalidArgument(format!(
                "{name}[{k}] = {x} is not a valid count"
            )));
        }
        if k > 0 && *x < v[k - 1] - CURVE_TOL * scale {
            return Err(Error::InvalidArgument(format!("{name} decreases at index {k}")));
        }
    }
    Ok(())
}

impl CountStatistics {
    pub fn new(t_grid: Vec<f64>, n_up: Vec<f64>, n_down: Vec<f64>) -> Result<Self> {
        if n_up.len() != t_grid.len() || n_down.len() != t_grid.len() {
            return Err(Error::InvalidArgument(
                "count curves and time grid differ in length".into(),
            ));
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("time grid must be strictly ascending".into()));
        }
        check_curve("n_up", &n_up)?;
        check_curve("n_down", &n_down)?;
        let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.max(0.0)).collect();
        Ok(CountStatistics {
            t_grid,
            n_up: clamp(n_up),
            n_down: clamp(n_down),
        })
    }

    /// First window at which `n_up < n_down` beyond rounding, if any.
    pub fn mislabeled_at(&self) -> Option<usize> {
        self.n_up
            .iter()
            .zip(&self.n_down)
            .position(|(u, d)| *u < *d - CURVE_TOL * u.max(*d))
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }
}

/// Outcome of a readout classifier at one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub fidelity: f64,
    pub p_up: f64,
    pub p_down: f64,
    pub window_ns: f64,
    /// Largest click count still classified as spin-down.
    pub threshold: u64,
}

impl FidelityResult {
    fn from_probabilities(p_up: f64, p_down: f64, threshold: u64) -> Self {
        FidelityResult {
            fidelity: 0.5 * (p_up + p_down),
            p_up,
            p_down,
            window_ns: 0.0,
            threshold,
        }
    }

    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity
    }
}

/// `P↑ = 1 − e^{−N↑}`, `P↓ = e^{−N↓}`.
pub fn simple_fidelity(n_up: f64, n_down: f64) -> FidelityResult {
    FidelityResult::from_probabilities(-(-n_up).exp_m1(), (-n_down).exp(), 0)
}

/// Poisson `P(X ≤ m)` for mean `n`, summed in log space.
pub fn poisson_cdf(n: f64, m: u64) -> f64 {
    if n == 0.0 {
        return 1.0;
    }
    let ln_n = n.ln();
    let mut ln_term = -n;
    let mut sum = ln_term.exp();
    for j in 1..=m {
        ln_term += ln_n - (j as f64).ln();
        let t = ln_term.exp();
        sum += t;
        // Past the mode the terms fall off geometrically.
        if (j as f64) > n && t < 1e-18 * sum {
            break;
        }
    }
    sum.min(1.0)
}

/// Fidelity of "spin-up iff more than `m` clicks".
pub fn fidelity_at_threshold(n_up: f64, n_down: f64, m: u64) -> FidelityResult {
    let p_up = 1.0 - poisson_cdf(n_up, m);
    let p_down = poisson_cdf(n_down, m);
    FidelityResult::from_probabilities(p_up, p_down, m)
}

/// Optimal-threshold fidelity, `M = ⌊(N↑−N↓)/(ln N↑ − ln N↓)⌋`.
pub fn threshold_fidelity(n_up: f64, n_down: f64) -> Result<FidelityResult> {
    if !(n_up.is_finite() && n_down.is_finite()) || n_up < 0.0 || n_down < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "counts must be finite and non-negative, got ({n_up}, {n_down})"
        )));
    }
    if n_up < n_down * (1.0 - CURVE_TOL) {
        return Err(Error::Mislabeled { n_up, n_down });
    }
    if n_up <= n_down {
        return Ok(FidelityResult::from_probabilities(0.5, 0.5, 0));
    }
    if n_down == 0.0 {
        return Ok(fidelity_at_threshold(n_up, 0.0, 0));
    }
    let m = ((n_up - n_down) / (n_up.ln() - n_down.ln())).floor();
    Ok(fidelity_at_threshold(n_up, n_down, m.max(0.0) as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Simple,
    Threshold,
}

impl Criterion {
    pub fn evaluate(self, n_up: f64, n_down: f64) -> Result<FidelityResult> {
        match self {
            Criterion::Simple => Ok(simple_fidelity(n_up, n_down)),
            Criterion::Threshold => threshold_fidelity(n_up, n_down),
        }
    }
}

/// Best window on the grid of `stats`; ties go to the shorter window.
pub fn optimize_window(stats: &CountStatistics, criterion: Criterion) -> Result<FidelityResult> {
    let mut best: Option<FidelityResult> = None;
    for k in 0..stats.len() {
        let mut r = criterion.evaluate(stats.n_up[k], stats.n_down[k])?;
        r.window_ns = stats.t_grid[k];
        if best.is_none_or(|b| r.fidelity > b.fidelity) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty window grid".into()))
}

/// Bare-emitter limit `F′ = 1 − ½ e^{−η(1−R)/R}`.
pub fn bare_dot_fidelity(eta: f64, r_b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("efficiency {eta} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&r_b) {
        return Err(Error::InvalidArgument(format!("branching ratio {r_b} outside [0, 1]")));
    }
    if r_b == 0.0 {
        return Ok(if eta > 0.0 { 1.0 } else { 0.5 });
    }
    Ok(1.0 - 0.5 * (-eta * (1.0 - r_b) / r_b).exp())
}

/// Inverse of [`bare_dot_fidelity`] in `η`.
pub fn required_efficiency(f_target: f64, r_b: f64) -> Result<f64> {
    if !(f_target > 0.5 && f_target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target fidelity {f_target} outside (0.5, 1)"
        )));
    }
    if !(r_b > 0.0 && r_b < 1.0) {
        return Err(Error::InvalidArgument(format!("branching ratio {r_b} outside (0, 1)")));
    }
    let eta = -(2.0 * (1.0 - f_target)).ln() * r_b / (1.0 - r_b);
    if eta > 1.0 {
        return Err(Error::Unattainable { needed: eta });
    }
    Ok(eta)
}

/// Everything a sweep needs besides the swept variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub params: SystemParams,
    pub chain: DetectionChain,
    pub power_nw: f64,
    pub t1_ns: Option<f64>,
    pub engine: EngineOptions,
    pub window_step_ns: f64,
    pub window_max_ns: f64,
}

impl SweepSetup {
    pub fn from_config(c: &Config) -> Self {
        SweepSetup {
            params: c.system,
            chain: c.chain,
            power_nw: c.run.probe_power_nw,
            t1_ns: c.run.t1_ns,
            engine: EngineOptions {
                n_max: c.run.n_max,
                truncation_tol: c.run.truncation_tol,
                ..EngineOptions::default()
            },
            window_step_ns: c.run.window_step_ns,
            window_max_ns: c.run.window_max_ns,
        }
    }

    pub fn reference() -> Self {
        Self::from_config(&Config::reference())
    }

    fn n_steps(&self) -> Result<usize> {
        if !(self.window_step_ns > 0.0 && self.window_max_ns >= self.window_step_ns) {
            return Err(Error::InvalidArgument(format!(
                "window grid step {} / max {} is not usable",
                self.window_step_ns, self.window_max_ns
            )));
        }
        Ok((self.window_max_ns / self.window_step_ns).round() as usize)
    }

    pub fn model(&self) -> CountModel {
        CountModel::new(self.params, self.chain, self.power_nw).with_t1(self.t1_ns)
    }

    /// Count curves on the configured window grid.
    pub fn statistics(&self) -> Result<CountStatistics> {
        self.model()
            .statistics(&self.engine, self.window_step_ns, self.n_steps()?)
    }

    /// Signal integrals with the first (`t = 0`) point dropped.
    fn signal(&self, model: &CountModel, step: f64, n: usize) -> Result<SignalIntegrals> {
        Ok(model.signal_integrals_converged(&self.engine, step, n)?.value)
    }
}

fn drop_origin(s: CountStatistics) -> Result<CountStatistics> {
    CountStatistics::new(s.t_grid[1..].to_vec(), s.n_up[1..].to_vec(), s.n_down[1..].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub result: FidelityResult,
}

/// Fidelity versus cavity detuning from the spin-up transition (GHz). The
/// probe follows the transition and the analyzer nulls the detuned bare
/// cavity. Simple criterion.
pub fn sweep_fidelity_vs_detuning(setup: &SweepSetup, deltas: &[f64]) -> Result<Vec<SweepPoint>> {
    deltas
        .par_iter()
        .map(|&d| {
            let s = SweepSetup {
                params: SystemParams {
                    delta_c: -d,
                    delta_x: 0.0,
                    ..setup.params
                },
                ..*setup
            };
            let stats = drop_origin(s.statistics()?)?;
            Ok(SweepPoint {
                x: d,
                result: optimize_window(&stats, Criterion::Simple)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub eta: f64,
    pub cavity: FidelityResult,
    pub bare: f64,
}

/// Background-free signal curves per unit detection efficiency, used to
/// rescale to any `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSignal {
    pub t_grid: Vec<f64>,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl UnitSignal {
    pub fn compute(setup: &SweepSetup) -> Result<Self> {
        let model = setup.model();
        let s = setup.signal(&model, setup.window_step_ns, setup.n_steps()?)?;
        Ok(UnitSignal {
            t_grid: s.t_grid[1..].to_vec(),
            up: s.up[1..].to_vec(),
            down: s.down[1..].to_vec(),
        })
    }

    pub fn statistics(&self, eta: f64) -> Result<CountStatistics> {
        let scale = |v: &[f64]| v.iter().map(|x| eta * x).collect();
        CountStatistics::new(self.t_grid.clone(), scale(&self.up), scale(&self.down))
    }

    pub fn fidelity(&self, eta: f64) -> Result<FidelityResult> {
        optimize_window(&self.statistics(eta)?, Criterion::Threshold)
    }
}

fn background_free(setup: &SweepSetup) -> SweepSetup {
    SweepSetup {
        chain: setup.chain.without_backgrounds(),
        ..*setup
    }
}

/// Threshold-criterion fidelity versus overall detection efficiency, next to
/// the bare-emitter bound. Only the reflected signal is counted.
pub fn sweep_fidelity_vs_efficiency(setup: &SweepSetup, etas: &[f64]) -> Result<Vec<EfficiencyPoint>> {
    let unit = UnitSignal::compute(&background_free(setup))?;
    let r_b = derive_quantities(&setup.params).branching_ratio;
    etas.par_iter()
        .map(|&eta| {
            Ok(EfficiencyPoint {
                eta,
                cavity: unit.fidelity(eta)?,
                bare: bare_dot_fidelity(eta, r_b)?,
            })
        })
        .collect()
}

/// Efficiency at which the threshold fidelity reaches `target`, by bisection.
pub fn efficiency_crossing(setup: &SweepSetup, target: f64) -> Result<f64> {
    let unit = UnitSignal::compute(&background_free(setup))?;
    let f = |eta: f64| unit.fidelity(eta).map(|r| r.fidelity);
    let (mut lo, mut hi) = (0.0, 1.0);
    if f(hi)? < target {
        return Err(Error::Unattainable { needed: f64::INFINITY });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingPoint {
    pub r_b: f64,
    pub cavity: FidelityResult,
    pub bare_infidelity: f64,
    pub pumping_rate: f64,
}

impl BranchingPoint {
    pub fn cavity_infidelity(&self) -> f64 {
        self.cavity.infidelity()
    }
}

/// Window span long enough to see the spin flip, bounded to `[min, 1e6]` ns.
pub fn adaptive_window(gamma_p: f64, t1_ns: Option<f64>, min_ns: f64) -> f64 {
    let rate = gamma_p + t1_ns.map_or(0.0, |t| 1.0 / t);
    if rate > 0.0 {
        (6.0 / rate).clamp(min_ns, 1e6)
    } else {
        1e6
    }
}

/// Grid points per adaptive window.
pub const ADAPTIVE_STEPS: usize = 2000;

/// Infidelity versus branching ratio at detection efficiency `eta`. The
/// cross rate is rederived from `R` with the radiative rate fixed; only the
/// reflected signal is counted and the window adapts to the flip time.
pub fn sweep_infidelity_vs_branching(setup: &SweepSetup, r_grid: &[f64], eta: f64) -> Result<Vec<BranchingPoint>> {
    r_grid
        .par_iter()
        .map(|&r_b| {
            if !(r_b > 0.0 && r_b < 1.0) {
                return Err(Error::InvalidArgument(format!("branching ratio {r_b} outside (0, 1)")));
            }
            let params = setup.params.with_branching_ratio(r_b);
            let gp = pumping_rate(&params, setup.chain.beta_prime, setup.power_nw, &setup.engine)?.value;
            let span = adaptive_window(gp, setup.t1_ns, setup.window_max_ns);
            let s = SweepSetup {
                params,
                chain: setup.chain.without_backgrounds().with_eta_out(eta),
                window_step_ns: span / ADAPTIVE_STEPS as f64,
                window_max_ns: span,
                ..*setup
            };
            let stats = drop_origin(s.statistics()?)?;
            Ok(BranchingPoint {
                r_b,
                cavity: optimize_window(&stats, Criterion::Threshold)?,
                bare_infidelity: 1.0 - bare_dot_fidelity(eta, r_b)?,
                pumping_rate: gp,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerWindowMap {
    pub powers: Vec<f64>,
    pub windows: Vec<f64>,
    /// `fidelity[i][j]` at `powers[i]`, `windows[j]`.
    pub fidelity: Vec<Vec<f64>>,
    pub best_power: f64,
    pub best_window: f64,
    pub best_fidelity: f64,
}

impl PowerWindowMap {
    /// Best window per power.
    pub fn optimal_windows(&self) -> Vec<f64> {
        self.fidelity
            .iter()
            .map(|row| {
                let mut k = 0;
                for (j, f) in row.iter().enumerate() {
                    if *f > row[k] {
                        k = j;
                    }
                }
                self.windows[k]
            })
            .collect()
    }
}

/// Simple-criterion fidelity over a power × window grid with all
/// backgrounds. Windows must be positive multiples of the setup's step.
pub fn sweep_power_window(setup: &SweepSetup, powers: &[f64], windows: &[f64]) -> Result<PowerWindowMap> {
    if powers.is_empty() || windows.is_empty() {
        return Err(Error::InvalidArgument("power and window grids must be nonempty".into()));
    }
    let step = setup.window_step_ns;
    let idx: Vec<usize> = windows
        .iter()
        .map(|&w| {
            let k = (w / step).round();
            if !(k >= 1.0) || ((k * step - w).abs() > 1e-9 * w.max(1.0)) {
                Err(Error::InvalidArgument(format!(
                    "window {w} ns is not a multiple of {step} ns"
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<_>>()?;
    let n = *idx.iter().max().unwrap();
    let rows: Vec<Vec<f64>> = powers
        .par_iter()
        .map(|&power| {
            if !(power >= 0.0) {
                return Err(Error::InvalidArgument(format!("power {power} must be >= 0")));
            }
            let s = SweepSetup {
                power_nw: power,
                ..*setup
            };
            let model = s.model();
            let stats = model.statistics(&s.engine, step, n)?;
            Ok(idx
                .iter()
                .map(|&k| simple_fidelity(stats.n_up[k], stats.n_down[k]).fidelity)
                .collect())
        })
        .collect::<Result<_>>()?;
    let (mut bi, mut bj) = (0, 0);
    for (i, row) in rows.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            if *f > rows[bi][bj] {
                (bi, bj) = (i, j);
            }
        }
    }
    Ok(PowerWindowMap {
        powers: powers.to_vec(),
        windows: windows.to_vec(),
        best_power: powers[bi],
        best_window: windows[bj],
        best_fidelity: rows[bi][bj],
        fidelity: rows,
    })
}

/// Extinction floor that makes the spin-down count in `window_ns` equal
/// `target`. The count is affine in the floor, so one evaluation suffices.
pub fn calibrate_extinction_floor(setup: &SweepSetup, window_ns: f64, target: f64) -> Result<f64> {
    let chain = DetectionChain {
        extinction_floor: 0.0,
        ..setup.chain
    };
    let model = CountModel::new(setup.params, chain, setup.power_nw).with_t1(setup.t1_ns);
    let signal = model.statistics(&setup.engine, window_ns, 1)?.n_down[1];
    let per_floor = model.drive.photon_flux() * chain.eta_out() * window_ns;
    let floor = (target - signal) / per_floor;
    if floor < 0.0 {
        return Err(Error::Unattainable { needed: floor });
    }
    Ok(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_fidelity_examples() {
        let r = simple_fidelity(0.3, 0.1);
        assert!((r.p_up - 0.259_181_779_318_282).abs() < 1e-12);
        assert!((r.p_down - 0.904_837_418_035_96).abs() < 1e-12);
        assert!((r.fidelity - 0.582_009_598_677_12).abs() < 1e-12);
        assert_eq!(simple_fidelity(0.0, 0.0).fidelity, 0.5);
        assert_eq!(simple_fidelity(f64::INFINITY, 0.0).fidelity, 1.0);
    }

    #[test]
    fn threshold_fidelity_examples() {
        let r = threshold_fidelity(0.3, 0.1).unwrap();
        assert_eq!(r.threshold, 0);
        assert!((r.fidelity - simple_fidelity(0.3, 0.1).fidelity).abs() < 1e-15);
        let r = threshold_fidelity(10.0, 0.1).unwrap();
        assert_eq!(r.threshold, 2);
        // ½ + ½[e^{-0.1}(1 + 0.1 + 0.005) − e^{-10}(1 + 10 + 50)]
        let expect = 0.5 + 0.5 * ((-0.1f64).exp() * 1.105 - (-10.0f64).exp() * 61.0);
        assert!((r.fidelity - expect).abs() < 1e-14);
        assert!((r.fidelity - 0.998_54).abs() < 1e-5);
        for x in [0.0, 0.4, 17.0] {
            assert_eq!(threshold_fidelity(x, x).unwrap().fidelity, 0.5);
        }
        assert!(matches!(threshold_fidelity(0.1, 0.3), Err(Error::Mislabeled { .. })));
        let r = threshold_fidelity(2.0, 0.0).unwrap();
        assert_eq!(r.threshold, 0);
        assert!((r.fidelity - (1.0 - 0.5 * (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn poisson_cdf_large_mean() {
        // Median of Poisson(1000) sits near 1000.
        let c = poisson_cdf(1000.0, 1000);
        assert!((c - 0.508_4).abs() < 1e-3, "{c}");
        assert!((poisson_cdf(3.0, 400) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bare_dot_examples() {
        assert!((bare_dot_fidelity(0.0041, 0.43).unwrap() - 0.502_71).abs() < 1e-5);
        assert!((bare_dot_fidelity(1.0, 0.43).unwrap() - 0.867_18).abs() < 1e-5);
        assert_eq!(bare_dot_fidelity(0.0, 0.43).unwrap(), 0.5);
        assert_eq!(bare_dot_fidelity(0.5, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn required_efficiency_examples() {
        assert!((required_efficiency(0.61, 0.43).unwrap() - 0.187_4).abs() < 1e-4);
        assert!((required_efficiency(0.82, 0.43).unwrap() - 0.770_7).abs() < 1e-4);
        assert!(required_efficiency(0.500_001, 0.43).unwrap() < 1e-5);
        assert!(matches!(
            required_efficiency(0.95, 0.43),
            Err(Error::Unattainable { .. })
        ));
    }

    #[test]
    fn window_optimizer_recovers_scan_argmax() {
        let t: Vec<f64> = (1..=300).map(f64::from).collect();
        let tau = 17.6;
        let up: Vec<f64> = t
            .iter()
            .map(|t| 0.25 * tau * (1.0 - (-t / tau).exp()) / 10.0 + 1e-3 * t)
            .collect();
        let down: Vec<f64> = t.iter().map(|t| 1e-3 * t).collect();
        let stats = CountStatistics::new(t.clone(), up.clone(), down.clone()).unwrap();
        let r = optimize_window(&stats, Criterion::Simple).unwrap();
        let brute = (0..t.len())
            .max_by(|&a, &b| {
                let fa = simple_fidelity(up[a], down[a]).fidelity;
                let fb = simple_fidelity(up[b], down[b]).fidelity;
                fa.total_cmp(&fb).then(b.cmp(&a))
            })
            .unwrap();
        assert_eq!(r.window_ns, t[brute]);
    }

    #[test]
    fn identical_curves_pick_first_window() {
        let t = vec![1.0, 2.0, 3.0];
        let n = vec![0.1, 0.2, 0.3];
        let stats = CountStatistics::new(t, n.clone(), n).unwrap();
        for c in [Criterion::Simple, Criterion::Threshold] {
            let r = optimize_window(&stats, c).unwrap();
            assert_eq!(r.window_ns, 1.0);
            assert!((r.fidelity - 0.5).abs() < 1e-15);
        }
        let empty = CountStatistics::new(vec![], vec![], vec![]).unwrap();
        assert!(optimize_window(&empty, Criterion::Simple).is_err());
    }

    #[test]
    fn count_statistics_validation() {
        assert!(CountStatistics::new(vec![1.0, 2.0], vec![0.2, 0.1], vec![0.0, 0.0]).is_err());
        assert!(CountStatistics::new(vec![1.0, 1.0], vec![0.1, 0.2], vec![0.0, 0.0]).is_err());
        let s = CountStatistics::new(vec![1.0, 2.0], vec![0.1, 0.2], vec![0.0, 0.3]).unwrap();
        assert_eq!(s.mislabeled_at(), Some(1));
    }

    #[test]
    fn adaptive_window_bounds() {
        assert_eq!(adaptive_window(1.0, None, 400.0), 400.0);
        assert!((adaptive_window(0.0, Some(2210.0), 400.0) - 13_260.0).abs() < 1e-9);
        assert_eq!(adaptive_window(0.0, None, 400.0), 1e6);
    }

    #[test]
    fn power_window_rejects_off_grid_windows() {
        let setup = SweepSetup::reference();
        assert!(sweep_power_window(&setup, &[10.0], &[0.5]).is_err());
        assert!(sweep_power_window(&setup, &[], &[1.0]).is_err());
    }

    #[test]
    fn zero_power_column_is_half() {
        let setup = SweepSetup {
            window_max_ns: 20.0,
            ..SweepSetup::reference()
        };
        let map = sweep_power_window(&setup, &[0.0], &[5.0, 20.0]).unwrap();
        assert!(map.fidelity[0].iter().all(|f| (f - 0.5).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn threshold_never_worse_than_simple(d in 1e-4f64..20.0, ratio in 1.0001f64..100.0) {
            let u = d * ratio;
            let t = threshold_fidelity(u, d).unwrap().fidelity;
            prop_assert!(t >= simple_fidelity(u, d).fidelity - 1e-12);
            prop_assert!((0.5 - 1e-12..=1.0).contains(&t));
        }

        #[test]
        fn threshold_is_the_best_integer_cut(d in 1e-3f64..30.0, ratio in 1.01f64..20.0) {
            let u = d * ratio;
            let r = threshold_fidelity(u, d).unwrap();
            for m in r.threshold.saturating_sub(2)..=r.threshold + 2 {
                prop_assert!(fidelity_at_threshold(u, d, m).fidelity <= r.fidelity + 1e-12);
            }
        }

        #[test]
        fn exchanging_states_and_labels_preserves_fidelity(d in 1e-3f64..20.0, ratio in 1.01f64..50.0) {
            let u = d * ratio;
            let r = threshold_fidelity(u, d).unwrap();
            // Same cut with the states exchanged labels every outcome wrong.
            let swapped = fidelity_at_threshold(d, u, r.threshold);
            prop_assert!((swapped.fidelity - (1.0 - r.fidelity)).abs() < 1e-12);
            prop_assert!((r.fidelity - 0.5 * (r.p_up + r.p_down)).abs() < 1e-12);
        }

        #[test]
        fn bare_fidelity_monotone(eta in 0.0f64..0.99, r in 0.01f64..0.98) {
            let f = bare_dot_fidelity(eta, r).unwrap();
            prop_assert!(bare_dot_fidelity(eta + 0.01, r).unwrap() >= f);
            prop_assert!(bare_dot_fidelity(eta, r + 0.01).unwrap() <= f);
        }

        #[test]
        fn required_efficiency_inverts_bare_bound(f in 0.5001f64..0.86, r in 0.05f64..0.43) {
            match required_efficiency(f, r) {
                Ok(eta) => prop_assert!((bare_dot_fidelity(eta, r).unwrap() - f).abs() < 1e-12),
                Err(Error::Unattainable { needed }) => prop_assert!(needed > 1.0),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}

//! Seeded counting simulations of the pump-probe readout.
//!
//! The spin is a two-state jump process. Under the probe it leaves spin-up at
//! the optical pumping rate and both states relax at `1/(2T1)` each way.
//! Clicks form a Poisson process whose rate depends on the current spin, and
//! detector dead time and after-pulsing are applied to the click train
//! afterwards.
//!
//! Run `i` draws from a ChaCha8 stream seeded with `seed ^ i`, so results do
//! not depend on how runs are scheduled across threads.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{CountModel, HilbertConfig};
use crate::params::{DetectionChain, Spin};

/// Per-spin rates, indexed by [`Spin`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerSpin {
    pub up: f64,
    pub down: f64,
}

impl PerSpin {
    pub fn get(&self, s: Spin) -> f64 {
        match s {
            Spin::Up => self.up,
            Spin::Down => self.down,
        }
    }
}

/// One pump-delay-probe shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub seed: u64,
    /// Spin the pump prepares (with the chain's `init_fidelity`).
    pub pump_target: Spin,
    /// Dark interval between pump and probe; only T1 acts here.
    pub delay_ns: f64,
    pub probe_ns: f64,
    /// Probe-induced flip rate out of each spin state (1/ns).
    pub flip_rate: PerSpin,
    pub t1_ns: Option<f64>,
    /// Detected signal rate in each spin state (1/ns), excluding dark counts.
    pub detected_rate: PerSpin,
    /// Spin-independent detected background (1/ns), excluding dark counts.
    pub background_rate: f64,
    pub afterpulse_delay_ns: f64,
}

impl TrajectoryConfig {
    /// Constant click rates, no spin flips.
    pub fn constant(seed: u64, probe_ns: f64, rate_up: f64, rate_down: f64) -> Self {
        TrajectoryConfig {
            seed,
            pump_target: Spin::Up,
            delay_ns: 0.0,
            probe_ns,
            flip_rate: PerSpin { up: 0.0, down: 0.0 },
            t1_ns: None,
            detected_rate: PerSpin {
                up: rate_up,
                down: rate_down,
            },
            background_rate: 0.0,
            afterpulse_delay_ns: 100.0,
        }
    }

    /// Rates taken from the master-equation count model: the detected flux a
    /// short time after the probe turns on, and the pumping rate `gamma_p`.
    pub fn from_count_model(
        model: &CountModel,
        h: HilbertConfig,
        gamma_p: f64,
        probe_ns: f64,
        seed: u64,
    ) -> Result<Self> {
        let pure = CountModel {
            chain: DetectionChain {
                init_fidelity: 1.0,
                dark_rate_hz: 0.0,
                extinction_floor: 0.0,
                ..model.chain
            },
            ..*model
        };
        // Past the cavity transient (~1/κ) and well before the flip.
        let settle = 0.5;
        let rate = |s| -> Result<f64> { Ok(pure.trajectory(h, s, settle, 1)?[1].flux_detected) };
        let bg = CountModel {
            chain: DetectionChain {
                dark_rate_hz: 0.0,
                ..model.chain
            },
            ..*model
        }
        .background_rate();
        Ok(TrajectoryConfig {
            seed,
            pump_target: Spin::Up,
            delay_ns: 0.0,
            probe_ns,
            flip_rate: PerSpin { up: gamma_p, down: 0.0 },
            t1_ns: model.t1_ns,
            detected_rate: PerSpin {
                up: rate(Spin::Up)?,
                down: rate(Spin::Down)?,
            },
            background_rate: bg,
            afterpulse_delay_ns: 100.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.flip_rate.up,
            self.flip_rate.down,
            self.detected_rate.up,
            self.detected_rate.down,
            self.background_rate,
        ];
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("rates must be finite and >= 0".into()));
        }
        if !(self.probe_ns > 0.0) || !(self.delay_ns >= 0.0) || !(self.afterpulse_delay_ns >= 0.0) {
            return Err(Error::InvalidArgument("durations must be positive".into()));
        }
        if self.t1_ns.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidArgument("T1 must be > 0".into()));
        }
        Ok(())
    }

    fn relax_rate(&self) -> f64 {
        self.t1_ns.map_or(0.0, |t| 0.5 / t)
    }

    fn with_seed(&self, seed: u64) -> Self {
        TrajectoryConfig { seed, ..*self }
    }
}

/// One simulated probe window. Times are measured from the probe start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingRecord {
    pub clicks: Vec<f64>,
    pub flips: Vec<f64>,
    pub initial_spin: Spin,
    pub final_spin: Spin,
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = rng.sample(Exp1);
        e / rate
    } else {
        f64::INFINITY
    }
}

/// Draws one pump-delay-probe shot.
pub fn simulate_trajectory(cfg: &TrajectoryConfig, d: &DetectionChain) -> Result<CountingRecord> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = if rng.random::<f64>() < d.init_fidelity {
        cfg.pump_target
    } else {
        cfg.pump_target.flipped()
    };
    let relax = cfg.relax_rate();
    let mut spin = initial;

    // Dark delay: relaxation only.
    let mut t = -cfg.delay_ns;
    loop {
        let dt = exp_sample(&mut rng, relax);
        if t + dt >= 0.0 {
            break;
        }
        t += dt;
        spin = spin.flipped();
    }

    let dark = d.dark_rate_hz * 1e-9;
    let mut t = 0.0;
    let mut clicks = Vec::new();
    let mut flips = Vec::new();
    while t < cfg.probe_ns {
        let flip_at = t + exp_sample(&mut rng, cfg.flip_rate.get(spin) + relax);
        let end = flip_at.min(cfg.probe_ns);
        let rate = cfg.detected_rate.get(spin) + cfg.background_rate + dark;
        let mut c = t + exp_sample(&mut rng, rate);
        while c < end {
            clicks.push(c);
            c += exp_sample(&mut rng, rate);
        }
        if flip_at < cfg.probe_ns {
            flips.push(flip_at);
            spin = spin.flipped();
        }
        t = end;
    }
    let clicks = apply_detector_imperfections(
        &clicks,
        d.dead_time_ns,
        d.afterpulse_prob,
        cfg.afterpulse_delay_ns,
        &mut rng,
    );
    Ok(CountingRecord {
        clicks,
        flips,
        initial_spin: initial,
        final_spin: spin,
    })
}

#[derive(Debug, Clone, Copy)]
struct Time(f64);

impl PartialEq for Time {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Drops clicks within `dead_time` of the last accepted click. Each accepted
/// primary click triggers an after-pulse `delay` later with probability
/// `prob`; after-pulses pass through the same dead-time filter but do not
/// trigger further after-pulses.
pub fn apply_detector_imperfections<R: Rng>(
    clicks: &[f64],
    dead_time: f64,
    prob: f64,
    delay: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut queue: BinaryHeap<Reverse<(Time, bool)>> = clicks.iter().map(|&t| Reverse((Time(t), true))).collect();
    let mut out: Vec<f64> = Vec::with_capacity(clicks.len());
    while let Some(Reverse((Time(t), primary))) = queue.pop() {
        if out.last().is_some_and(|&last| t < last + dead_time || t <= last) {
            continue;
        }
        out.push(t);
        if primary && prob > 0.0 && rng.random::<f64>() < prob {
            queue.push(Reverse((Time(t + delay), false)));
        }
    }
    out
}

/// Clicks in `[0, window]`.
pub fn clicks_in_window(r: &CountingRecord, window: f64) -> u64 {
    r.clicks.iter().take_while(|&&t| t <= window).count() as u64
}

/// Records for runs `offset..offset+n`, in run order.
pub fn simulate_runs(cfg: &TrajectoryConfig, d: &DetectionChain, n: u64, offset: u64) -> Result<Vec<CountingRecord>> {
    cfg.validate()?;
    (offset..offset + n)
        .into_par_iter()
        .map(|i| simulate_trajectory(&cfg.with_seed(cfg.seed ^ i), d))
        .collect()
}

/// Registered clicks per `bin_ns` bin over `[0, bin_ns·n_bins)`, summed over
/// runs `offset..offset+n`.
pub fn click_histogram(
    cfg: &TrajectoryConfig,
    d: &DetectionChain,
    n: u64,
    offset: u64,
    bin_ns: f64,
    n_bins: usize,
) -> Result<Vec<u64>> {
    cfg.validate()?;
    if !(bin_ns > 0.0) || n_bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs bin_ns > 0 and at least one bin".into(),
        ));
    }
    (offset..offset + n)
        .into_par_iter()
        .map(|i| {
            let r = simulate_trajectory(&cfg.with_seed(cfg.seed ^ i), d)?;
            let mut h = vec![0u64; n_bins];
            for t in r.clicks {
                let k = (t / bin_ns).floor();
                if k >= 0.0 && (k as usize) < n_bins {
                    h[k as usize] += 1;
                }
            }
            Ok(h)
        })
        .try_reduce(
            || vec![0u64; n_bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Monte Carlo readout probabilities with binomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutEstimate {
    pub p_up: f64,
    pub p_down: f64,
    pub fidelity: f64,
    pub stderr_up: f64,
    pub stderr_down: f64,
    pub stderr_fidelity: f64,
    pub n_runs: u64,
    pub seed: u64,
    pub window_ns: f64,
    pub threshold: u64,
    /// Mean registered clicks per spin preparation.
    pub mean_up: f64,
    pub mean_down: f64,
}

/// Registered click counts in `[0, window]` for runs `offset..offset+n`.
pub fn window_counts(cfg: &TrajectoryConfig, d: &DetectionChain, n: u64, offset: u64, window: f64) -> Result<Vec<u64>> {
    cfg.validate()?;
    (offset..offset + n)
        .into_par_iter()
        .map(|i| {
            Ok(clicks_in_window(
                &simulate_trajectory(&cfg.with_seed(cfg.seed ^ i), d)?,
                window,
            ))
        })
        .collect()
}

/// Prepares each spin `n_runs` times, counts clicks in `[0, window]` and
/// calls spin-up on more than `threshold` clicks.
pub fn estimate_readout_probabilities(
    cfg: &TrajectoryConfig,
    d: &DetectionChain,
    n_runs: u64,
    window: f64,
    threshold: u64,
) -> Result<ReadoutEstimate> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be >= 1".into()));
    }
    let up = TrajectoryConfig {
        pump_target: Spin::Up,
        ..*cfg
    };
    let down = TrajectoryConfig {
        pump_target: Spin::Down,
        ..*cfg
    };
    let cu = window_counts(&up, d, n_runs, 0, window)?;
    let cd = window_counts(&down, d, n_runs, n_runs, window)?;
    let n = n_runs as f64;
    let p_up = cu.iter().filter(|&&c| c > threshold).count() as f64 / n;
    let p_down = cd.iter().filter(|&&c| c <= threshold).count() as f64 / n;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let (su, sd) = (se(p_up), se(p_down));
    Ok(ReadoutEstimate {
        p_up,
        p_down,
        fidelity: 0.5 * (p_up + p_down),
        stderr_up: su,
        stderr_down: sd,
        stderr_fidelity: 0.5 * (su * su + sd * sd).sqrt(),
        n_runs,
        seed: cfg.seed,
        window_ns: window,
        threshold,
        mean_up: cu.iter().sum::<u64>() as f64 / n,
        mean_down: cd.iter().sum::<u64>() as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub delay_ns: f64,
    pub mean_counts: f64,
    pub stderr: f64,
}

/// Pump to spin-down, wait `delay`, then count clicks in the first
/// `cfg.probe_ns` of the probe.
pub fn simulate_t1_experiment(
    cfg: &TrajectoryConfig,
    d: &DetectionChain,
    delays: &[f64],
    n_runs: u64,
) -> Result<Vec<RecoveryPoint>> {
    if delays.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("delays must be ascending".into()));
    }
    if n_runs < 2 {
        return Err(Error::InvalidArgument("n_runs must be >= 2".into()));
    }
    delays
        .iter()
        .enumerate()
        .map(|(k, &delay)| {
            let c = TrajectoryConfig {
                pump_target: Spin::Down,
                delay_ns: delay,
                ..*cfg
            };
            let counts = window_counts(&c, d, n_runs, k as u64 * n_runs, cfg.probe_ns)?;
            let n = n_runs as f64;
            let mean = counts.iter().sum::<u64>() as f64 / n;
            let var = counts.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(RecoveryPoint {
                delay_ns: delay,
                mean_counts: mean,
                stderr: (var / n).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal() -> DetectionChain {
        DetectionChain {
            init_fidelity: 1.0,
            ..DetectionChain::reference_device().without_backgrounds()
        }
    }

    #[test]
    fn zero_rates_give_empty_record() {
        let cfg = TrajectoryConfig::constant(3, 100.0, 0.0, 0.0);
        let r = simulate_trajectory(&cfg, &ideal()).unwrap();
        assert!(r.clicks.is_empty() && r.flips.is_empty());
    }

    #[test]
    fn same_seed_same_record() {
        let mut cfg = TrajectoryConfig::constant(42, 200.0, 0.3, 0.1);
        cfg.flip_rate.up = 0.05;
        cfg.t1_ns = Some(500.0);
        let a = simulate_trajectory(&cfg, &ideal()).unwrap();
        let b = simulate_trajectory(&cfg, &ideal()).unwrap();
        assert_eq!(a, b);
        let c = simulate_trajectory(&cfg.with_seed(43), &ideal()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn histogram_matches_records() {
        let cfg = TrajectoryConfig::constant(9, 50.0, 0.2, 0.0);
        let recs = simulate_runs(&cfg, &ideal(), 200, 0).unwrap();
        let h = click_histogram(&cfg, &ideal(), 200, 0, 10.0, 5).unwrap();
        let total: usize = recs.iter().map(|r| r.clicks.len()).sum();
        assert_eq!(h.iter().sum::<u64>() as usize, total);
        assert_eq!(recs[7], simulate_trajectory(&cfg.with_seed(9 ^ 7), &ideal()).unwrap());
    }

    #[test]
    fn dead_time_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            apply_detector_imperfections(&[0.0, 1.0, 2.0], 1.5, 0.0, 100.0, &mut rng),
            vec![0.0, 2.0]
        );
        assert_eq!(
            apply_detector_imperfections(&[0.0, 1.0, 2.0], 0.0, 0.0, 100.0, &mut rng),
            vec![0.0, 1.0, 2.0]
        );
        assert_eq!(
            apply_detector_imperfections(&[0.0], 0.0, 1.0, 100.0, &mut rng),
            vec![0.0, 100.0]
        );
    }

    #[test]
    fn dead_time_filter_is_idempotent_and_spaces_clicks() {
        let cfg = TrajectoryConfig::constant(9, 1000.0, 0.5, 0.5);
        let r = simulate_trajectory(&cfg, &ideal()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let once = apply_detector_imperfections(&r.clicks, 3.0, 0.0, 0.0, &mut rng);
        let twice = apply_detector_imperfections(&once, 3.0, 0.0, 0.0, &mut rng);
        assert_eq!(once, twice);
        assert!(once.windows(2).all(|w| w[1] - w[0] >= 3.0));
        assert!(once.len() < r.clicks.len());
    }

    #[test]
    fn first_flip_time_is_exponential() {
        let tau = 17.6;
        let mut cfg = TrajectoryConfig::constant(5, 400.0, 0.0, 0.0);
        cfg.flip_rate.up = 1.0 / tau;
        let n = 20_000u64;
        let times: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                simulate_trajectory(&cfg.with_seed(i), &ideal())
                    .unwrap()
                    .flips
                    .first()
                    .copied()
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        // Censoring at 400 ns removes a e^{-22.7} tail.
        let mean = times.iter().sum::<f64>() / n as f64;
        let se = tau / (n as f64).sqrt();
        assert!((mean - tau).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn identical_rates_give_coin_flip() {
        let cfg = TrajectoryConfig::constant(11, 50.0, 0.02, 0.02);
        let e = estimate_readout_probabilities(&cfg, &ideal(), 20_000, 50.0, 0).unwrap();
        assert!((e.fidelity - 0.5).abs() < 3.0 * e.stderr_fidelity.max(1e-3));
    }

    #[test]
    fn schedule_independent() {
        let cfg = TrajectoryConfig::constant(77, 30.0, 0.2, 0.01);
        let a = estimate_readout_probabilities(&cfg, &ideal(), 2000, 30.0, 1).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_readout_probabilities(&cfg, &ideal(), 2000, 30.0, 1).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn t1_recovery_starts_at_background() {
        let mut cfg = TrajectoryConfig::constant(4, 20.0, 0.05, 0.0);
        cfg.t1_ns = Some(1000.0);
        cfg.background_rate = 0.001;
        let pts = simulate_t1_experiment(&cfg, &ideal(), &[0.0, 20_000.0], 4000).unwrap();
        assert!((pts[0].mean_counts - 0.02).abs() < 4.0 * pts[0].stderr.max(0.003));
        // Fully relaxed: half the shots start in spin-up.
        let sat = 0.5 * 20.0 * 0.05 + 0.02;
        assert!((pts[1].mean_counts - sat).abs() < 4.0 * pts[1].stderr);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = TrajectoryConfig::constant(0, 10.0, -1.0, 0.0);
        assert!(simulate_trajectory(&cfg, &ideal()).is_err());
        cfg.detected_rate.up = 1.0;
        cfg.probe_ns = 0.0;
        assert!(simulate_trajectory(&cfg, &ideal()).is_err());
    }
}

use std::path::{Path, PathBuf};

use serde::Serialize;
use spin_readout::analytic::detuned_basis;
use spin_readout::config::{parse_config, Config, ConfigError};
use spin_readout::export::{branching_table, efficiency_table, power_window_table, records_csv, sweep_table, Table};
use spin_readout::fitting::{
    fit_exponential_decay, fit_pumping_curve, fit_saturation_recovery, read_trace, FitError, FitResult, PumpingModel,
};
use spin_readout::lindblad::{pumping_rate, reflection_spectrum, HilbertConfig};
use spin_readout::montecarlo::{
    click_histogram, estimate_readout_probabilities, simulate_runs, ReadoutEstimate, TrajectoryConfig,
};
use spin_readout::params::derive_quantities;
use spin_readout::readout::{
    efficiency_crossing, fidelity_at_threshold, required_efficiency, sweep_fidelity_vs_detuning,
    sweep_fidelity_vs_efficiency, sweep_infidelity_vs_branching, sweep_power_window, threshold_fidelity, SweepSetup,
};
use spin_readout::{Error, Spin};

use crate::grid::parse_grid;
use crate::run::{CliError, RunDir};
use crate::{Common, FitKind, Sweep};

fn load(path: &Path) -> Result<(Config, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::from(Error::Config(ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        }))
    })?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| CliError::input(format!("{}: not UTF-8 text", path.display())))?;
    let config = parse_config(&text).map_err(Error::from)?;
    Ok((config, bytes))
}

fn out_dir(out: Option<&Path>, default: &str) -> PathBuf {
    out.map_or_else(|| PathBuf::from(default), Path::to_path_buf)
}

/// Opens the run directory, loads the config and runs `body`; the manifest
/// is written whatever the outcome.
fn with_config_run(
    common: &Common,
    command: String,
    default_dir: &str,
    body: impl FnOnce(&mut RunDir, Config) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut run = RunDir::create(&out_dir(common.out.as_deref(), default_dir), command)?;
    let outcome = load(&common.config).and_then(|(mut config, bytes)| {
        run.set_config(&common.config, &bytes);
        if let Some(seed) = common.seed {
            config.run.seed = seed;
        }
        run.set_seed(config.run.seed);
        body(&mut run, config)
    });
    run.finish(outcome)
}

fn grid_or(spec: Option<&str>, default: &str) -> Result<Vec<f64>, CliError> {
    parse_grid(spec.unwrap_or(default)).map_err(CliError::input)
}

#[derive(Serialize)]
struct SpectrumSummary {
    basis_ghz: f64,
    extinction_floor: f64,
    ratio_at_zero: Option<f64>,
    /// Local extrema of each curve closest to zero detuning.
    coupled_peak_ghz: Option<f64>,
    bare_dip_ghz: Option<f64>,
    reference_ratio_at_zero: f64,
}

/// Interior local maximum (`sign = 1`) or minimum (`sign = −1`) of `v`
/// closest to `x = 0`.
fn nearest_extremum(x: &[f64], v: &[f64], sign: f64) -> Option<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    order
        .windows(3)
        .filter(|w| sign * (v[w[1]] - v[w[0]]) > 0.0 && sign * (v[w[1]] - v[w[2]]) > 0.0)
        .map(|w| x[w[1]])
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
}

pub fn spectrum(common: &Common, grid: &str, basis_ghz: f64) -> Result<(), CliError> {
    with_config_run(common, "spectrum".into(), "readout-spectrum", |run, config| {
        let grid = parse_grid(grid).map_err(CliError::input)?;
        let p = config.system;
        let floor = config.chain.extinction_floor;
        let s = reflection_spectrum(&p, detuned_basis(basis_ghz, p.kappa), &grid, floor)?;
        let mut t = Table::new(&["delta_ghz", "bare", "coupled", "ratio"]);
        for k in 0..s.delta.len() {
            t.push(vec![s.delta[k], s.bare[k], s.coupled[k], s.coupled[k] / s.bare[k]]);
        }
        run.write_table("spectrum.csv", &t)?;
        let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        run.write_json(
            "summary.json",
            &SpectrumSummary {
                basis_ghz,
                extinction_floor: floor,
                ratio_at_zero: (lo <= 0.0 && hi >= 0.0).then(|| s.ratio_at(0.0)).flatten(),
                coupled_peak_ghz: nearest_extremum(&s.delta, &s.coupled, 1.0),
                bare_dip_ghz: nearest_extremum(&s.delta, &s.bare, -1.0),
                reference_ratio_at_zero: 16.0,
            },
        )
    })
}

fn sweep_name(s: Sweep) -> &'static str {
    match s {
        Sweep::Detuning => "detuning",
        Sweep::Efficiency => "efficiency",
        Sweep::Branching => "branching",
        Sweep::PowerWindow => "power-window",
    }
}

#[derive(Serialize)]
struct DetuningSummary {
    best_detuning_ghz: f64,
    best_fidelity: f64,
    best_window_ns: f64,
    fidelity_at_zero: Option<f64>,
    /// `F` strictly decreases with `|Δ|` across the grid.
    decreasing_in_abs_detuning: bool,
    reference_fidelity_at_zero: f64,
}

#[derive(Serialize)]
struct EfficiencySummary {
    target: f64,
    crossing_eta: Option<f64>,
    crossing_error: Option<String>,
    bare_required_eta: Option<f64>,
    branching_ratio: f64,
    configured_eta: f64,
    reference_crossing_eta: f64,
}

#[derive(Serialize)]
struct BranchingSummary {
    eta: f64,
    r_b_min: f64,
    cavity_infidelity_at_min: f64,
    bare_infidelity_at_min: f64,
    cavity_below_bare: bool,
    reference_infidelity_band: [f64; 2],
}

#[derive(Serialize)]
struct PowerWindowSummary {
    best_power_nw: f64,
    best_window_ns: f64,
    best_fidelity: f64,
    optimal_windows_ns: Vec<f64>,
    reference_optimal_power_nw: f64,
}

pub fn fidelity(
    common: &Common,
    sweep: Sweep,
    grid: Option<&str>,
    windows: &str,
    eta: Option<f64>,
    target: f64,
) -> Result<(), CliError> {
    let name = sweep_name(sweep);
    let dir = format!("readout-fidelity-{name}");
    with_config_run(common, format!("fidelity --sweep {name}"), &dir, |run, config| {
        let setup = SweepSetup::from_config(&config);
        match sweep {
            Sweep::Detuning => {
                let grid = grid_or(grid, "-15:15:5")?;
                let pts = sweep_fidelity_vs_detuning(&setup, &grid)?;
                run.write_table("fidelity_vs_detuning.csv", &sweep_table("delta_ghz", &pts))?;
                let best = pts
                    .iter()
                    .max_by(|a, b| a.result.fidelity.total_cmp(&b.result.fidelity))
                    .expect("nonempty grid");
                let decreasing = pts.iter().all(|a| {
                    pts.iter()
                        .filter(|b| b.x.abs() > a.x.abs())
                        .all(|b| b.result.fidelity < a.result.fidelity)
                });
                run.write_json(
                    "summary.json",
                    &DetuningSummary {
                        best_detuning_ghz: best.x,
                        best_fidelity: best.result.fidelity,
                        best_window_ns: best.result.window_ns,
                        fidelity_at_zero: pts.iter().find(|p| p.x == 0.0).map(|p| p.result.fidelity),
                        decreasing_in_abs_detuning: decreasing,
                        reference_fidelity_at_zero: 0.61,
                    },
                )
            }
            Sweep::Efficiency => {
                let grid = grid_or(grid, "log:0.001:1:31")?;
                let pts = sweep_fidelity_vs_efficiency(&setup, &grid)?;
                run.write_table("fidelity_vs_efficiency.csv", &efficiency_table(&pts))?;
                let r_b = derive_quantities(&setup.params).branching_ratio;
                let (crossing_eta, crossing_error) = match efficiency_crossing(&setup, target) {
                    Ok(e) => (Some(e), None),
                    Err(e @ Error::Unattainable { .. }) => (None, Some(e.to_string())),
                    Err(e) => return Err(e.into()),
                };
                run.write_json(
                    "summary.json",
                    &EfficiencySummary {
                        target,
                        crossing_eta,
                        crossing_error,
                        bare_required_eta: required_efficiency(target, r_b).ok(),
                        branching_ratio: r_b,
                        configured_eta: setup.chain.eta_out(),
                        reference_crossing_eta: 0.017,
                    },
                )
            }
            Sweep::Branching => {
                let grid = grid_or(grid, "log:0.001:0.5:28")?;
                let eta = eta.unwrap_or_else(|| setup.chain.eta_out());
                let pts = sweep_infidelity_vs_branching(&setup, &grid, eta)?;
                run.write_table("infidelity_vs_branching.csv", &branching_table(&pts))?;
                let first = pts
                    .iter()
                    .min_by(|a, b| a.r_b.total_cmp(&b.r_b))
                    .expect("nonempty grid");
                run.write_json(
                    "summary.json",
                    &BranchingSummary {
                        eta,
                        r_b_min: first.r_b,
                        cavity_infidelity_at_min: first.cavity_infidelity(),
                        bare_infidelity_at_min: first.bare_infidelity,
                        cavity_below_bare: pts.iter().all(|p| p.cavity_infidelity() <= p.bare_infidelity),
                        reference_infidelity_band: [1e-4, 1e-3],
                    },
                )
            }
            Sweep::PowerWindow => {
                let powers = grid_or(grid, "log:1:1000:10")?;
                let windows = parse_grid(windows).map_err(CliError::input)?;
                let map = sweep_power_window(&setup, &powers, &windows)?;
                run.write_table("fidelity_power_window.csv", &power_window_table(&map))?;
                run.write_json(
                    "summary.json",
                    &PowerWindowSummary {
                        best_power_nw: map.best_power,
                        best_window_ns: map.best_window,
                        best_fidelity: map.best_fidelity,
                        optimal_windows_ns: map.optimal_windows(),
                        reference_optimal_power_nw: 50.0,
                    },
                )
            }
        }
    })
}

pub struct McFlags {
    pub runs: u64,
    pub window: f64,
    pub probe_ns: f64,
    pub pump_time_ns: Option<f64>,
    pub bin_ns: f64,
    pub records: u64,
}

#[derive(Serialize)]
struct McSummary {
    #[serde(rename = "P_up")]
    p_up: f64,
    #[serde(rename = "P_down")]
    p_down: f64,
    #[serde(rename = "F")]
    fidelity: f64,
    stderr: f64,
    n_runs: u64,
    seed: u64,
    estimate: ReadoutEstimate,
    /// Master-equation expected counts in the window.
    model_n_up: f64,
    model_n_down: f64,
    /// Poisson threshold fidelity from the master-equation counts.
    model_fidelity: f64,
    /// Poisson threshold fidelity from the simulated mean counts.
    poisson_fidelity_at_simulated_means: f64,
    pumping_rate_per_ns: f64,
    trajectory: TrajectoryConfig,
}

pub fn montecarlo(common: &Common, f: &McFlags) -> Result<(), CliError> {
    with_config_run(common, "montecarlo".into(), "readout-montecarlo", |run, config| {
        if f.runs == 0 {
            return Err(CliError::input("--runs must be >= 1"));
        }
        if !(f.window > 0.0 && f.probe_ns >= f.window) {
            return Err(CliError::input("need window > 0 and probe_ns >= window"));
        }
        let setup = SweepSetup::from_config(&config);
        let model = setup.model();
        let p = config.system;
        let gamma_p = match f.pump_time_ns {
            Some(t) if t > 0.0 => 1.0 / t,
            Some(t) => return Err(CliError::input(format!("--pump-time-ns must be > 0, got {t}"))),
            None if setup.power_nw > 0.0 => {
                pumping_rate(&p, config.chain.beta_prime, setup.power_nw, &setup.engine)?.value
            }
            None => 0.0,
        };
        let h = HilbertConfig::new(setup.engine.n_max)?;
        let mut cfg = TrajectoryConfig::from_count_model(&model, h, gamma_p, f.probe_ns, config.run.seed)?;
        cfg.afterpulse_delay_ns = config.run.afterpulse_delay_ns;

        let n_up = model.accumulated_counts(&setup.engine, Spin::Up, f.window)?;
        let n_down = model.accumulated_counts(&setup.engine, Spin::Down, f.window)?;
        let predicted = threshold_fidelity(n_up, n_down)?;
        let chain = config.chain;
        let est = estimate_readout_probabilities(&cfg, &chain, f.runs, f.window, predicted.threshold)?;

        let n_bins = (f.probe_ns / f.bin_ns).floor() as usize;
        let hist = click_histogram(&cfg, &chain, f.runs, 0, f.bin_ns, n_bins)?;
        let norm = f.runs as f64 * f.bin_ns;
        let mut trace = Table::new(&["t_ns", "rate_per_ns", "sigma"]);
        for (k, c) in hist.iter().enumerate() {
            let c = *c as f64;
            trace.push(vec![(k as f64 + 0.5) * f.bin_ns, c / norm, c.max(1.0).sqrt() / norm]);
        }
        run.write_table("time_trace.csv", &trace)?;
        run.write_text(
            "records.csv",
            &records_csv(&simulate_runs(&cfg, &chain, f.records.min(f.runs), 0)?),
        )?;
        run.write_json(
            "summary.json",
            &McSummary {
                p_up: est.p_up,
                p_down: est.p_down,
                fidelity: est.fidelity,
                stderr: est.stderr_fidelity,
                n_runs: est.n_runs,
                seed: est.seed,
                estimate: est,
                model_n_up: n_up,
                model_n_down: n_down,
                model_fidelity: predicted.fidelity,
                poisson_fidelity_at_simulated_means: fidelity_at_threshold(est.mean_up, est.mean_down, est.threshold)
                    .fidelity,
                pumping_rate_per_ns: gamma_p,
                trajectory: cfg,
            },
        )
    })
}

#[derive(Serialize)]
struct FitSummary {
    kind: &'static str,
    n_points: usize,
    result: FitResult,
}

fn kind_name(k: FitKind) -> &'static str {
    match k {
        FitKind::ExpDecay => "exp-decay",
        FitKind::SaturationRecovery => "saturation-recovery",
        FitKind::Pumping => "pumping",
    }
}

pub fn fit(config: Option<&Path>, out: Option<&Path>, kind: FitKind, input: &Path) -> Result<(), CliError> {
    let name = kind_name(kind);
    let mut run = RunDir::create(
        &out_dir(out, &format!("readout-fit-{name}")),
        format!("fit --kind {name}"),
    )?;
    let outcome = (|| {
        let config = match config {
            Some(path) => {
                let (c, bytes) = load(path)?;
                run.set_config(path, &bytes);
                Some(c)
            }
            None => None,
        };
        let trace = read_trace(input)?;
        let sigma = trace.sigma.as_deref();
        let (result, model_y): (FitResult, Vec<f64>) = match kind {
            FitKind::ExpDecay => {
                let r = fit_exponential_decay(&trace.x, &trace.y, sigma)?;
                let (a, tau, b) = (r.value("A"), r.value("tau"), r.value("B"));
                let y = trace.x.iter().map(|t| a * (-t / tau).exp() + b).collect();
                (r, y)
            }
            FitKind::SaturationRecovery => {
                let r = fit_saturation_recovery(&trace.x, &trace.y, sigma)?;
                let (t1, a, b) = (r.value("T1"), r.value("A"), r.value("B"));
                let y = trace.x.iter().map(|t| a * (1.0 - (-t / t1).exp()) + b).collect();
                (r, y)
            }
            FitKind::Pumping => {
                let c = config.ok_or_else(|| CliError::input("pumping fits need --config"))?;
                let model = PumpingModel::new(c.system, SweepSetup::from_config(&c).engine);
                let r = fit_pumping_curve(&model, &trace.x, &trace.y)?;
                let (g, b) = (r.value("gamma_cross_ghz"), r.value("beta_prime"));
                let y = trace
                    .x
                    .iter()
                    .map(|p| model.rate(g, b, *p))
                    .collect::<Result<Vec<_>, FitError>>()?;
                (r, y)
            }
        };
        let mut t = Table::new(&["x", "y", "model"]);
        for ((x, y), m) in trace.x.iter().zip(&trace.y).zip(&model_y) {
            t.push(vec![*x, *y, *m]);
        }
        run.write_table("fit_curve.csv", &t)?;
        let converged = result.converged;
        let (iterations, rss) = (result.iterations, result.rss);
        run.write_json(
            "summary.json",
            &FitSummary {
                kind: name,
                n_points: trace.x.len(),
                result,
            },
        )?;
        if !converged {
            return Err(FitError::NonConvergence { iterations, rss }.into());
        }
        Ok(())
    })();
    run.finish(outcome)
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spin_readout::config::DEVICE_CFG;
use spin_readout::fitting::PumpingModel;
use spin_readout::lindblad::EngineOptions;
use spin_readout::SystemParams;
use tempfile::TempDir;

fn readout(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_readout"))
        .args(args)
        .env("READOUT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = DEVICE_CFG.to_string();
    for (from, to) in edits {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: impl AsRef<Path>) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn spectrum_writes_manifest_and_peaks_at_resonance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let out = tmp.path().join("run");
    let o = readout(&["spectrum", "--config", s(&cfg), "--out", s(&out), "--grid=-40:40:5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(out.join("manifest.json"));
    let outputs: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    for f in &outputs {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(outputs.contains(&"spectrum.csv") && outputs.contains(&"summary.json"));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["coupled_peak_ghz"], 0.0);
    assert_eq!(sum["bare_dip_ghz"], 0.0);
    assert!(sum["ratio_at_zero"].as_f64().unwrap() > 5.0);
}

#[test]
fn uncoupled_spectrum_curves_coincide() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g0.cfg", &[("g_ghz = 10.2", "g_ghz = 0")]);
    let out = tmp.path().join("run");
    let o = readout(&["spectrum", "--config", s(&cfg), "--out", s(&out), "--grid=-30:30:10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for row in read_csv(out.join("spectrum.csv")) {
        assert!((row[1] - row[2]).abs() <= 1e-9 * row[1], "{row:?}");
    }
}

#[test]
fn montecarlo_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = readout(&[
            "montecarlo",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--runs",
            "20000",
            "--seed",
            "11",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["summary.json", "time_trace.csv", "records.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (ma, mb) = (json(a.join("manifest.json")), json(b.join("manifest.json")));
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    assert_eq!(ma["seed"], 11);
    let sum = json(a.join("summary.json"));
    assert_eq!(sum["seed"], 11);
    assert_eq!(sum["n_runs"], 20000);
}

/// Exact fidelity of the two-state model at threshold 0: the spin-up count
/// is Poisson only conditional on the flip time, which is integrated out.
fn two_state_fidelity_threshold0(t: &Value, init: f64, window: f64) -> f64 {
    let (ru, rd) = (
        t["detected_rate"]["up"].as_f64().unwrap(),
        t["detected_rate"]["down"].as_f64().unwrap(),
    );
    let (bg, g) = (
        t["background_rate"].as_f64().unwrap(),
        t["flip_rate"]["up"].as_f64().unwrap(),
    );
    let k = ru - rd + g;
    let base = (-(bg + rd) * window).exp();
    let p0_up = base * (g / k * (1.0 - (-k * window).exp()) + (-k * window).exp());
    let p0_down = base;
    let p_up = 1.0 - (init * p0_up + (1.0 - init) * p0_down);
    let p_down = init * p0_down + (1.0 - init) * p0_up;
    0.5 * (p_up + p_down)
}

#[test]
fn montecarlo_matches_two_state_counting_law() {
    let tmp = TempDir::new().unwrap();
    // T1 is left out so the closed form above is exact.
    let cfg = write_config(tmp.path(), "device.cfg", &[("t1_ns = 2210", "t1_ns = 0")]);
    let out = tmp.path().join("run");
    let o = readout(&["montecarlo", "--config", s(&cfg), "--out", s(&out), "--runs", "100000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sum = json(out.join("summary.json"));
    assert_eq!(sum["estimate"]["threshold"], 0);
    let exact = two_state_fidelity_threshold0(&sum["trajectory"], 0.95, 75.0);
    let (f, se) = (sum["F"].as_f64().unwrap(), sum["stderr"].as_f64().unwrap());
    assert!((f - exact).abs() < 3.0 * se, "{f} vs {exact} ± {se}");
}

/// Poisson statistics at the master-equation means overstate the fidelity
/// because the flip time is random; see the decisions ledger.
#[test]
#[ignore = "Poisson threshold prediction differs from the flipping-spin simulation by ~14σ"]
fn montecarlo_within_three_sigma_of_poisson_prediction() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let out = tmp.path().join("run");
    let o = readout(&["montecarlo", "--config", s(&cfg), "--out", s(&out), "--runs", "100000"]);
    assert_eq!(code(&o), 0);
    let sum = json(out.join("summary.json"));
    let (f, se, pred) = (
        sum["F"].as_f64().unwrap(),
        sum["stderr"].as_f64().unwrap(),
        sum["model_fidelity"].as_f64().unwrap(),
    );
    assert!((f - pred).abs() < 3.0 * se, "{f} vs {pred} ± {se}");
}

#[test]
fn montecarlo_without_probe_is_a_coin_toss() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "dark.cfg", &[("probe_power_nw = 50", "probe_power_nw = 0")]);
    let out = tmp.path().join("run");
    let o = readout(&["montecarlo", "--config", s(&cfg), "--out", s(&out), "--runs", "5000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sum = json(out.join("summary.json"));
    let (f, se) = (sum["F"].as_f64().unwrap(), sum["stderr"].as_f64().unwrap());
    assert!((f - 0.5).abs() <= 3.0 * se.max(1e-12), "{f} ± {se}");
}

#[test]
fn simulated_decay_trace_fits_back() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let mc = tmp.path().join("mc");
    let o = readout(&[
        "montecarlo",
        "--config",
        s(&cfg),
        "--out",
        s(&mc),
        "--runs",
        "100000",
        "--pump-time-ns",
        "17.6",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = tmp.path().join("fit");
    let trace = mc.join("time_trace.csv");
    let o = readout(&["fit", "--kind", "exp-decay", "--input", s(&trace), "--out", s(&fit)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = &json(fit.join("summary.json"))["result"];
    let tau = r["params"][1]["value"].as_f64().unwrap();
    assert_eq!(r["params"][1]["name"], "tau");
    // T1 adds 1/(2 T1) to the decay rate.
    let expected = 1.0 / (1.0 / 17.6 + 0.5 / 2210.0);
    assert!((tau / expected - 1.0).abs() < 0.03, "{tau}");
}

#[test]
fn pumping_curve_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let model = PumpingModel::new(SystemParams::reference_device(), EngineOptions::default());
    let mut csv = String::from("power_nw,rate_per_ns\n");
    for p in [1.0, 3.0, 10.0, 30.0, 100.0, 300.0] {
        csv += &format!("{p},{:.17e}\n", model.rate(0.075, 0.045, p).unwrap());
    }
    let input = tmp.path().join("pumping.csv");
    std::fs::write(&input, csv).unwrap();
    let before = std::fs::read(&input).unwrap();
    let out = tmp.path().join("fit");
    let o = readout(&[
        "fit",
        "--kind",
        "pumping",
        "--config",
        s(&cfg),
        "--input",
        s(&input),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&input).unwrap(), before);
    let r = &json(out.join("summary.json"))["result"];
    let g = r["params"][0]["value"].as_f64().unwrap();
    let b = r["params"][1]["value"].as_f64().unwrap();
    assert!((g / 0.075 - 1.0).abs() < 0.05, "{g}");
    assert!((b / 0.045 - 1.0).abs() < 0.05, "{b}");
}

#[test]
fn fidelity_sweeps_report_summaries() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let run = |sweep: &str, extra: &[&str]| {
        let out = tmp.path().join(sweep);
        let mut args = vec!["fidelity", "--sweep", sweep, "--config", s(&cfg), "--out", s(&out)];
        args.extend(extra);
        let o = readout(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let eff = json(run("efficiency", &["--grid", "log:0.001:1:7"]).join("summary.json"));
    let eta = eff["crossing_eta"].as_f64().unwrap();
    assert!((0.011..=0.026).contains(&eta), "{eta}");

    let br = run("branching", &["--grid", "0.001,0.1,0.43"]);
    let rows = read_csv(br.join("infidelity_vs_branching.csv"));
    let header = std::fs::read_to_string(br.join("infidelity_vs_branching.csv")).unwrap();
    assert!(header.starts_with("R_B,") && header.contains("D_cavity") && header.contains("D_bare"));
    assert_eq!(rows.len(), 3);

    let det = json(run("detuning", &["--grid", "0:15:5"]).join("summary.json"));
    assert_eq!(det["best_detuning_ghz"], 0.0);
    assert_eq!(det["decreasing_in_abs_detuning"], true);

    let pw = json(run("power-window", &["--grid", "10,50,200", "--windows", "20:200:20"]).join("summary.json"));
    assert_eq!(pw["optimal_windows_ns"].as_array().unwrap().len(), 3);
}

#[test]
fn uncoupled_detuning_sweep_is_flat() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "g0.cfg", &[("g_ghz = 10.2", "g_ghz = 0")]);
    let out = tmp.path().join("run");
    let o = readout(&[
        "fidelity",
        "--sweep",
        "detuning",
        "--grid",
        "0:10:5",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for row in read_csv(out.join("fidelity_vs_detuning.csv")) {
        assert!((row[1] - 0.5).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let missing = tmp.path().join("missing.cfg");
    assert_eq!(
        code(&readout(&["spectrum", "--config", s(&missing), "--out", s(&out)])),
        2
    );

    let bad = write_config(tmp.path(), "bad.cfg", &[("kappa_ghz = 33.5", "kappa_ghz = -1")]);
    assert_eq!(code(&readout(&["spectrum", "--config", s(&bad), "--out", s(&out)])), 2);
    assert_eq!(json(out.join("manifest.json"))["exit_code"], 2);

    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(
        code(&readout(&[
            "fit",
            "--kind",
            "exp-decay",
            "--input",
            s(&empty),
            "--out",
            s(&out)
        ])),
        2
    );

    let garbled = tmp.path().join("garbled.csv");
    std::fs::write(&garbled, "t,y\n0,1\n1,oops\n").unwrap();
    assert_eq!(
        code(&readout(&[
            "fit",
            "--kind",
            "saturation",
            "--input",
            s(&garbled),
            "--out",
            s(&out)
        ])),
        2
    );

    let flat = tmp.path().join("flat.csv");
    std::fs::write(&flat, "0,1\n1,1\n2,1\n3,1\n4,1\n").unwrap();
    let o = readout(&["fit", "--kind", "exp-decay", "--input", s(&flat), "--out", s(&out)]);
    assert_eq!(code(&o), 4);
    assert!(!o.stderr.is_empty());

    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    assert_eq!(
        code(&readout(&[
            "montecarlo",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--runs",
            "0"
        ])),
        2
    );
    assert_eq!(code(&readout(&["fidelity", "--sweep", "nope", "--config", s(&cfg)])), 2);
    assert_eq!(
        code(&readout(&[
            "spectrum",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--grid",
            "a:b"
        ])),
        2
    );
}

#[test]
fn bad_thread_count_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "device.cfg", &[]);
    let o = Command::new(env!("CARGO_BIN_EXE_readout"))
        .args([
            "spectrum",
            "--config",
            s(&cfg),
            "--out",
            s(&tmp.path().join("r")),
            "--grid",
            "0",
        ])
        .env("READOUT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment. Unknown keys, duplicated
//! keys and values that do not parse are rejected with the key name and the
//! 1-based line number. Required keys:
//!
//! `g_ghz kappa_ghz alpha gamma_rad_ghz gamma_cross_ghz gamma_dephasing_ghz
//! beta beta_prime eta_optics eta_det extinction_floor init_fidelity`
//!
//! Optional keys and their defaults:
//!
//! | key | default |
//! |---|---|
//! | `delta_c_ghz`, `delta_x_ghz` | 0 |
//! | `wavelength_nm` | 928 |
//! | `dead_time_ns`, `dark_rate_hz`, `afterpulse_prob` | 0 |
//! | `probe_power_nw` | 50 |
//! | `n_max` | 3 |
//! | `t1_ns` | 2210 (`0` disables intrinsic relaxation) |
//! | `seed` | 0 |
//! | `afterpulse_delay_ns` | 100 |
//! | `window_step_ns` | 1 |
//! | `window_max_ns` | 400 |
//! | `truncation_tol` | 1e-6 |

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{validate, DetectionChain, SystemParams};

/// The bundled device configuration.
pub const DEVICE_CFG: &str = include_str!("../../../device_paper.cfg");

const REQUIRED: &[&str] = &[
    "g_ghz",
    "kappa_ghz",
    "alpha",
    "gamma_rad_ghz",
    "gamma_cross_ghz",
    "gamma_dephasing_ghz",
    "beta",
    "beta_prime",
    "eta_optics",
    "eta_det",
    "extinction_floor",
    "init_fidelity",
];

const OPTIONAL: &[&str] = &[
    "delta_c_ghz",
    "delta_x_ghz",
    "wavelength_nm",
    "dead_time_ns",
    "dark_rate_hz",
    "afterpulse_prob",
    "probe_power_nw",
    "n_max",
    "t1_ns",
    "seed",
    "afterpulse_delay_ns",
    "window_step_ns",
    "window_max_ns",
    "truncation_tol",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },

    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("line {line}: key `{key}` repeated (first set on line {first})")]
    Duplicate { key: String, line: usize, first: usize },

    #[error("line {line}: key `{key}` expects {expected}, got `{value}`")]
    Type {
        key: String,
        line: usize,
        expected: &'static str,
        value: String,
    },

    #[error("missing required keys: {}", .keys.join(", "))]
    Missing { keys: Vec<String> },

    #[error("invalid values: {0}")]
    Invalid(String),
}

/// Run options carried alongside the device description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub probe_power_nw: f64,
    pub n_max: usize,
    /// Intrinsic spin relaxation time; `None` disables it.
    pub t1_ns: Option<f64>,
    pub seed: u64,
    pub afterpulse_delay_ns: f64,
    pub window_step_ns: f64,
    pub window_max_ns: f64,
    pub truncation_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            probe_power_nw: 50.0,
            n_max: 3,
            t1_ns: Some(2210.0),
            seed: 0,
            afterpulse_delay_ns: 100.0,
            window_step_ns: 1.0,
            window_max_ns: 400.0,
            truncation_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub system: SystemParams,
    pub chain: DetectionChain,
    pub run: RunOptions,
}

impl Config {
    pub fn reference() -> Self {
        parse_config(DEVICE_CFG).expect("bundled config is valid")
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Table(BTreeMap<String, Entry>);

impl Table {
    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<f64>().map_err(|_| ConfigError::Type {
                key: key.to_string(),
                line: e.line,
                expected: "a number",
                value: e.value.clone(),
            }),
        }
    }

    fn req(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key, f64::NAN)
    }

    fn uint<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<T>().map_err(|_| ConfigError::Type {
                key: key.to_string(),
                line: e.line,
                expected: "a non-negative integer",
                value: e.value.clone(),
            }),
        }
    }
}

fn tokenize(text: &str) -> Result<Table, ConfigError> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: body.to_string(),
            });
        };
        let key = k.trim();
        let value = v.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: body.to_string(),
            });
        }
        if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        if let Some(prev) = map.get(key) {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                line,
                first: prev.line,
            });
        }
        map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(Table(map))
}

/// Parses configuration text. Values are range-checked with
/// [`validate`](crate::params::validate) after parsing.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let t = tokenize(text)?;
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|k| !t.0.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing { keys: missing });
    }

    let system = SystemParams {
        g: t.req("g_ghz")?,
        kappa: t.req("kappa_ghz")?,
        alpha: t.req("alpha")?,
        gamma_rad: t.req("gamma_rad_ghz")?,
        gamma_cross: t.req("gamma_cross_ghz")?,
        gamma_dephasing: t.req("gamma_dephasing_ghz")?,
        delta_c: t.f64("delta_c_ghz", 0.0)?,
        delta_x: t.f64("delta_x_ghz", 0.0)?,
        wavelength_nm: t.f64("wavelength_nm", 928.0)?,
    };
    let chain = DetectionChain {
        beta: t.req("beta")?,
        beta_prime: t.req("beta_prime")?,
        eta_optics: t.req("eta_optics")?,
        eta_det: t.req("eta_det")?,
        dead_time_ns: t.f64("dead_time_ns", 0.0)?,
        dark_rate_hz: t.f64("dark_rate_hz", 0.0)?,
        afterpulse_prob: t.f64("afterpulse_prob", 0.0)?,
        extinction_floor: t.req("extinction_floor")?,
        init_fidelity: t.req("init_fidelity")?,
    };
    let d = RunOptions::default();
    let t1 = t.f64("t1_ns", 2210.0)?;
    let run = RunOptions {
        probe_power_nw: t.f64("probe_power_nw", d.probe_power_nw)?,
        n_max: t.uint("n_max", d.n_max)?,
        t1_ns: if t1 > 0.0 { Some(t1) } else { None },
        seed: t.uint("seed", d.seed)?,
        afterpulse_delay_ns: t.f64("afterpulse_delay_ns", d.afterpulse_delay_ns)?,
        window_step_ns: t.f64("window_step_ns", d.window_step_ns)?,
        window_max_ns: t.f64("window_max_ns", d.window_max_ns)?,
        truncation_tol: t.f64("truncation_tol", d.truncation_tol)?,
    };

    let mut report = validate(&system, &chain, false);
    let mut extra = Vec::new();
    if !(run.probe_power_nw.is_finite() && run.probe_power_nw >= 0.0) {
        extra.push("probe_power_nw: must be finite and >= 0".to_string());
    }
    if run.n_max < 1 {
        extra.push("n_max: must be >= 1".to_string());
    }
    if !t1.is_finite() || t1 < 0.0 {
        extra.push("t1_ns: must be finite and >= 0".to_string());
    }
    if !(run.window_step_ns > 0.0 && run.window_max_ns >= run.window_step_ns) {
        extra.push("window_step_ns/window_max_ns: need 0 < step <= max".to_string());
    }
    if !(run.afterpulse_delay_ns >= 0.0) {
        extra.push("afterpulse_delay_ns: must be >= 0".to_string());
    }
    if !(run.truncation_tol > 0.0) {
        extra.push("truncation_tol: must be > 0".to_string());
    }
    if !report.is_valid() || !extra.is_empty() {
        let mut parts: Vec<String> = report
            .violations
            .drain(..)
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        parts.extend(extra);
        return Err(ConfigError::Invalid(parts.join("; ")));
    }
    Ok(Config { system, chain, run })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}

impl fmt::Display for Config {
    /// Writes the configuration back in the file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.system;
        let c = &self.chain;
        let r = &self.run;
        let rows: [(&str, f64); 22] = [
            ("g_ghz", s.g),
            ("kappa_ghz", s.kappa),
            ("alpha", s.alpha),
            ("gamma_rad_ghz", s.gamma_rad),
            ("gamma_cross_ghz", s.gamma_cross),
            ("gamma_dephasing_ghz", s.gamma_dephasing),
            ("delta_c_ghz", s.delta_c),
            ("delta_x_ghz", s.delta_x),
            ("wavelength_nm", s.wavelength_nm),
            ("beta", c.beta),
            ("beta_prime", c.beta_prime),
            ("eta_optics", c.eta_optics),
            ("eta_det", c.eta_det),
            ("dead_time_ns", c.dead_time_ns),
            ("dark_rate_hz", c.dark_rate_hz),
            ("afterpulse_prob", c.afterpulse_prob),
            ("extinction_floor", c.extinction_floor),
            ("init_fidelity", c.init_fidelity),
            ("probe_power_nw", r.probe_power_nw),
            ("t1_ns", r.t1_ns.unwrap_or(0.0)),
            ("afterpulse_delay_ns", r.afterpulse_delay_ns),
            ("window_step_ns", r.window_step_ns),
        ];
        for (k, v) in rows {
            writeln!(f, "{k} = {v:?}")?;
        }
        writeln!(f, "window_max_ns = {:?}", r.window_max_ns)?;
        writeln!(f, "truncation_tol = {:?}", r.truncation_tol)?;
        writeln!(f, "n_max = {}", r.n_max)?;
        writeln!(f, "seed = {}", r.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_device() {
        let cfg = parse_config(DEVICE_CFG).unwrap();
        assert_eq!(cfg.system, SystemParams::reference_device());
        assert!((cfg.chain.eta_out() - 0.0041).abs() < 5e-5);
        assert_eq!(cfg.chain.init_fidelity, 0.95);
        assert_eq!(cfg.run.n_max, 3);
    }

    #[test]
    fn empty_file_lists_required_keys() {
        match parse_config("") {
            Err(ConfigError::Missing { keys }) => assert_eq!(keys.len(), REQUIRED.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_only_reports_missing_g_and_kappa() {
        match parse_config("alpha=0.92\n") {
            Err(ConfigError::Missing { keys }) => {
                assert!(keys.contains(&"g_ghz".to_string()));
                assert!(keys.contains(&"kappa_ghz".to_string()));
                assert!(!keys.contains(&"alpha".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = format!("{DEVICE_CFG}\ncolour = blue\n");
        match parse_config(&text) {
            Err(ConfigError::UnknownKey { key, line }) => {
                assert_eq!(key, "colour");
                assert_eq!(line, DEVICE_CFG.lines().count() + 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let text = DEVICE_CFG.replace("alpha = 0.92", "alpha = lots");
        match parse_config(&text) {
            Err(ConfigError::Type { key, value, .. }) => {
                assert_eq!(key, "alpha");
                assert_eq!(value, "lots");
            }
            other => panic!("{other:?}"),
        }
        let text = DEVICE_CFG.replace("n_max = 3", "n_max = 2.5");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Type { ref key, .. }) if key == "n_max"
        ));
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{DEVICE_CFG}\nalpha = 0.9\n");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Duplicate { ref key, .. }) if key == "alpha"
        ));
    }

    #[test]
    fn out_of_range_value_rejected() {
        let text = DEVICE_CFG.replace("alpha = 0.92", "alpha = 1.2");
        match parse_config(&text) {
            Err(ConfigError::Invalid(msg)) => assert!(msg.contains("alpha"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        let cfg = Config::reference();
        let again = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn zero_t1_disables_relaxation() {
        let text = DEVICE_CFG.replace("t1_ns = 2210", "t1_ns = 0");
        assert_eq!(parse_config(&text).unwrap().run.t1_ns, None);
    }
}

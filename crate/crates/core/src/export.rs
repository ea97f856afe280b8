//! Plain-text artifacts: CSV tables with 17 significant digits and JSON
//! summaries, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::lindblad::TrajectoryRow;
use crate::montecarlo::CountingRecord;
use crate::readout::{BranchingPoint, EfficiencyPoint, FidelityResult, PowerWindowMap, SweepPoint};

/// Formats a float as `{:.16e}`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value))?;
    Ok(())
}

pub fn trajectory_table(rows: &[TrajectoryRow]) -> Table {
    let mut t = Table::new(&["t_ns", "P1", "P2", "P3", "n_photon", "flux_detected"]);
    for r in rows {
        t.push(vec![r.t_ns, r.p1, r.p2, r.p3, r.n_photon, r.flux_detected]);
    }
    t
}

const FIDELITY_COLUMNS: [&str; 5] = ["F", "P_up", "P_down", "T_star_ns", "M"];

fn fidelity_cells(r: &FidelityResult) -> [f64; 5] {
    [r.fidelity, r.p_up, r.p_down, r.window_ns, r.threshold as f64]
}

/// One row per swept value: `x, F, P_up, P_down, T_star_ns, M`.
pub fn sweep_table(variable: &str, points: &[SweepPoint]) -> Table {
    let mut header = vec![variable];
    header.extend(FIDELITY_COLUMNS);
    let mut t = Table::new(&header);
    for p in points {
        let mut row = vec![p.x];
        row.extend(fidelity_cells(&p.result));
        t.push(row);
    }
    t
}

pub fn efficiency_table(points: &[EfficiencyPoint]) -> Table {
    let mut header = vec!["eta"];
    header.extend(FIDELITY_COLUMNS);
    header.push("F_bare");
    let mut t = Table::new(&header);
    for p in points {
        let mut row = vec![p.eta];
        row.extend(fidelity_cells(&p.cavity));
        row.push(p.bare);
        t.push(row);
    }
    t
}

pub fn branching_table(points: &[BranchingPoint]) -> Table {
    let mut header = vec!["R_B"];
    header.extend(FIDELITY_COLUMNS);
    header.extend(["D_cavity", "D_bare", "gamma_p_per_ns"]);
    let mut t = Table::new(&header);
    for p in points {
        let mut row = vec![p.r_b];
        row.extend(fidelity_cells(&p.cavity));
        row.extend([p.cavity_infidelity(), p.bare_infidelity, p.pumping_rate]);
        t.push(row);
    }
    t
}

/// Long format: `power_nw, window_ns, F`.
pub fn power_window_table(map: &PowerWindowMap) -> Table {
    let mut t = Table::new(&["power_nw", "window_ns", "F"]);
    for (i, p) in map.powers.iter().enumerate() {
        for (j, w) in map.windows.iter().enumerate() {
            t.push(vec![*p, *w, map.fidelity[i][j]]);
        }
    }
    t
}

/// `run_id, click_time_ns`.
pub fn records_csv(records: &[CountingRecord]) -> String {
    let mut s = String::from("run_id,click_time_ns\n");
    for (k, r) in records.iter().enumerate() {
        for c in &r.clicks {
            let _ = writeln!(s, "{k},{}", fmt_f64(*c));
        }
    }
    s
}

use std::path::Path;

use super::FitError;

/// Two- or three-column `(x, y[, σ_y])` data.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

/// Parses CSV text. A first row that does not parse as numbers is taken as a
/// header; lines starting with `#` are skipped.
pub fn parse_trace(text: &str) -> Result<Trace, FitError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FitError::InvalidInput(format!("CSV: {e}")))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => {
                let line = rec.position().map_or(k as u64 + 1, |p| p.line());
                return Err(FitError::InvalidInput(format!("line {line}: {e}")));
            }
        }
    }
    if rows.is_empty() {
        return Err(FitError::InvalidInput("no data rows".into()));
    }
    let width = rows[0].len();
    if !(2..=3).contains(&width) || rows.iter().any(|r| r.len() != width) {
        return Err(FitError::InvalidInput("expected 2 or 3 columns on every row".into()));
    }
    Ok(Trace {
        x: rows.iter().map(|r| r[0]).collect(),
        y: rows.iter().map(|r| r[1]).collect(),
        sigma: (width == 3).then(|| rows.iter().map(|r| r[2]).collect()),
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, FitError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| FitError::InvalidInput(format!("{}: {e}", path.display())))?;
    parse_trace(&text)
}

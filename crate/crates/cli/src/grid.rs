//! Grid flags: `a:b:step` (inclusive), `log:a:b:n` or `v1,v2,...`.

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("`{s}` is not a number in grid `{spec}`"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite value in grid `{spec}`"))
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        ["log", a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| format!("`{n}` is not a point count"))?;
            if !(a > 0.0 && b > 0.0) || n < 2 {
                return Err(format!("log grid `{spec}` needs positive bounds and n >= 2"));
            }
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
                .collect()
        }
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(format!("grid `{spec}` needs start <= stop and step > 0"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(format!("grid `{spec}` has too many points"));
            }
            (0..=n).map(|k| a + step * k as f64).collect()
        }
        [single] => single.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("cannot parse grid `{spec}`")),
    };
    if grid.is_empty() {
        return Err(format!("grid `{spec}` is empty"));
    }
    Ok(grid)
}

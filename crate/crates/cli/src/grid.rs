//! Grid syntax `x1a:x1b:n1,x2a:x2b:n2,x3a:x3b:n3;t1,t2,...`.

use nscascade::Vec3;

fn axis(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("axis '{spec}' must be a:b:n"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| format!("bad axis start '{}'", parts[0]))?;
    let b: f64 = parts[1].trim().parse().map_err(|_| format!("bad axis end '{}'", parts[1]))?;
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad axis count '{}'", parts[2]))?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(format!("axis '{spec}' needs finite ends and n ≥ 1"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// Points ordered by time, then `x₁`, `x₂`, `x₃`.
pub fn parse_grid(spec: &str) -> Result<Vec<(Vec3, f64)>, String> {
    let (space, times) = spec.split_once(';').ok_or("grid needs ';' between space axes and times")?;
    let axes: Vec<Vec<f64>> = space.split(',').map(axis).collect::<Result<_, _>>()?;
    if axes.len() != 3 {
        return Err(format!("grid needs 3 space axes, got {}", axes.len()));
    }
    let times: Vec<f64> = times
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad time '{t}'")))
        .collect::<Result<_, _>>()?;
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err("grid times must be positive".into());
    }
    let mut out = Vec::new();
    for &t in &times {
        for &a in &axes[0] {
            for &b in &axes[1] {
                for &c in &axes[2] {
                    out.push((Vec3::new(a, b, c), t));
                }
            }
        }
    }
    Ok(out)
}

pub fn parse_point(spec: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad coordinate '{s}'")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c] => Ok(Vec3::new(*a, *b, *c)),
        _ => Err(format!("point '{spec}' needs three comma-separated coordinates")),
    }
}

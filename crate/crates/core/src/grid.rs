//! Inclusive `start:stop:step` grids.

/// `start, start + step, …` up to and including `stop` (within 1e-9 of a step).
pub fn uniform(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err("grid bounds must be finite".into());
    }
    if start > stop {
        return Err(format!("grid start {start} exceeds stop {stop}"));
    }
    if start == stop {
        return Ok(vec![start]);
    }
    if step <= 0.0 {
        return Err(format!("grid step {step} must be positive"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Parses `start:stop:step`, or a single value for a one-point grid.
pub fn parse(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| format!("`{s}` in grid `{spec}` is not a number"))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [a, b, c] => uniform(num(a)?, num(b)?, num(c)?),
        _ => Err(format!("grid `{spec}` must be start:stop:step")),
    }
}

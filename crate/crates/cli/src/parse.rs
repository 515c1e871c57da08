use crate::CliError;

fn number(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Usage(format!("not a number: {s:?}")))
}

/// `start:stop:step` (inclusive, step > 0) or a comma list.
pub fn values(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if !(step > 0.0) || stop < start {
                return Err(CliError::Usage(format!("bad range {spec:?}: need start <= stop and step > 0")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        [single] => single.split(',').filter(|t| !t.trim().is_empty()).map(number).collect(),
        _ => Err(CliError::Usage(format!("expected start:stop:step or a comma list, got {spec:?}"))),
    }
}

/// Like [`values`], requiring positive integers.
pub fn counts(spec: &str) -> Result<Vec<u32>, CliError> {
    values(spec)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(CliError::Usage(format!("expected a positive integer, got {v}")))
            }
        })
        .collect()
}

/// `lo:hi:per_decade` log-spaced or a comma list.
pub fn budgets(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if let [lo, hi, per_decade] = parts.as_slice() {
        let (lo, hi, per) = (number(lo)?, number(hi)?, number(per_decade)?);
        if !(lo > 0.0 && hi > lo && per >= 1.0 && per.fract() == 0.0) {
            return Err(CliError::Usage(format!("bad budget range {spec:?}")));
        }
        return Ok(pyrewatch_core::planner::log_budgets(lo, hi, per as usize));
    }
    values(spec)
}

/// `key=start:stop:step`.
pub fn vary(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let (key, range) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected key=start:stop:step, got {spec:?}")))?;
    Ok((key.trim().to_string(), values(range)?))
}

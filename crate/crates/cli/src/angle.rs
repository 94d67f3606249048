//! Angles written as multiples of π (`0.73pi`, `-pi`, `pi/2`) or plain radians.

use std::f64::consts::PI;

/// Parses `x`, `xpi`, `xπ`, `pi`, `-pi`, `pi/n` and `xpi/n`.
///
/// The coefficient is parsed as a decimal and multiplied by π once.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let bad = || format!("invalid angle '{s}' (expected e.g. 0.73pi, pi/2 or radians)");
    let lower = t.to_ascii_lowercase();
    let (body, denom) = match lower.split_once('/') {
        Some((b, d)) => (b.to_string(), Some(d.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (lower.clone(), None),
    };
    let body = body.trim();
    let value = if let Some(coef) = body.strip_suffix("pi").or_else(|| body.strip_suffix('π')) {
        let coef = coef.trim().trim_end_matches('*');
        let k = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        k * PI
    } else {
        if denom.is_some() {
            return Err(bad());
        }
        body.parse::<f64>().map_err(|_| bad())?
    };
    let value = match denom {
        Some(d) if d != 0.0 => value / d,
        Some(_) => return Err(bad()),
        None => value,
    };
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

/// Time in μs; `inf` allowed.
pub fn parse_time(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => {
            let v: f64 = t.parse().map_err(|_| format!("invalid time '{s}'"))?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(format!("time must be positive, got '{s}'"))
            }
        }
    }
}

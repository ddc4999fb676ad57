//! Quantities written as `<number><unit>`, e.g. `2ms`, `27.2us`, `270.4Hz`.

/// Splits `text` into the longest leading decimal literal and the remaining suffix.
///
/// Only `.` is accepted as the decimal separator; an exponent (`1e-3`) is allowed.
pub fn split_number(text: &str) -> Option<(f64, &str)> {
    let bytes = text.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i == digits_start || (i == digits_start + 1 && bytes[digits_start] == b'.') {
        return None;
    }
    // exponent only if followed by digits, so `2e` stays a unit suffix
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_digits = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits {
            i = j;
        }
    }
    let value: f64 = text[..i].parse().ok()?;
    Some((value, &text[i..]))
}

pub fn time_unit_scale(unit: &str) -> Option<f64> {
    match unit {
        "s" => Some(1.0),
        "ms" => Some(1e-3),
        "us" => Some(1e-6),
        _ => None,
    }
}

pub fn frequency_unit_scale(unit: &str) -> Option<f64> {
    match unit {
        "Hz" => Some(1.0),
        "kHz" => Some(1e3),
        _ => None,
    }
}

/// Parses a duration with an explicit `s`, `ms` or `us` unit into seconds.
pub fn parse_seconds(text: &str) -> Result<f64, String> {
    parse_with(text.trim(), time_unit_scale, "s, ms or us")
}

/// Parses a frequency with an explicit `Hz` or `kHz` unit into Hz.
pub fn parse_hertz(text: &str) -> Result<f64, String> {
    parse_with(text.trim(), frequency_unit_scale, "Hz or kHz")
}

/// Parses an angular frequency into rad/s. `rad/s` is taken as is; `Hz` and
/// `kHz` are cycles and pick up a factor `2 pi`.
pub fn parse_angular(text: &str) -> Result<f64, String> {
    parse_with(
        text.trim(),
        |unit| match unit {
            "rad/s" => Some(1.0),
            other => frequency_unit_scale(other).map(|f| f * std::f64::consts::TAU),
        },
        "rad/s, Hz or kHz",
    )
}

fn parse_with(text: &str, scale: fn(&str) -> Option<f64>, expected: &str) -> Result<f64, String> {
    let (value, unit) = split_number(text).ok_or_else(|| format!("`{text}` is not a number"))?;
    let unit = unit.trim_start();
    if unit.is_empty() {
        return Err(format!("`{text}` is missing a unit ({expected})"));
    }
    let factor = scale(unit).ok_or_else(|| format!("unknown unit `{unit}` (expected {expected})"))?;
    Ok(value * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_numbers() {
        assert_eq!(split_number("2ms"), Some((2.0, "ms")));
        assert_eq!(split_number("27.2us"), Some((27.2, "us")));
        assert_eq!(split_number("1e-3s"), Some((1e-3, "s")));
        assert_eq!(split_number("-4"), Some((-4.0, "")));
        assert_eq!(split_number(".5s"), Some((0.5, "s")));
        assert_eq!(split_number("ms"), None);
        assert_eq!(split_number("2,5ms"), Some((2.0, ",5ms")));
    }

    #[test]
    fn parses_units() {
        assert_eq!(parse_seconds("2ms").unwrap(), 2e-3);
        assert_eq!(parse_seconds("1.5s").unwrap(), 1.5);
        assert!(parse_seconds("2").unwrap_err().contains("missing a unit"));
        assert!(parse_seconds("2min").is_err());
        assert_eq!(parse_hertz("270.4Hz").unwrap(), 270.4);
        assert_eq!(parse_hertz("1.5kHz").unwrap(), 1500.0);
        assert_eq!(parse_seconds("40 s").unwrap(), 40.0);
        assert_eq!(parse_angular("20 rad/s").unwrap(), 20.0);
        assert_eq!(parse_angular("1Hz").unwrap(), std::f64::consts::TAU);
        assert!(parse_angular("1 s").is_err());
    }
}

//! Unit-bearing config values such as `"28 GHz"`, `"-90 dBm"` or `"lambda/2"`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Power,
    Ratio,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Length => "length (m, cm, mm, lambda)",
            Dimension::Frequency => "frequency (Hz, kHz, MHz, GHz)",
            Dimension::Power => "power (W, mW, dBm, dBW)",
            Dimension::Ratio => "ratio (dB or a plain number)",
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// `lambda`, `lambda/2`, `0.5 lambda`, `2*lambda`.
fn wavelengths(s: &str) -> Option<Result<f64, String>> {
    let s = s.trim();
    let lower = s.to_ascii_lowercase();
    let pos = lower.find("lambda")?;
    let (pre, post) = (s[..pos].trim().trim_end_matches('*').trim(), s[pos + 6..].trim());
    let factor = if pre.is_empty() { Ok(1.0) } else { number(pre) };
    let divisor = match post.strip_prefix('/') {
        Some(d) => number(d),
        None if post.is_empty() => Ok(1.0),
        None => Err(format!("unexpected `{post}` after lambda")),
    };
    Some(factor.and_then(|f| divisor.and_then(|d| if d == 0.0 { Err("division by zero".into()) } else { Ok(f / d) })))
}

/// Parses a quantity into SI units. `wavelength` resolves `lambda` lengths.
pub fn parse_quantity(text: &str, dim: Dimension, wavelength: Option<f64>) -> Result<f64, String> {
    let t = text.trim();
    if dim == Dimension::Length {
        if let Some(w) = wavelengths(t) {
            let lambda = wavelength.ok_or("lambda is not available for this key")?;
            return Ok(w? * lambda);
        }
    }
    // No supported unit starts with `e`, so exponents stay with the number.
    let split = t.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E');
    let (value, unit) = match split {
        Some(i) => (&t[..i], t[i..].trim()),
        None => (t, ""),
    };
    let v = number(value)?;
    let scaled = match (dim, unit) {
        (Dimension::Length, "m") => v,
        (Dimension::Length, "cm") => v * 1e-2,
        (Dimension::Length, "mm") => v * 1e-3,
        (Dimension::Frequency, "Hz") => v,
        (Dimension::Frequency, "kHz") => v * 1e3,
        (Dimension::Frequency, "MHz") => v * 1e6,
        (Dimension::Frequency, "GHz") => v * 1e9,
        (Dimension::Power, "W") => v,
        (Dimension::Power, "mW") => v * 1e-3,
        (Dimension::Power, "dBm") => dbm_to_watts(v),
        (Dimension::Power, "dBW") => db_to_linear(v),
        (Dimension::Ratio, "dB") => db_to_linear(v),
        (Dimension::Ratio, "") => v,
        (_, "") => return Err(format!("`{t}` needs a unit; expected {dim}")),
        (_, u) => return Err(format!("unit `{u}` is not a {dim}")),
    };
    Ok(scaled)
}

/// Exact text form of an SI value that parses back to the same bits.
pub fn format_quantity(v: f64, dim: Dimension) -> String {
    match dim {
        Dimension::Length => format!("{v:?} m"),
        Dimension::Frequency => format!("{v:?} Hz"),
        Dimension::Power => format!("{v:?} W"),
        Dimension::Ratio => format!("{v:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_examples() {
        assert_eq!(parse_quantity("28 GHz", Dimension::Frequency, None).unwrap(), 2.8e10);
        assert_relative_eq!(parse_quantity("-90 dBm", Dimension::Power, None).unwrap(), 1e-12, max_relative = 1e-12);
        assert_relative_eq!(parse_quantity("10 dB", Dimension::Ratio, None).unwrap(), 10.0, max_relative = 1e-15);
        assert_eq!(parse_quantity("0.1 W", Dimension::Power, None).unwrap(), 0.1);
        assert_eq!(parse_quantity("50 m", Dimension::Length, None).unwrap(), 50.0);
        assert_eq!(parse_quantity("3.5", Dimension::Ratio, None).unwrap(), 3.5);
        let lambda = 2.99792458e8 / 2.8e10;
        assert_eq!(parse_quantity("lambda/2", Dimension::Length, Some(lambda)).unwrap(), lambda / 2.0);
        assert_eq!(parse_quantity("2 * lambda", Dimension::Length, Some(lambda)).unwrap(), 2.0 * lambda);
        assert_relative_eq!(lambda / 2.0, 5.353_436_75e-3, max_relative = 1e-9);
    }

    #[test]
    fn bad_units_are_rejected() {
        assert!(parse_quantity("50", Dimension::Length, None).is_err());
        assert!(parse_quantity("50 GHz", Dimension::Length, None).is_err());
        assert!(parse_quantity("lambda", Dimension::Length, None).is_err());
        assert!(parse_quantity("fast", Dimension::Power, None).is_err());
        assert!(parse_quantity("1e-12 W", Dimension::Power, None).is_ok());
    }

    proptest! {
        #[test]
        fn db_conversions_round_trip(db in -150.0f64..150.0) {
            let back = linear_to_db(db_to_linear(db));
            prop_assert!((back - db).abs() <= 1e-9 * db.abs().max(1.0));
            let lin = db_to_linear(db);
            prop_assert!((db_to_linear(linear_to_db(lin)) - lin).abs() <= 1e-9 * lin);
            let w = dbm_to_watts(db);
            prop_assert!((dbm_to_watts(watts_to_dbm(w)) - w).abs() <= 1e-9 * w);
        }

        #[test]
        fn formatted_quantities_parse_back_exactly(v in 1e-15f64..1e12) {
            for dim in [Dimension::Length, Dimension::Frequency, Dimension::Power, Dimension::Ratio] {
                prop_assert_eq!(parse_quantity(&format_quantity(v, dim), dim, None).unwrap(), v);
            }
        }
    }
}

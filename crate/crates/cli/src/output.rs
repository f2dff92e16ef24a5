//! Number formatting, grids and destinations.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// `x` with 15 significant digits, in fixed notation when that stays short.
pub fn sig15(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-6..15).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let body = if exp < 0 {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    };
    format!("{sign}{body}")
}

/// `x` rounded to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.14e}").parse().expect("round trip")
    } else {
        x
    }
}

/// `start:stop:step` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    let ts: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("{s:?}: expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || !(stop >= start) {
            return Err(format!("{s:?}: need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Snap to 12 decimals so 0.1 * 3 prints and evaluates as 0.3.
        (0..=n)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if ts.is_empty() || ts.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(format!("{s:?}: times must be finite and nonnegative"));
    }
    Ok(ts)
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::input("output", format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::input("output", e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_digits() {
        assert_eq!(sig15(0.998291461216988), "0.998291461216988");
        assert_eq!(sig15(0.0001636282753), "0.000163628275300000");
        assert_eq!(sig15(1.0), "1.00000000000000");
        assert_eq!(sig15(-2.5), "-2.50000000000000");
        assert_eq!(sig15(123.0), "123.000000000000");
        assert_eq!(sig15(1.5e-9), "1.50000000000000e-9");
        assert_eq!(sig15(0.0), "0");
        assert_eq!(sig15(f64::NAN), "NaN");
        // Rounding carries into the exponent.
        assert_eq!(sig15(0.99999999999999999), "1.00000000000000");
    }

    #[test]
    fn rounding_keeps_fifteen_digits() {
        assert_eq!(round15(0.1 + 0.2), 0.3);
        assert_eq!(round15(1.0 / 3.0), 0.333333333333333);
    }

    #[test]
    fn grids() {
        let g = parse_grid("0:3:0.1").unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[30], 3.0);
        assert_eq!(parse_grid("0").unwrap(), vec![0.0]);
        assert_eq!(parse_grid("5, 10,100").unwrap(), vec![5.0, 10.0, 100.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("-1").is_err());
        assert!(parse_grid("a").is_err());
    }
}

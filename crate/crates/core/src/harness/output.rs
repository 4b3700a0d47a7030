use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::harness::HarnessError;

/// `x` in positional notation with 17 significant digits, enough for any
/// `f64` to read back unchanged.
pub fn decimal17(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = 1 + exp; // digits before the decimal point
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

/// Like [`decimal17`] but empty for NaN, used for absent CSV values.
pub(crate) fn csv_float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        decimal17(x)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(HarnessError::Json)?;
    w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `header` and `rows` as CSV with LF line endings.
pub(crate) fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_trace(
    path: &Path,
    events: &[crate::game::TraceEvent],
) -> Result<(), HarnessError> {
    let w = create(path)?;
    crate::game::write_jsonl(w, events).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_forms() {
        assert_eq!(decimal17(0.5), "0.50000000000000000");
        assert_eq!(decimal17(0.3), "0.29999999999999999");
        assert_eq!(decimal17(1.0), "1.0000000000000000");
        assert_eq!(decimal17(-2.5e-3), "-0.0025000000000000001");
        assert_eq!(decimal17(1.5e20), "150000000000000000000");
        assert_eq!(decimal17(0.0), "0.0000000000000000");
    }

    #[test]
    fn round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 123.456, 7e-9, 0.999999999999, 2f64.powi(60)] {
            assert_eq!(decimal17(x).parse::<f64>().unwrap(), x);
        }
    }
}

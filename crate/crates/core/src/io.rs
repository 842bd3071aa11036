//! Output formatting shared by the CSV and JSON exporters.
//!
//! Floats are written with at most 15 significant digits so identical runs
//! produce byte-identical files.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

pub const SIGNIFICANT_DIGITS: usize = 15;

/// Rounds `x` to 15 significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Shortest decimal form of `x` rounded to 15 significant digits.
pub fn fmt_float(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // normalize -0
        return "0".into();
    }
    format!("{r}")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 15 significant digits. Key order
/// follows the struct declaration order.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Writes `t,x` rows with a header.
pub fn write_tx_csv<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "x"])?;
    for &(t, x) in rows {
        wtr.write_record([fmt_float(t), fmt_float(x)])?;
    }
    wtr.flush()?;
    Ok(())
}

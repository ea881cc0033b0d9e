use std::fmt::Write as _;
use std::path::Path;

use super::{Modality, Signal};
use crate::error::{Error, Result};
use crate::Real;

/// One sample per line; a non-numeric first line is treated as a header.
/// The file carries no rate, so the caller supplies it.
pub fn read_geophone_csv<R: Real>(path: impl AsRef<Path>, sample_rate: f64) -> Result<Signal<R>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => samples.push(R::lit(v)),
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(Error::format(format!(
                    "{}:{}: not a number: {field:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::format(format!("{}: no samples", path.display())));
    }
    Signal::new(samples, sample_rate, Modality::Geophone)
}

pub fn write_geophone_csv<R: Real>(path: impl AsRef<Path>, signal: &Signal<R>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("velocity\n");
    for v in signal.samples() {
        let _ = writeln!(out, "{v}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

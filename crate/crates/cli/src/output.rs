//! Report serialization: JSON and CSV with 17 significant digits.

use std::io::{self, Write};
use std::path::Path;

use kgs_core::hillspec::Check;
use serde::ser::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON whose floats carry 17 significant digits.
struct Sig17(PrettyFormatter<'static>);

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, to_json_string(value)?)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> CliResult<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = String::with_capacity(rows * columns.len() * 24);
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_f64(c[r])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Collects claim verdicts for a report.
#[derive(Debug, Default)]
pub struct Claims(pub Vec<Check>);

impl Claims {
    pub fn add(&mut self, claim: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Check {
            claim: claim.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn extend_prefixed(&mut self, prefix: &str, checks: &[Check]) {
        for c in checks {
            self.add(format!("{prefix}: {}", c.claim), c.passed, c.detail.clone());
        }
    }

    pub fn all_passed(&self) -> bool {
        self.0.iter().all(|c| c.passed)
    }

    /// `Err(Claims)` listing the failures, if any.
    pub fn verdict(&self) -> CliResult<()> {
        let failed: Vec<String> = self
            .0
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.claim, c.detail))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Claims(failed))
        }
    }
}

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};

use crate::config::{Failure, RunFile};

/// Shortest form is not enough here: every float is written with 17
/// significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
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

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_file(path, to_json(value).as_bytes())
}

/// A cell of a CSV row.
pub enum Cell {
    F(f64),
    I(i64),
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Numerical(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|c| match c {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
        }))
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Numerical(e.to_string()))?;
    write_file(path, &bytes)
}

/// Outcome of one invariant check. `kind` fixes how `value` is compared
/// with `reference` at `tolerance`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: &'static str,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `|value − reference| ≤ tolerance`
    pub fn close(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let passed = (value - reference).abs() <= tolerance;
        Self { name: name.into(), kind: "close", value, reference, tolerance, passed }
    }

    /// `value ≤ reference + tolerance`
    pub fn at_most(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let passed = value <= reference + tolerance;
        Self { name: name.into(), kind: "at-most", value, reference, tolerance, passed }
    }

    /// `value ≥ reference − tolerance`
    pub fn at_least(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let passed = value >= reference - tolerance;
        Self { name: name.into(), kind: "at-least", value, reference, tolerance, passed }
    }

    /// A boolean condition, recorded as value 1 (holds) or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        let value = if ok { 1.0 } else { 0.0 };
        Self { name: name.into(), kind: "holds", value, reference: 1.0, tolerance: 0.0, passed: ok }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    subcommand: String,
    config: Value,
    outputs: Map<String, Value>,
    checks: Vec<Check>,
    passed: bool,
    files: Vec<String>,
    timings: Map<String, Value>,
}

impl Report {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: Value::Null,
            outputs: Map::new(),
            checks: Vec::new(),
            passed: true,
            files: Vec::new(),
            timings: Map::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, params: &T) {
        self.config = serde_json::to_value(params).expect("parameters serialize");
    }

    pub fn output<T: Serialize>(&mut self, key: &str, value: T) {
        self.outputs.insert(key.into(), serde_json::to_value(value).expect("outputs serialize"));
    }

    pub fn check(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn file(&mut self, name: &str) {
        self.files.push(name.into());
    }

    pub fn timing(&mut self, key: &str, seconds: f64) {
        self.timings.insert(key.into(), Value::from(seconds));
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn passed(&self) -> bool {
        self.passed
    }

    /// Writes `results.json` and the run file `config.json` that
    /// reproduces it via `--config`.
    pub fn write(&self, out: &Path) -> Result<(), Failure> {
        let params = match &self.config {
            Value::Object(m) => m.clone(),
            _ => Map::new(),
        };
        write_json(&out.join("config.json"), &RunFile { subcommand: Some(self.subcommand.clone()), params })?;
        write_json(&out.join("results.json"), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        let xs = [0.1, 1.0 / 3.0, -2.5e-300, 4.0 * std::f64::consts::PI, 1e300];
        let text = to_json(&xs);
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, xs);
        assert!(text.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn non_finite_values_become_null() {
        assert_eq!(to_json(&f64::NAN).trim(), "null");
    }

    #[test]
    fn checks_compare_as_stated() {
        assert!(Check::close("c", 1.0, 1.1, 0.2).passed);
        assert!(!Check::at_most("m", 1.0, 0.5, 0.1).passed);
        assert!(Check::at_least("l", 0.45, 0.5, 0.1).passed);
    }
}

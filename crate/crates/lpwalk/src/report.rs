//! Tables and their CSV/JSON renderings.
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64`. Exact zero is written as `0`. A run's resolved configuration is
//! echoed as `# key=value` lines ahead of the CSV header (or as a `config`
//! object in JSON); everything after those lines is the report body.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

/// Formats `x` with 17 significant digits: fixed notation for decimal
/// exponents in `[-5, 17)`, scientific otherwise.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..17).contains(&exp) {
        format!("{x:.*}", (16 - exp) as usize)
    } else {
        sci
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Real(f64),
}

impl Cell {
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Cell::Real(x) => Some(x),
            Cell::Int(i) => Some(i as f64),
            Cell::Text(_) => None,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Real(x) => f.write_str(&fmt_real(*x)),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Text(t) => s.serialize_str(t),
            Cell::Int(i) => s.serialize_u64(*i),
            Cell::Real(x) if x.is_finite() => {
                let raw = RawValue::from_string(fmt_real(*x)).map_err(serde::ser::Error::custom)?;
                raw.serialize(s)
            }
            Cell::Real(_) => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        let mut line = self.header.join(",");
        line.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "{cell}").unwrap();
            }
            line.push('\n');
            if line.len() > 1 << 16 {
                w.write_all(line.as_bytes())?;
                line.clear();
            }
        }
        w.write_all(line.as_bytes())
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).unwrap();
        String::from_utf8(out).unwrap()
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.rows.iter().map(|row| Record { header: &self.header, row }))
    }
}

struct Record<'a> {
    header: &'a [&'static str],
    row: &'a [Cell],
}

impl Serialize for Record<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.row.len()))?;
        for (k, v) in self.header.iter().zip(self.row) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Resolved run configuration, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigEcho(pub Vec<(String, Cell)>);

impl ConfigEcho {
    pub fn set(&mut self, key: &str, value: impl Into<Cell>) {
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.into(), value)),
        }
    }

    pub fn write_comments(&self, mut w: impl Write) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for ConfigEcho {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// A JSON document `{"config": {...}, "<name>": [...], ...}`.
pub fn to_json(config: &ConfigEcho, sections: &[(&str, &dyn ErasedSection)]) -> String {
    let mut out = String::from("{\"config\":");
    out.push_str(&serde_json::to_string(config).unwrap());
    for (name, body) in sections {
        write!(out, ",{}:{}", serde_json::to_string(name).unwrap(), body.json()).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Anything that renders as a JSON value.
pub trait ErasedSection {
    fn json(&self) -> String;
}

impl<T: Serialize> ErasedSection for T {
    fn json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }
}

/// Splits a CSV document into its `#` echo lines and the body.
pub fn split_body(text: &str) -> (&str, &str) {
    let mut cut = 0;
    for line in text.split_inclusive('\n') {
        if !line.starts_with('#') {
            break;
        }
        cut += line.len();
    }
    text.split_at(cut)
}

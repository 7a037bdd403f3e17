//! Long-format result tables with a versioned CSV schema.
//!
//! Each row carries one scalar `quantity` at one sweep point. Samples belong
//! to a realization; aggregates summarize samples as `(value, stderr, n)`;
//! theory rows hold closed-form predictions.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::config::Mode;

pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 13] = [
    "point",
    "kind",
    "realization",
    "n_sys",
    "n_env",
    "lambda",
    "beta",
    "t",
    "quantity",
    "value",
    "stderr",
    "n",
    "status",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Sample,
    Aggregate,
    Theory,
}

impl RowKind {
    pub fn name(&self) -> &'static str {
        match self {
            RowKind::Sample => "sample",
            RowKind::Aggregate => "aggregate",
            RowKind::Theory => "theory",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sample" => RowKind::Sample,
            "aggregate" => RowKind::Aggregate,
            "theory" => RowKind::Theory,
            _ => return None,
        })
    }
}

/// Coordinates of one sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub n_sys: usize,
    pub n_env: usize,
    pub lambda: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub point: SweepPoint,
    pub kind: RowKind,
    pub realization: Option<usize>,
    pub t: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: usize,
    /// `ok`, or the error that prevented computing the value.
    pub status: String,
}

impl Row {
    pub fn sample(point: SweepPoint, realization: usize, quantity: &str, value: f64) -> Self {
        Self {
            point,
            kind: RowKind::Sample,
            realization: Some(realization),
            t: None,
            quantity: quantity.to_string(),
            value,
            stderr: None,
            n: 1,
            status: "ok".into(),
        }
    }

    pub fn aggregate(point: SweepPoint, quantity: &str, value: f64, stderr: Option<f64>, n: usize) -> Self {
        Self {
            kind: RowKind::Aggregate,
            realization: None,
            stderr,
            n,
            ..Self::sample(point, 0, quantity, value)
        }
    }

    pub fn theory(point: SweepPoint, quantity: &str, value: f64) -> Self {
        Self {
            kind: RowKind::Theory,
            realization: None,
            n: 0,
            ..Self::sample(point, 0, quantity, value)
        }
    }

    pub fn failure(point: SweepPoint, realization: Option<usize>, message: &str) -> Self {
        Self {
            realization,
            value: f64::NAN,
            status: format!("error: {}", sanitize(message)),
            ..Self::sample(point, 0, "error", f64::NAN)
        }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_realization(mut self, realization: usize) -> Self {
        self.realization = Some(realization);
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn sanitize(message: &str) -> String {
    message.replace([',', '\n', '\r'], ";")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub mode: Mode,
    pub rows: Vec<Row>,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

impl ResultTable {
    pub fn new(mode: Mode) -> Self {
        Self { mode, rows: Vec::new() }
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(Row::is_ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.is_ok())
    }

    /// Rows of one kind and quantity, in table order.
    pub fn select<'a>(&'a self, kind: RowKind, quantity: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.kind == kind && r.quantity == quantity)
    }

    /// The unique row of `kind` and `quantity` at sweep point `point`.
    pub fn find<'a>(&'a self, point: usize, kind: RowKind, quantity: &'a str) -> Option<&'a Row> {
        self.select(kind, quantity).find(|r| r.point.index == point)
    }

    pub fn to_csv(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "# spinbath results v{SCHEMA_VERSION}");
        let _ = writeln!(o, "# mode: {}", self.mode.name());
        let _ = writeln!(o, "{}", COLUMNS.join(","));
        for r in &self.rows {
            let p = &r.point;
            let _ = writeln!(
                o,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.index,
                r.kind.name(),
                opt(r.realization),
                p.n_sys,
                p.n_env,
                num(p.lambda),
                num(p.beta),
                opt(r.t.map(num)),
                r.quantity,
                num(r.value),
                opt(r.stderr.map(num)),
                r.n,
                r.status
            );
        }
        o
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Table { line, message };
        let mut lines = text.lines().enumerate();
        let mut mode = None;
        let mut header_seen = false;
        let mut rows = Vec::new();
        let mut version_seen = false;
        for (idx, line) in lines.by_ref() {
            let ln = idx + 1;
            if let Some(comment) = line.strip_prefix('#') {
                let c = comment.trim();
                if let Some(v) = c.strip_prefix("spinbath results v") {
                    let v: u32 = v.parse().map_err(|_| err(ln, format!("bad schema version `{v}`")))?;
                    if v != SCHEMA_VERSION {
                        return Err(err(ln, format!("unsupported schema version {v}")));
                    }
                    version_seen = true;
                } else if let Some(m) = c.strip_prefix("mode:") {
                    mode = Some(m.trim().parse::<Mode>().map_err(|e| err(ln, e))?);
                }
                continue;
            }
            if !header_seen {
                if line != COLUMNS.join(",") {
                    return Err(err(ln, "unexpected column header".into()));
                }
                header_seen = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            rows.push(parse_row(line).map_err(|m| err(ln, m))?);
        }
        if !version_seen {
            return Err(err(1, "missing schema version comment".into()));
        }
        let mode = mode.ok_or_else(|| err(1, "missing mode comment".into()))?;
        Ok(Self { mode, rows })
    }
}

fn parse_row(line: &str) -> std::result::Result<Row, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", COLUMNS.len(), f.len()));
    }
    fn p<T: std::str::FromStr>(name: &str, s: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {name} `{s}`"))
    }
    fn o<T: std::str::FromStr>(name: &str, s: &str) -> std::result::Result<Option<T>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            p(name, s).map(Some)
        }
    }
    Ok(Row {
        point: SweepPoint {
            index: p("point", f[0])?,
            n_sys: p("n_sys", f[3])?,
            n_env: p("n_env", f[4])?,
            lambda: p("lambda", f[5])?,
            beta: p("beta", f[6])?,
        },
        kind: RowKind::parse(f[1]).ok_or_else(|| format!("bad kind `{}`", f[1]))?,
        realization: o("realization", f[2])?,
        t: o("t", f[7])?,
        quantity: f[8].to_string(),
        value: p("value", f[9])?,
        stderr: o("stderr", f[10])?,
        n: p("n", f[11])?,
        status: f[12].to_string(),
    })
}

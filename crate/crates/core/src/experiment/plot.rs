//! Gnuplot export of result tables.
//!
//! Aggregates are grouped into series keyed by `(λ, n_sys, n_env)` and laid out
//! against β, or against `t` for time traces. Theory rows for the same point
//! share the line of the measured value. Output is a pure function of the table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::experiment::config::Mode;
use crate::experiment::table::{ResultTable, RowKind};

/// A gnuplot data file and the script that draws it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlotExport {
    pub data: String,
    pub script: String,
}

/// Name of the data file the script refers to.
pub const DATA_FILE: &str = "spinbath.dat";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct SeriesKey {
    lambda: u64,
    n_sys: usize,
    n_env: usize,
}

type Line = BTreeMap<String, (f64, Option<f64>)>;

/// Points of one series keyed by the ordered x value.
type Points = BTreeMap<u64, (f64, Line)>;

fn ordered(x: f64) -> u64 {
    // total order on finite floats, matching numeric order
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

pub fn plot_export(table: &ResultTable) -> PlotExport {
    let time_axis = table.mode == Mode::TimeTrace;
    let mut series: BTreeMap<SeriesKey, (f64, Points)> = BTreeMap::new();
    let mut columns: BTreeMap<String, ()> = BTreeMap::new();

    for r in table.rows.iter().filter(|r| r.is_ok()) {
        let (x, name) = match (time_axis, r.kind) {
            (true, RowKind::Sample) if r.realization == Some(0) => match r.t {
                Some(t) => (t, r.quantity.clone()),
                None => continue,
            },
            (false, RowKind::Aggregate) if r.realization.is_none() => (r.point.beta, r.quantity.clone()),
            (false, RowKind::Theory) => (r.point.beta, format!("{}_theory", r.quantity)),
            _ => continue,
        };
        let key = SeriesKey {
            lambda: ordered(r.point.lambda),
            n_sys: r.point.n_sys,
            n_env: r.point.n_env,
        };
        columns.insert(name.clone(), ());
        series
            .entry(key)
            .or_insert_with(|| (r.point.lambda, BTreeMap::new()))
            .1
            .entry(ordered(x))
            .or_insert_with(|| (x, Line::new()))
            .1
            .insert(name, (r.value, r.stderr));
    }

    let columns: Vec<String> = columns.into_keys().collect();
    let x_name = if time_axis { "t" } else { "beta" };
    let mut data = String::new();
    let mut titles = Vec::new();
    let _ = write!(data, "# {x_name}");
    for c in &columns {
        let _ = write!(data, " {c} {c}_err");
    }
    data.push('\n');
    for (key, (lambda, points)) in &series {
        let title = format!("lambda={lambda} N_S={} N_E={}", key.n_sys, key.n_env);
        let _ = writeln!(data, "\n\n# {title}");
        for (x, line) in points.values() {
            let _ = write!(data, "{x:e}");
            for c in &columns {
                match line.get(c) {
                    Some((v, e)) => {
                        let _ = write!(data, " {v:e} {}", e.map_or("0".to_string(), |e| format!("{e:e}")));
                    }
                    None => data.push_str(" NaN NaN"),
                }
            }
            data.push('\n');
        }
        titles.push(title);
    }

    let mut script = String::new();
    let _ = writeln!(script, "set datafile missing 'NaN'");
    let _ = writeln!(script, "set xlabel '{x_name}'");
    if !time_axis {
        let _ = writeln!(script, "set logscale y");
    }
    let _ = writeln!(script, "set key outside");
    for (k, c) in columns.iter().enumerate() {
        if c.ends_with("_theory") {
            continue;
        }
        let col = 2 + 2 * k;
        let theory = columns.iter().position(|t| *t == format!("{c}_theory"));
        let _ = writeln!(script, "set ylabel '{c}'");
        let mut parts = Vec::new();
        for (i, title) in titles.iter().enumerate() {
            if time_axis {
                parts.push(format!("'{DATA_FILE}' index {i} using 1:{col} with lines title '{title}'"));
            } else {
                parts.push(format!(
                    "'{DATA_FILE}' index {i} using 1:{col}:{} with yerrorbars title '{title}'",
                    col + 1
                ));
            }
            if let Some(t) = theory {
                parts.push(format!(
                    "'{DATA_FILE}' index {i} using 1:{} with lines dashtype 2 title '{title} theory'",
                    2 + 2 * t
                ));
            }
        }
        if !parts.is_empty() {
            let _ = writeln!(script, "plot {}", parts.join(", \\\n     "));
            let _ = writeln!(script, "pause -1");
        }
    }
    PlotExport { data, script }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::table::{Row, SweepPoint};

    fn p(index: usize, lambda: f64, beta: f64) -> SweepPoint {
        SweepPoint {
            index,
            n_sys: 2,
            n_env: 4,
            lambda,
            beta,
        }
    }

    #[test]
    fn groups_series_and_pairs_theory_columns() {
        let mut t = ResultTable::new(Mode::TheoryOverlay);
        t.rows.push(Row::aggregate(p(1, 1.0, 2.0), "sigma2", 0.2, Some(0.01), 10));
        t.rows.push(Row::aggregate(p(0, 1.0, 1.0), "sigma2", 0.1, Some(0.01), 10));
        t.rows.push(Row::theory(p(0, 1.0, 1.0), "sigma2", 0.11));
        t.rows.push(Row::aggregate(p(2, 0.5, 1.0), "sigma2", 0.3, None, 10));
        t.rows.push(Row::failure(p(2, 0.5, 1.0), None, "x"));
        let out = plot_export(&t);
        assert_eq!(out, plot_export(&t));
        let lines: Vec<&str> = out.data.lines().collect();
        assert_eq!(lines[0], "# beta sigma2 sigma2_err sigma2_theory sigma2_theory_err");
        let first = out.data.find("lambda=0.5").unwrap();
        let second = out.data.find("lambda=1 ").unwrap();
        assert!(first < second);
        assert!(out.data.contains("1e0 1e-1 1e-2 1.1e-1 0\n2e0 2e-1 1e-2 NaN NaN\n"));
        assert!(out.script.contains("index 1 using 1:4 with lines dashtype 2"));
    }

    #[test]
    fn time_traces_use_the_first_realization() {
        let mut t = ResultTable::new(Mode::TimeTrace);
        for r in 0..2 {
            for k in 0..3 {
                t.rows.push(Row::sample(p(0, 1.0, 0.9), r, "sigma", (r * 10 + k) as f64).at_time(k as f64));
            }
        }
        let out = plot_export(&t);
        assert!(out.data.contains("0e0 0e0 0\n1e0 1e0 0\n2e0 2e0 0\n"));
        assert!(out.script.contains("with lines title"));
    }
}

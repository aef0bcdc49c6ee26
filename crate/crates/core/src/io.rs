//! Plain-text formats.
//!
//! Histograms are `symbol_id,count` lines, distributions `symbol_id,prob`
//! lines, each with an optional header. Symbol ids are 0-based; absent ids
//! have count (or probability) zero. Blank lines and lines starting with `#`
//! are ignored.
//!
//! A coefficient table is a header `degree,interval_a,interval_b,error`, one
//! line with those values, then `m,a_m` for `m = 0..=degree`. Floats are
//! written with 17 significant digits so they round-trip exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::domain::{Distribution, Histogram};
use crate::error::{Error, Result};
use crate::polyapprox::{ChebApprox, PolyEval};

pub const HISTOGRAM_HEADER: &str = "symbol,count";
pub const DISTRIBUTION_HEADER: &str = "symbol,prob";
pub const TABLE_HEADER: &str = "degree,interval_a,interval_b,error";

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Lines<'a> {
    path: PathBuf,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &Path) -> Self {
        Self {
            path: path.to_path_buf(),
            inner: text.lines().enumerate(),
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    }
}

fn split_pair(text: &str) -> Option<(&str, &str)> {
    let (a, b) = text.split_once(',')?;
    if b.contains(',') {
        return None;
    }
    Some((a.trim(), b.trim()))
}

/// Parses `id,value` records into a dense vector indexed by id.
fn parse_records<T, F>(text: &str, path: &Path, header: &str, parse: F) -> Result<Vec<T>>
where
    T: Clone + Default,
    F: Fn(&str) -> std::result::Result<T, String>,
{
    let mut lines = Lines::new(text, path);
    let mut values: Vec<T> = Vec::new();
    let mut seen: Vec<bool> = Vec::new();
    let mut first = true;
    while let Some((no, line)) = lines.next_content() {
        if std::mem::take(&mut first) && line.replace(' ', "") == header {
            continue;
        }
        let (id, value) =
            split_pair(line).ok_or_else(|| lines.err(no, "expected two comma-separated fields"))?;
        let id: usize = id
            .parse()
            .map_err(|_| lines.err(no, format!("bad symbol id `{id}`")))?;
        let value = parse(value).map_err(|msg| lines.err(no, msg))?;
        if id >= values.len() {
            values.resize(id + 1, T::default());
            seen.resize(id + 1, false);
        }
        if seen[id] {
            return Err(lines.err(no, format!("duplicate symbol id {id}")));
        }
        seen[id] = true;
        values[id] = value;
    }
    Ok(values)
}

pub fn parse_histogram(text: &str, path: &Path) -> Result<Histogram> {
    let counts = parse_records(text, path, HISTOGRAM_HEADER, |v| {
        v.parse::<u64>().map_err(|_| format!("bad count `{v}`"))
    })?;
    Ok(Histogram::new(counts))
}

pub fn read_histogram(path: &Path) -> Result<Histogram> {
    parse_histogram(&read_text(path)?, path)
}

pub fn format_histogram(h: &Histogram) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (i, c) in h.counts().iter().enumerate() {
        writeln!(out, "{i},{c}").expect("writing to a String cannot fail");
    }
    out
}

pub fn write_histogram(h: &Histogram, path: &Path) -> Result<()> {
    write_text(path, &format_histogram(h))
}

pub fn parse_distribution(text: &str, path: &Path) -> Result<Distribution> {
    let probs = parse_records(text, path, DISTRIBUTION_HEADER, |v| {
        v.parse::<f64>()
            .map_err(|_| format!("bad probability `{v}`"))
    })?;
    Distribution::new(probs)
}

pub fn read_distribution(path: &Path) -> Result<Distribution> {
    parse_distribution(&read_text(path)?, path)
}

pub fn format_distribution(d: &Distribution) -> String {
    let mut out = String::from(DISTRIBUTION_HEADER);
    out.push('\n');
    for (i, p) in d.probs().iter().enumerate() {
        writeln!(out, "{i},{p:.16e}").expect("writing to a String cannot fail");
    }
    out
}

pub fn write_distribution(d: &Distribution, path: &Path) -> Result<()> {
    write_text(path, &format_distribution(d))
}

/// Monomial coefficients of a stored approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub degree: usize,
    pub interval: (f64, f64),
    pub error: f64,
    pub coeffs: Vec<f64>,
}

impl From<&ChebApprox> for CoefficientTable {
    fn from(a: &ChebApprox) -> Self {
        Self {
            degree: a.degree(),
            interval: a.interval(),
            error: a.error(),
            coeffs: a.coeffs().to_vec(),
        }
    }
}

impl PolyEval for CoefficientTable {
    fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

pub fn format_table(t: &CoefficientTable) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    writeln!(
        out,
        "{},{:.16e},{:.16e},{:.16e}",
        t.degree, t.interval.0, t.interval.1, t.error
    )
    .expect("writing to a String cannot fail");
    for (m, a) in t.coeffs.iter().enumerate() {
        writeln!(out, "{m},{a:.16e}").expect("writing to a String cannot fail");
    }
    out
}

pub fn write_table(t: &CoefficientTable, path: &Path) -> Result<()> {
    write_text(path, &format_table(t))
}

pub fn parse_table(text: &str, path: &Path) -> Result<CoefficientTable> {
    let mut lines = Lines::new(text, path);
    let (no, header) = lines
        .next_content()
        .ok_or_else(|| lines.err(0, "empty table"))?;
    if header.replace(' ', "") != TABLE_HEADER {
        return Err(lines.err(no, format!("expected header `{TABLE_HEADER}`")));
    }
    let (no, meta) = lines
        .next_content()
        .ok_or_else(|| lines.err(no, "missing table values"))?;
    let fields: Vec<&str> = meta.split(',').map(str::trim).collect();
    let [degree, a, b, error] = fields.as_slice() else {
        return Err(lines.err(no, "expected degree,interval_a,interval_b,error"));
    };
    let degree: usize = degree.parse().map_err(|_| lines.err(no, "bad degree"))?;
    let float = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| lines.err(no, format!("bad {what} `{s}`")))
    };
    let interval = (float(a, "interval_a")?, float(b, "interval_b")?);
    let error = float(error, "error")?;

    let mut coeffs = Vec::with_capacity(degree + 1);
    while let Some((no, line)) = lines.next_content() {
        let (m, a) = split_pair(line).ok_or_else(|| lines.err(no, "expected m,a_m"))?;
        let m: usize = m
            .parse()
            .map_err(|_| lines.err(no, format!("bad index `{m}`")))?;
        if m != coeffs.len() {
            return Err(lines.err(no, format!("expected index {}, found {m}", coeffs.len())));
        }
        coeffs.push(
            a.parse::<f64>()
                .map_err(|_| lines.err(no, format!("bad coefficient `{a}`")))?,
        );
    }
    if coeffs.len() != degree + 1 {
        return Err(lines.err(
            0,
            format!(
                "degree {degree} needs {} coefficients, found {}",
                degree + 1,
                coeffs.len()
            ),
        ));
    }
    Ok(CoefficientTable {
        degree,
        interval,
        error,
        coeffs,
    })
}

pub fn read_table(path: &Path) -> Result<CoefficientTable> {
    parse_table(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyapprox::{remez, RemezOptions};

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn histogram_with_and_without_header() {
        let a = parse_histogram("symbol,count\n0,3\n2,1\n", p()).unwrap();
        let b = parse_histogram("2,1\n\n# comment\n0,3\n", p()).unwrap();
        assert_eq!(a.counts(), &[3, 0, 1]);
        assert_eq!(a, b);
        assert_eq!(parse_histogram(&format_histogram(&a), p()).unwrap(), a);
    }

    #[test]
    fn histogram_errors_carry_line_numbers() {
        let e = parse_histogram("0,3\n1,-2\n", p()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_histogram("0,3\n0,1\n", p()).unwrap_err();
        assert!(e.to_string().contains("duplicate"), "{e}");
        assert!(parse_histogram("0;3\n", p()).is_err());
        assert!(parse_histogram("0,1,2\n", p()).is_err());
    }

    #[test]
    fn distribution_round_trip_is_exact() {
        let d = Distribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        let back = parse_distribution(&format_distribution(&d), p()).unwrap();
        assert_eq!(back, d);
        assert!(parse_distribution("0,0.5\n1,0.6\n", p()).is_err());
    }

    #[test]
    fn table_round_trip_is_exact() {
        let a = remez(|x: f64| x.exp(), (-1.0, 1.0), 5, &RemezOptions::default()).unwrap();
        let t = CoefficientTable::from(&a);
        let text = format_table(&t);
        assert!(text.starts_with("degree,interval_a,interval_b,error\n5,"));
        let back = parse_table(&text, p()).unwrap();
        assert_eq!(back, t);
        assert!((back.eval(0.3) - a.eval(0.3)).abs() < 1e-13);
    }

    #[test]
    fn table_rejects_missing_coefficients() {
        let text = "degree,interval_a,interval_b,error\n2,0,1,0.1\n0,1.0\n1,2.0\n";
        assert!(parse_table(text, p()).is_err());
        let text = "degree,interval_a,interval_b,error\n1,0,1,0.1\n0,1.0\n2,2.0\n";
        assert!(parse_table(text, p()).is_err());
    }
}

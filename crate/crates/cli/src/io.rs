//! File ingestion and atomic output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

use crate::config::InputKind;

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// CSV table with a header line; numbers use the shortest round-trip representation.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
/// Reads a numeric CSV table with a header; returns the rows.
pub fn read_csv_table(text: &str) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let header: Vec<String> = match lines.next() {
        Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
        None => bail!("empty table"),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().with_context(|| format!("line {}: cannot parse '{}'", i + 1, c.trim())))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            bail!("line {}: expected {} columns, found {}", i + 1, header.len(), row.len());
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// A value read from an input file together with its 1-based line number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Numbered {
    pub line: usize,
    pub value: f64,
}

/// One decimal number per line; blank lines and `#` comments are skipped.
pub fn parse_numbers(text: &str) -> anyhow::Result<Vec<Numbered>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        let value: f64 =
            field.parse().with_context(|| format!("line {}: cannot parse '{}' as a number", i + 1, field))?;
        if !value.is_finite() {
            bail!("line {}: value must be finite", i + 1);
        }
        out.push(Numbered { line: i + 1, value });
    }
    Ok(out)
}

/// Gap samples from either a list of gaps or a list of timestamps. With
/// `Auto`, a strictly increasing sequence is taken as timestamps. Gaps below
/// `floor` are rejected with the offending line.
pub fn gaps_from_numbers(values: &[Numbered], kind: InputKind, floor: Option<f64>) -> anyhow::Result<Vec<f64>> {
    if values.len() < 2 {
        bail!("need at least two values, found {}", values.len());
    }
    let timestamps = match kind {
        InputKind::Timestamps => true,
        InputKind::Gaps => false,
        InputKind::Auto => values.windows(2).all(|w| w[1].value > w[0].value),
    };
    let gaps: Vec<Numbered> = if timestamps {
        values.windows(2).map(|w| Numbered { line: w[1].line, value: w[1].value - w[0].value }).collect()
    } else {
        values.to_vec()
    };
    for g in &gaps {
        if g.value < 0.0 {
            bail!("line {}: negative gap {:e}", g.line, g.value);
        }
        if let Some(f) = floor {
            if g.value < f * (1.0 - 1e-9) {
                bail!("line {}: gap {:e} s is below the dead time {:e} s", g.line, g.value, f);
            }
        }
    }
    Ok(gaps.into_iter().map(|g| g.value).collect())
}

/// Gap samples from a JSON simulation envelope with a `gap_samples` array.
pub fn gaps_from_json(text: &str) -> anyhow::Result<Vec<f64>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let arr = v.get("gap_samples").and_then(|g| g.as_array()).context("JSON input has no gap_samples array")?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| x.as_f64().with_context(|| format!("gap_samples[{i}] is not a number")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_detected_and_differenced() {
        let v = parse_numbers("# header\n0.0\n1.5e-7\n\n3.0e-7 # trailing\n").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[2].line, 5);
        let g = gaps_from_numbers(&v, InputKind::Auto, None).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0] - 1.5e-7).abs() < 1e-20);
        let g = gaps_from_numbers(&v, InputKind::Gaps, None).unwrap();
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn reports_offending_lines() {
        let e = parse_numbers("1.0\n2.0\nabc\n").unwrap_err();
        assert!(format!("{e:#}").contains("line 3"));
        let v = parse_numbers("0\n1e-7\n1.2e-7\n2.5e-7\n").unwrap();
        let e = gaps_from_numbers(&v, InputKind::Auto, Some(6e-8)).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![vec![0.0, 0.25], vec![1.0, 1.0 / 3.0], vec![2.0, 1e-300]];
        let text = csv_table(&["n", "probability"], rows.clone());
        let (h, back) = read_csv_table(&text).unwrap();
        assert_eq!(h, ["n", "probability"]);
        assert_eq!(back, rows);
    }
}

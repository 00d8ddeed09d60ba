//! Report assembly and CSV/JSON emission. JSON key order and float
//! formatting are fixed so that identical runs produce identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::Result;

/// A pass/fail claim together with the numeric margin that produced it.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl Verdict {
    /// `value` must stay at or below `threshold`; the margin is the slack.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Verdict {
        Verdict {
            name: name.into(),
            pass: value <= threshold,
            margin: threshold - value,
            detail: format!("{value:.3e} vs bound {threshold:.3e}"),
        }
    }

    pub fn flag(name: &str, pass: bool, margin: f64, detail: impl Into<String>) -> Verdict {
        Verdict { name: name.into(), pass, margin, detail: detail.into() }
    }
}

/// A named rectangular table of numbers.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Scenario echo, scalar results, verdicts and row tables.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub scenario: Vec<(String, String)>,
    pub scalars: Vec<(String, f64)>,
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.push((name.into(), value));
    }
}

/// 17 significant digits: round-trips every finite f64 bit-exactly.
fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "\"nan\"".into()
    } else if v.is_infinite() {
        if v > 0.0 { "\"inf\"".into() } else { "\"-inf\"".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn to_json(report: &Report) -> String {
    let mut s = String::new();
    s.push_str("{\n  \"scenario\": {");
    for (i, (k, v)) in report.scenario.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "\n    {}: {}", json_escape(k), json_escape(v));
    }
    s.push_str("\n  },\n  \"scalars\": {");
    for (i, (k, v)) in report.scalars.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "\n    {}: {}", json_escape(k), fmt_f64(*v));
    }
    s.push_str("\n  },\n  \"verdicts\": [");
    for (i, v) in report.verdicts.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(
            s,
            "\n    {{\"name\": {}, \"pass\": {}, \"margin\": {}, \"detail\": {}}}",
            json_escape(&v.name),
            v.pass,
            fmt_f64(v.margin),
            json_escape(&v.detail)
        );
    }
    s.push_str("\n  ],\n  \"tables\": [");
    for (i, t) in report.tables.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let cols = t.columns.iter().map(|c| json_escape(c)).collect::<Vec<_>>().join(", ");
        let _ = write!(s, "\n    {{\"name\": {}, \"columns\": [{}], \"rows\": [", json_escape(&t.name), cols);
        for (j, row) in t.rows.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let vals = row.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", ");
            let _ = write!(s, "\n      [{vals}]");
        }
        s.push_str("\n    ]}");
    }
    s.push_str("\n  ]\n}\n");
    s
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// RFC-4180 rows, one section per table (header row then data rows),
/// sections separated by a blank line. An empty table emits just its header.
pub fn to_csv(report: &Report) -> String {
    let mut s = String::new();
    for (i, t) in report.tables.iter().enumerate() {
        if i > 0 {
            s.push_str("\r\n");
        }
        let header = t.columns.iter().map(|c| csv_quote(c)).collect::<Vec<_>>().join(",");
        let _ = write!(s, "{header}\r\n");
        for row in &t.rows {
            let line = row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
            let _ = write!(s, "{line}\r\n");
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn emit(report: &Report, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report),
    };
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            scenario: vec![("task".into(), "verify-thm1".into())],
            scalars: vec![("gap".into(), 1.25e-13), ("j_primal".into(), 0.375)],
            verdicts: vec![Verdict::at_most("gap", 1.25e-13, 1e-9)],
            tables: vec![Table {
                name: "sweep".into(),
                columns: vec!["K".into(), "gap".into()],
                rows: vec![vec![1.0, 0.5], vec![2.0, 0.25]],
            }],
        }
    }

    #[test]
    fn json_is_stable_and_reloadable() {
        let r = sample();
        let a = to_json(&r);
        let b = to_json(&r);
        assert_eq!(a, b);
        // every scalar round-trips bit-exactly through the printed text
        for (_, v) in &r.scalars {
            let printed = format!("{v:.16e}");
            assert_eq!(printed.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert!(a.contains("\"verdicts\""));
    }

    #[test]
    fn csv_sections() {
        let r = sample();
        let csv = to_csv(&r);
        assert!(csv.starts_with("K,gap\r\n"));
        assert_eq!(csv.matches("\r\n").count(), 3);

        let empty = Report {
            tables: vec![Table { name: "t".into(), columns: vec!["a,b".into()], rows: vec![] }],
            ..Report::default()
        };
        assert_eq!(to_csv(&empty), "\"a,b\"\r\n");
    }

    #[test]
    fn verdicts_always_carry_margins() {
        let v = Verdict::at_most("x", 2.0, 1.0);
        assert!(!v.pass);
        assert_eq!(v.margin, -1.0);
        assert!(v.margin.is_finite());
    }
}

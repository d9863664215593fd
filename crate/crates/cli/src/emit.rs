//! CSV and JSON emission.
//!
//! Integers are written bare and reals as `{:.16e}` (17 significant digits,
//! always with a decimal point), in CSV and JSON alike.

use std::io::{self, Write};
use std::path::PathBuf;

use erwlab_core::harness::Cell;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::run::Output;
use crate::CliError;

pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Real(r) => format_real(*r),
        Cell::Text(t) => csv_field(t),
    }
}

pub fn to_csv(header: &[String], rows: &[Vec<Cell>]) -> String {
    let mut out = header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(cell_text).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// serde_json formatter writing every f64 with 17 significant digits.
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
}

pub fn to_json_string<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    v.serialize(&mut ser).expect("serialising to memory cannot fail");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Int(i) => json!(i),
        Cell::Real(r) => json!(r),
        Cell::Text(t) => json!(t),
    }
}

pub fn rows_json(header: &[String], rows: &[Vec<Cell>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| Value::Object(header.iter().cloned().zip(row.iter().map(cell_json)).collect()))
            .collect(),
    )
}

/// The JSON summary; `rows` are embedded when the format is json.
pub fn summary_json(output: &Output, config: &RunConfig, wall_time: f64) -> Value {
    let mut v = json!({
        "subcommand": config.subcommand.name(),
        "params": config,
        "estimates": output.estimates,
        "details": output.details,
        "warnings": output.warnings,
        "seed": config.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time": wall_time,
    });
    if config.format == Format::Json {
        v["header"] = json!(output.header);
        v["rows"] = rows_json(&output.header, &output.rows);
    }
    v
}

pub fn summary_line(output: &Output, config: &RunConfig, wall_time: f64) -> String {
    let mut parts = vec![config.subcommand.name().to_string()];
    for (name, e) in &output.estimates {
        parts.push(format!(
            "{name} = {:.6} [{:.6}, {:.6}] ({} obs)",
            e.mean, e.ci_low, e.ci_high, e.count
        ));
    }
    if let Some(obj) = output.details.as_object() {
        for key in ["mu", "threshold", "median_holes", "inf_alpha", "kappa", "best_beta", "violations", "reference_ratio", "pooled_ratio"] {
            if let Some(v) = obj.get(key) {
                parts.push(format!("{key} = {v}"));
            }
        }
    }
    if let Some(seed) = config.seed {
        parts.push(format!("seed = {seed}"));
    }
    parts.push(format!("{} rows", output.rows.len()));
    parts.push(format!("{wall_time:.3}s"));
    parts.join("; ")
}

/// Files written by [`emit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub rows_file: Option<PathBuf>,
    pub summary_file: Option<PathBuf>,
    pub summary_line: String,
}

/// With `--out`, writes `<sub>.csv` (csv format) and `<sub>.json`; without
/// it, prints rows (csv) or the summary with rows (json) to stdout. The
/// summary line is returned for the caller to print.
pub fn emit(output: &Output, config: &RunConfig, wall_time: f64) -> Result<Emitted, CliError> {
    let line = summary_line(output, config, wall_time);
    let summary = to_json_string(&summary_json(output, config, wall_time));
    let io_err = |p: &PathBuf, e: io::Error| CliError::Runtime(format!("cannot write {}: {e}", p.display()));
    match &config.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let mut rows_file = None;
            if config.format == Format::Csv {
                let p = dir.join(format!("{}.csv", config.subcommand.name()));
                std::fs::write(&p, to_csv(&output.header, &output.rows)).map_err(|e| io_err(&p, e))?;
                rows_file = Some(p);
            }
            let p = dir.join(format!("{}.json", config.subcommand.name()));
            std::fs::write(&p, summary + "\n").map_err(|e| io_err(&p, e))?;
            Ok(Emitted { rows_file, summary_file: Some(p), summary_line: line })
        }
        None => {
            let text = match config.format {
                Format::Csv => to_csv(&output.header, &output.rows),
                Format::Json => summary + "\n",
            };
            io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
            Ok(Emitted { rows_file: None, summary_file: None, summary_line: line })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn reals_carry_17_digits_and_a_point() {
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
        assert_eq!(format_real(2.0), "2.0000000000000000e0");
        assert_eq!(format_real(-1.0 / 3.0).parse::<f64>().unwrap(), -1.0 / 3.0);
        assert_eq!(format_real(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let header = vec!["rep".to_string(), "x".to_string(), "label".to_string()];
        let rows = vec![vec![Cell::Int(0), Cell::Real(0.5), Cell::Text("a,b".into())]];
        assert_eq!(to_csv(&header, &rows), "rep,x,label\n0,5.0000000000000000e-1,\"a,b\"\n");
    }

    #[test]
    fn json_numbers_use_the_same_precision() {
        let s = to_json_string(&json!({ "a": 0.25, "b": 3 }));
        assert_eq!(s, r#"{"a":2.5000000000000000e-1,"b":3}"#);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.25));
    }

    #[test]
    fn empty_rows_give_valid_json() {
        let config = crate::config::parse_args(["erwlab", "hitting", "--r", "4", "--format", "json", "--workers", "1"]).unwrap();
        let output = Output {
            header: vec!["rep".into()],
            rows: vec![],
            estimates: BTreeMap::new(),
            details: json!({ "error": "reps must be at least 1" }),
            warnings: vec![],
        };
        let v: Value = serde_json::from_str(&to_json_string(&summary_json(&output, &config, 0.0))).unwrap();
        assert_eq!(v["rows"], json!([]));
        assert_eq!(v["subcommand"], "hitting");
    }
}

//! JSON-lines and CSV writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("expected jsonl or csv, got `{s}`")),
        }
    }
}

pub fn open(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_jsonl<W: Write>(records: &[Value], mut w: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Nested objects become dotted columns; arrays are kept as JSON text. The
/// header is the first record's columns.
pub fn write_csv<W: Write>(records: &[Value], mut w: W) -> io::Result<()> {
    let rows: Vec<Vec<(String, String)>> = records
        .iter()
        .map(|r| {
            let mut row = Vec::new();
            flatten("", r, &mut row);
            row
        })
        .collect();
    let Some(first) = rows.first() else {
        return w.flush();
    };
    let header: Vec<&str> = first.iter().map(|(k, _)| k.as_str()).collect();
    writeln!(w, "{}", header.iter().map(|h| csv_cell(h)).collect::<Vec<_>>().join(","))?;
    for row in &rows {
        let cells: Vec<String> = header
            .iter()
            .map(|h| row.iter().find(|(k, _)| k == h).map(|(_, v)| csv_cell(v)).unwrap_or_default())
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

//! Bound-verification records.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// One checked bound: `lower - tol <= value <= upper + tol`.
///
/// A missing side is unbounded. `tol` is `3 * se` for Monte Carlo entries and
/// the series tail bound for spectral ones. Informational entries are reported
/// but do not decide the overall verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub lower: Option<f64>,
    pub value: f64,
    pub se: f64,
    pub upper: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    /// Smallest signed distance to a side; negative when violated.
    pub margin: f64,
    pub informational: bool,
    pub inputs: serde_json::Value,
}

impl BoundEntry {
    pub fn new(
        name: impl Into<String>,
        lower: Option<f64>,
        value: f64,
        se: f64,
        upper: Option<f64>,
        tol: f64,
        inputs: serde_json::Value,
    ) -> Self {
        let below = lower.map_or(f64::INFINITY, |lo| value - lo);
        let above = upper.map_or(f64::INFINITY, |hi| hi - value);
        let margin = below.min(above);
        let pass = value.is_finite() && below >= -tol && above >= -tol;
        Self {
            name: name.into(),
            lower,
            value,
            se,
            upper,
            tol,
            pass,
            margin: if margin.is_finite() { margin } else { 0.0 },
            informational: false,
            inputs,
        }
    }

    /// Monte Carlo entry with `tol = k * se`.
    pub fn statistical(
        name: impl Into<String>,
        lower: Option<f64>,
        value: f64,
        se: f64,
        upper: Option<f64>,
        k: f64,
        inputs: serde_json::Value,
    ) -> Self {
        Self::new(name, lower, value, se, upper, k * se, inputs)
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundsReport {
    pub fn push(&mut self, e: BoundEntry) {
        self.entries.push(e);
    }

    /// True iff every non-informational entry passes.
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass || e.informational)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundEntry> {
        self.entries.iter().filter(|e| !e.pass && !e.informational)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "name,lower,value,se,upper,tol,pass,margin,informational")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{:e},{:e},{},{:e},{},{:e},{}",
                e.name.replace(',', ";"),
                opt(e.lower),
                e.value,
                e.se,
                opt(e.upper),
                e.tol,
                e.pass,
                e.margin,
                e.informational
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn pass_and_margin() {
        let e = BoundEntry::new("a", Some(0.0), 0.5, 0.0, Some(1.0), 0.0, json!({}));
        assert!(e.pass);
        assert_eq!(e.margin, 0.5);
        let e = BoundEntry::statistical("b", None, 1.05, 0.02, Some(1.0), 3.0, json!({}));
        assert!(e.pass);
        assert!(e.margin < 0.0);
        let e = BoundEntry::statistical("c", None, 1.1, 0.02, Some(1.0), 3.0, json!({}));
        assert!(!e.pass);
    }

    #[test]
    fn informational_entries_do_not_fail_report() {
        let mut r = BoundsReport::default();
        r.push(BoundEntry::new("x", Some(1.0), 0.0, 0.0, None, 0.0, json!({})).informational());
        assert!(r.pass());
        r.push(BoundEntry::new("y", Some(1.0), 0.0, 0.0, None, 0.0, json!({})));
        assert!(!r.pass());
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn writers_emit_one_line_per_entry() {
        let mut r = BoundsReport::default();
        r.push(BoundEntry::new("x", Some(0.0), 1.0, 0.0, None, 0.0, json!({"L": 2})));
        r.push(BoundEntry::new("y", None, 1.0, 0.1, Some(2.0), 0.3, json!({})));
        let mut out = Vec::new();
        r.write_jsonl(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: BoundEntry = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, r.entries[0]);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }
}

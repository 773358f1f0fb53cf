//! CSV datasets with a `#`-prefixed metadata header.

use std::io::Write;

use crate::scenario::SystemConstants;
use crate::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// `FFSI_BUILD_TAG` at compile time if set, else the package version.
pub fn build_tag() -> String {
    option_env!("FFSI_BUILD_TAG")
        .map(str::to_string)
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Dataset {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric cell, NaN if missing or not a number.
    pub fn number(&self, row: usize, column: &str) -> f64 {
        self.column(column)
            .and_then(|c| self.rows.get(row).and_then(|r| r[c].parse().ok()))
            .unwrap_or(f64::NAN)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# dataset: {}", self.name)?;
        writeln!(w, "# schema: {SCHEMA_VERSION}")?;
        writeln!(w, "# build: {}", build_tag())?;
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}: {v}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Standard metadata lines for a run.
pub fn annotate(ds: &mut Dataset, seed: u64, consts: &SystemConstants) {
    ds.meta("seed", seed);
    ds.meta(
        "consts",
        format!(
            "n_antennas={} n_subcarriers={} n_training={} noise_power={} rfc_limits={}",
            consts.n_antennas, consts.n_subcarriers, consts.n_training, consts.noise_power, consts.rfc_limits
        ),
    );
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_csv() {
        let mut d = Dataset::new("t", &["a", "b"]);
        d.meta("seed", 4);
        d.push(vec!["1".into(), "x,y".into()]);
        let s = d.to_csv_string();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# dataset: t");
        assert!(lines.contains(&"# seed: 4"));
        assert_eq!(lines[lines.len() - 2], "a,b");
        assert_eq!(lines[lines.len() - 1], "1,\"x,y\"");
        assert_eq!(d.number(0, "a"), 1.0);
        assert!(d.number(0, "b").is_nan());
    }
}

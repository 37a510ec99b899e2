//! Report assembly: assertions, free-form information and CSV tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `value ≤ tolerance`
    AtMost,
    /// `value ≥ tolerance`
    AtLeast,
    /// `|value − expected| ≤ tolerance`
    Equals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected: Option<f64>,
    pub pass: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtMost,
            expected: None,
            pass: value <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtLeast,
            expected: None,
            pass: value >= tolerance,
        }
    }

    pub fn equals(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::Equals,
            expected: Some(expected),
            pass: (value - expected).abs() <= tolerance,
        }
    }
}

/// A CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, T>(&mut self, row: I)
    where
        I: IntoIterator<Item = T>,
        T: ToString,
    {
        self.rows
            .push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(&self.file);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// The results of one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub scenario: String,
    pub pass: bool,
    pub assertions: Vec<Assertion>,
    pub info: Map<String, Value>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<CsvTable>,
}

impl Section {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            pass: true,
            assertions: Vec::new(),
            info: Map::new(),
            files: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, a: Assertion) {
        self.pass &= a.pass;
        self.assertions.push(a);
    }

    pub fn info(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.info.insert(key.into(), v);
    }

    pub fn table(&mut self, t: CsvTable) {
        self.files.push(t.file.clone());
        self.tables.push(t);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub seed: u64,
    /// Effective configuration, output location omitted.
    pub config: Value,
    pub pass: bool,
    pub assertions_total: usize,
    pub assertions_failed: usize,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new(
        scenario: impl Into<String>,
        seed: u64,
        config: Value,
        sections: Vec<Section>,
    ) -> Self {
        let total = sections.iter().map(|s| s.assertions.len()).sum();
        let failed = sections
            .iter()
            .flat_map(|s| &s.assertions)
            .filter(|a| !a.pass)
            .count();
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario: scenario.into(),
            seed,
            config,
            pass: failed == 0,
            assertions_total: total,
            assertions_failed: failed,
            sections,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &Assertion)> {
        self.sections
            .iter()
            .flat_map(|s| s.assertions.iter().map(move |a| (s.scenario.as_str(), a)))
            .filter(|(_, a)| !a.pass)
    }

    /// Writes `report.json` and every CSV table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for s in &self.sections {
            for t in &s.tables {
                t.write(dir)?;
            }
        }
        let mut json =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        json.push('\n');
        let path = dir.join("report.json");
        fs::write(&path, json).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertion_semantics() {
        assert!(Assertion::at_most("a", 1e-9, 1e-8).pass);
        assert!(!Assertion::at_most("a", f64::NAN, 1e-8).pass);
        assert!(Assertion::at_least("b", 0.2, 0.1).pass);
        assert!(!Assertion::equals("c", 69.0, 70.0, 0.0).pass);
        let mut s = Section::new("x");
        s.check(Assertion::at_most("ok", 0.0, 1.0));
        s.check(Assertion::at_least("bad", 0.0, 1.0));
        let r = Report::new("x", 0, Value::Null, vec![s]);
        assert!(!r.pass);
        assert_eq!((r.assertions_total, r.assertions_failed), (2, 1));
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Section::new("x");
        let mut t = CsvTable::new("scan.csv", &["lambda", "residual"]);
        t.push([1.0, 0.5]);
        t.push([0.5, 0.125]);
        s.table(t);
        Report::new("x", 3, Value::Null, vec![s])
            .write(dir.path())
            .unwrap();
        let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
        assert_eq!(csv, "lambda,residual\n1,0.5\n0.5,0.125\n");
        let json: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(json["sections"][0]["files"][0], "scan.csv");
    }
}

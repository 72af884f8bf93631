//! Run reports: named checks, expected flags, tables and timing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Counts toward the exit status.
    Check,
    /// Informational; raised flags do not fail the run.
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub sections_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub instance: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Table>,
    pub results: BTreeMap<String, serde_json::Value>,
    pub timing: Timing,
    /// Written next to the report as `<name>.json`.
    #[serde(skip)]
    pub artifacts: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(command: &str, instance: &str, seed: u64, config: serde_json::Value) -> Self {
        Report {
            command: command.into(),
            instance: instance.into(),
            seed,
            config,
            passed: true,
            checks: Vec::new(),
            tables: BTreeMap::new(),
            results: BTreeMap::new(),
            timing: Timing::default(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, value: f64, threshold: Option<f64>, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), kind: CheckKind::Check, passed, value, threshold, detail: detail.into() });
        self.passed &= passed;
    }

    /// Raised when `raised` is true; never affects `passed`.
    pub fn flag(&mut self, name: impl Into<String>, raised: bool, value: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            kind: CheckKind::Flag,
            passed: !raised,
            value,
            threshold: None,
            detail: detail.into(),
        });
    }

    pub fn table(&mut self, name: impl Into<String>, t: Table) {
        self.tables.insert(name.into(), t);
    }

    pub fn result<T: Serialize>(&mut self, name: impl Into<String>, v: &T) {
        self.results.insert(name.into(), serde_json::to_value(v).expect("results serialize"));
    }

    pub fn artifact<T: Serialize>(&mut self, name: impl Into<String>, v: &T) {
        self.artifacts.insert(name.into(), serde_json::to_value(v).expect("artifacts serialize"));
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.kind == CheckKind::Check && !c.passed)
    }

    /// Report JSON without the timing block.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing::default();
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    /// `report.json` plus one CSV per table.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self).expect("report serializes"))?;
        for (name, a) in &self.artifacts {
            std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(a).expect("artifact serializes"))?;
        }
        for (name, t) in &self.tables {
            let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv"))).map_err(std::io::Error::other)?;
            w.write_record(&t.columns).map_err(std::io::Error::other)?;
            for row in &t.rows {
                w.write_record(row.iter().map(Cell::render)).map_err(std::io::Error::other)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_do_not_fail() {
        let mut r = Report::new("check", "t", 0, serde_json::Value::Null);
        r.flag("not_prox_bounded", true, 0.0, "");
        assert!(r.passed);
        r.check("x", false, 1.0, Some(0.0), "");
        assert!(!r.passed);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn canonical_json_ignores_timing() {
        let mut a = Report::new("check", "t", 0, serde_json::Value::Null);
        let mut b = a.clone();
        a.timing.total_ms = 1.0;
        b.timing.total_ms = 2.0;
        assert_eq!(a.canonical_json(), b.canonical_json());
    }

    #[test]
    fn writes_csv_tables() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("check", "t", 0, serde_json::Value::Null);
        let mut t = Table::new(&["k", "value"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        r.table("levels", t);
        r.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("levels.csv")).unwrap();
        assert_eq!(csv, "k,value\n1,0.5\n");
        assert!(dir.path().join("report.json").exists());
    }
}

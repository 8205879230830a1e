use std::fs;
use std::path::Path;

use adiabat::report::{CheckRecord, Report};
use serde::Serialize;

/// One CSV file of a run.
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Table { file: file.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Everything a subcommand produces, kept so that a failing run still
/// writes what it has.
#[derive(Default)]
pub struct Run {
    pub model_id: String,
    pub report: Report,
    pub tables: Vec<Table>,
    pub json: Vec<(String, serde_json::Value)>,
}

impl Run {
    pub fn table(&mut self, file: &str, header: &[&str]) -> usize {
        self.tables.push(Table::new(file, header));
        self.tables.len() - 1
    }

    pub fn row(&mut self, t: usize, row: Vec<String>) {
        self.tables[t].push(row);
    }

    pub fn record(&mut self, r: CheckRecord) {
        self.report.push(r);
    }

    pub fn attach(&mut self, name: &str, v: &impl Serialize) {
        if let Ok(v) = serde_json::to_value(v) {
            self.json.push((name.into(), v));
        }
    }
}

pub fn sci(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    model: &'a str,
    check: &'a str,
    gated: bool,
    status: &'a str,
    cases: usize,
    indices: &'a [usize],
    detail: &'a str,
}

#[derive(Serialize)]
pub struct Summary<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub model_id: &'a str,
    pub exit_code: i32,
    pub passed: bool,
    pub error: Option<String>,
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

pub fn write_all<C: Serialize>(out: &Path, run: &Run, summary: &Summary<C>) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    let header: Vec<String> = ["model", "check", "status", "gated", "cases", "indices", "lhs", "rhs", "detail"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = run
        .report
        .records
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.check.clone(),
                r.status().into(),
                r.gated.to_string(),
                r.cases.to_string(),
                r.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
                r.lhs.clone(),
                r.rhs.clone(),
                r.detail.clone(),
            ]
        })
        .collect();
    write_csv(&out.join("report.csv"), &header, &rows)?;
    for t in &run.tables {
        write_csv(&out.join(&t.file), &t.header, &t.rows)?;
    }
    let checks: Vec<CheckSummary> = run
        .report
        .records
        .iter()
        .map(|r| CheckSummary { model: &r.model, check: &r.check, gated: r.gated, status: r.status(), cases: r.cases, indices: &r.indices, detail: &r.detail })
        .collect();
    let mut doc = serde_json::to_value(summary).map_err(std::io::Error::other)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("checks".into(), serde_json::to_value(checks).map_err(std::io::Error::other)?);
        for (k, v) in &run.json {
            obj.insert(k.clone(), v.clone());
        }
    }
    let text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
    fs::write(out.join("summary.json"), text + "\n")
}

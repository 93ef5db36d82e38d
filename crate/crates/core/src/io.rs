//! File formats: field CSV with a JSON grid header, versioned JSON reports,
//! and the flat diagnostics table.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::DiagnosticReport;
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, Point, ScalarField};
use crate::solver::SolveReport;

pub const SCHEMA_VERSION: u32 = 1;

pub const FIELD_COLUMNS: [&str; 5] = ["i", "j", "x1", "x2", "value"];

/// Columns of the diagnostics table. `values` packs the named auxiliary
/// numbers as `key=value` pairs separated by `;`, in key order.
pub const REPORT_COLUMNS: [&str; 18] = [
    "name",
    "lhs",
    "rhs",
    "ratio",
    "slack",
    "component",
    "center_x1",
    "center_x2",
    "r",
    "r_outer",
    "p1",
    "p2",
    "eps",
    "sigma",
    "h",
    "note",
    "values",
    "pass",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub schema_version: u32,
    pub origin: Point,
    pub extent: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl GridHeader {
    pub fn new(grid: &Grid) -> Self {
        GridHeader {
            schema_version: SCHEMA_VERSION,
            origin: grid.origin(),
            extent: grid.extent(),
            nx: grid.nx(),
            ny: grid.ny(),
            h: grid.h(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        check_version(self.schema_version)?;
        Grid::new(self.origin, self.extent, self.nx, self.ny)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReportFile {
    pub schema_version: u32,
    pub report: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub schema_version: u32,
    pub reports: Vec<DiagnosticReport>,
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::param("schema_version", format!("expected {SCHEMA_VERSION}, got {v}")));
    }
    Ok(())
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn field_csv(field: &ScalarField) -> Result<Vec<u8>> {
    let g = field.grid();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FIELD_COLUMNS)?;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let p = g.node(i, j);
            w.write_record([
                i.to_string(),
                j.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                field.at(i, j).to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `<stem>.csv` and its grid header `<stem>.json` into `dir`.
pub fn write_field(dir: &Path, stem: &str, field: &ScalarField) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), &field_csv(field)?)?;
    write_atomic(
        &dir.join(format!("{stem}.json")),
        &to_json_pretty(&GridHeader::new(field.grid()))?,
    )
}

#[derive(Deserialize)]
struct FieldRow {
    i: usize,
    j: usize,
    #[allow(dead_code)]
    x1: f64,
    #[allow(dead_code)]
    x2: f64,
    value: f64,
}

/// Reads a field CSV against the grid described by its header.
pub fn read_field_csv(csv_bytes: &[u8], header: &GridHeader) -> Result<ScalarField> {
    let grid = header.grid()?;
    let mut values = vec![f64::NAN; grid.node_count()];
    let mut r = csv::Reader::from_reader(csv_bytes);
    if r.headers()?.iter().ne(FIELD_COLUMNS) {
        return Err(Error::FieldMismatch(format!("expected columns {}", FIELD_COLUMNS.join(","))));
    }
    for row in r.deserialize() {
        let row: FieldRow = row?;
        if row.i >= grid.nx() || row.j >= grid.ny() {
            return Err(Error::FieldMismatch(format!("node ({}, {}) outside the grid", row.i, row.j)));
        }
        values[grid.node_index(row.i, row.j)] = row.value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::FieldMismatch("missing nodes in field CSV".into()));
    }
    ScalarField::new(grid, values)
}

pub fn read_field(dir: &Path, stem: &str) -> Result<ScalarField> {
    let header: GridHeader = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    read_field_csv(&fs::read(dir.join(format!("{stem}.csv")))?, &header)
}

pub fn solve_report_json(report: &SolveReport) -> Result<Vec<u8>> {
    to_json_pretty(&SolveReportFile {
        schema_version: SCHEMA_VERSION,
        report: report.clone(),
    })
}

pub fn diagnostics_json(reports: &[DiagnosticReport]) -> Result<Vec<u8>> {
    to_json_pretty(&DiagnosticsFile {
        schema_version: SCHEMA_VERSION,
        reports: reports.to_vec(),
    })
}

pub fn read_diagnostics_json(bytes: &[u8]) -> Result<Vec<DiagnosticReport>> {
    let file: DiagnosticsFile = serde_json::from_slice(bytes)?;
    check_version(file.schema_version)?;
    Ok(file.reports)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_row(rep: &DiagnosticReport) -> Vec<String> {
    let p = &rep.params;
    let values = p
        .values
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";");
    vec![
        rep.name.clone(),
        rep.lhs.to_string(),
        rep.rhs.to_string(),
        opt(rep.ratio),
        rep.slack.to_string(),
        match p.component {
            Some(Axis::X1) => "x1".into(),
            Some(Axis::X2) => "x2".into(),
            None => String::new(),
        },
        opt(p.center.map(|c| c[0])),
        opt(p.center.map(|c| c[1])),
        opt(p.r),
        opt(p.r_outer),
        p.p1.to_string(),
        p.p2.to_string(),
        p.eps.to_string(),
        p.sigma.to_string(),
        p.h.to_string(),
        p.note.clone().unwrap_or_default(),
        values,
        rep.pass.to_string(),
    ]
}

/// Flat diagnostics table with [`REPORT_COLUMNS`].
pub fn reports_csv(reports: &[DiagnosticReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS)?;
    for rep in reports {
        w.write_record(report_row(rep))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

//! File formats: numeric CSV matrices, label files, key-value summaries and
//! the JSON run manifest.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use convex_bicluster::admm::AdmmConfig;
use convex_bicluster::tuning::{GraphSpec, TuningGrid};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SUMMARY_FORMAT: &str = "convex-bicluster-summary/1";
pub const MANIFEST_FORMAT: &str = "convex-bicluster-manifest/1";

/// A parsed matrix with its optional header row and row-name column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub values: Array2<f64>,
    pub col_names: Option<Vec<String>>,
    pub row_names: Option<Vec<String>>,
}

fn is_number(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

/// Parses comma-separated numeric data.
///
/// The first record is a header when any of its cells after the first is
/// non-numeric (or, for single-column input, when its only cell is). The first
/// column holds row names when any data record has a non-numeric first cell.
pub fn parse_matrix(text: &str, source: &str) -> Result<CsvMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    let Some((_, first)) = records.first() else {
        return Err(CliError::parse(source, 1, 1, "no data"));
    };
    let header = if first.len() == 1 {
        !is_number(&first[0])
    } else {
        first[1..].iter().any(|c| !is_number(c))
    };
    let body = if header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(CliError::parse(source, records[0].0, 1, "header without data rows"));
    }
    let has_row_names = first.len() > 1 && body.iter().any(|(_, r)| !is_number(&r[0]));
    let offset = usize::from(has_row_names);

    let width = first.len() - offset;
    let mut values = Array2::zeros((body.len(), width));
    let mut row_names = Vec::new();
    for (i, (line, rec)) in body.iter().enumerate() {
        if has_row_names {
            row_names.push(rec[0].clone());
        }
        for (j, cell) in rec[offset..].iter().enumerate() {
            let column = j + offset + 1;
            if cell.is_empty() {
                return Err(CliError::parse(source, *line, column, "empty cell"));
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::parse(source, *line, column, format!("`{cell}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(CliError::parse(source, *line, column, format!("non-finite value `{cell}`")));
            }
            values[[i, j]] = v;
        }
    }
    Ok(CsvMatrix {
        values,
        col_names: header.then(|| first[offset..].to_vec()),
        row_names: has_row_names.then_some(row_names),
    })
}

fn csv_error(source: &str, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => CliError::parse(
            source,
            line,
            (*len as usize).min(*expected_len as usize) + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        _ => CliError::parse(source, line, 1, e.to_string()),
    }
}

pub fn read_matrix(path: &Path) -> Result<CsvMatrix, CliError> {
    let text = read_text(path)?;
    parse_matrix(&text, &path.display().to_string())
}

/// Serialises with 17 significant digits, so reading back is exact.
pub fn format_matrix(values: &Array2<f64>, col_names: Option<&[String]>, row_names: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(names) = col_names {
        if row_names.is_some() {
            out.push(',');
        }
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for (i, row) in values.rows().into_iter().enumerate() {
        if let Some(names) = row_names {
            out.push_str(&names[i]);
            out.push(',');
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(
    path: &Path,
    values: &Array2<f64>,
    col_names: Option<&[String]>,
    row_names: Option<&[String]>,
) -> Result<(), CliError> {
    write_text(path, &format_matrix(values, col_names, row_names))
}

/// One non-negative integer per line; blank lines are ignored.
pub fn parse_labels(text: &str, source: &str) -> Result<Vec<usize>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| {
                CliError::parse(source, i as u64 + 1, 1, format!("`{}` is not a label", l.trim()))
            })
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    parse_labels(&read_text(path)?, &path.display().to_string())
}

pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<(), CliError> {
    write_text(path, &format_labels(labels))
}

/// Ordered `key = value` lines, the first being the format tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = format!("format = {SUMMARY_FORMAT}\n");
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == format!("format = {SUMMARY_FORMAT}") => {}
            _ => return Err(CliError::parse(source, 1, 1, "missing or unsupported format line")),
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| CliError::parse(source, i as u64 + 1, 1, "expected `key = value`"))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &self.render())
    }
}

/// One fitted grid point as listed in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub gamma1: f64,
    pub gamma2: f64,
    pub directory: String,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub n_row_clusters: usize,
    pub n_col_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: AdmmConfig,
    pub graph: Option<GraphSpec>,
    pub grid: Option<TuningGrid>,
    pub seed: Option<u64>,
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: AdmmConfig) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            subcommand: subcommand.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            graph: None,
            grid: None,
            seed: None,
            entries: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self, CliError> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| CliError::parse(source, e.line() as u64, e.column(), e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::parse(source, 1, 1, format!("unsupported manifest format `{}`", m.format)));
        }
        Ok(m)
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

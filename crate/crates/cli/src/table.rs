//! Small numeric CSV tables with a header row.

use std::fmt::Write as _;
use std::path::Path;

use physid::dynamics::ForcingSignal;

use crate::error::{CliError, Result};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::data(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::data(path, format!("line {line}: {e}")))?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::data(path, format!("line {line}: not a finite number: '{c}'"))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(path, "no data rows"));
    }
    Ok(Table { header, rows })
}

/// `t,u1..uF`: every column after `t` is a forcing channel.
pub fn read_forcing(path: &Path) -> Result<ForcingSignal> {
    let table = read_table(path)?;
    if table.header.first().map(String::as_str) != Some("t") || table.header.len() < 2 {
        return Err(CliError::data(path, "expected header 't,u1,...'"));
    }
    let ts = table.rows.iter().map(|r| r[0]).collect();
    let values = table.rows.iter().map(|r| r[1..].to_vec()).collect();
    ForcingSignal::new(ts, values).map_err(|e| CliError::data(path, e.to_string()))
}

pub fn write_table(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    let n = columns.first().map_or(0, |c| c.len());
    for k in 0..n {
        let cells: Vec<String> = columns.iter().map(|c| c[k].to_string()).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    write_file(path, s)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

//! `metrics.csv`: one row per evaluation, fixed header, empty cells for
//! absent values, floats in shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::metrics::MetricsRecord;
use crate::{Error, Result};

pub const HEADER: &str = "epoch,acc_aa,acc_ac,acc_ca,acc_cc,unbiased,avg_group,worst_group,eo_gap_max,eo_gap_mean,disc_acc_left,disc_acc_right,loss_c,loss_d";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn format_row(r: &MetricsRecord) -> String {
    let cells = [
        r.acc_aa,
        r.acc_ac,
        r.acc_ca,
        r.acc_cc,
        Some(r.unbiased),
        Some(r.avg_group),
        Some(r.worst_group),
        r.eo_gap_max,
        r.eo_gap_mean,
        r.disc_acc_left,
        r.disc_acc_right,
        r.loss_c,
        r.loss_d,
    ];
    let mut line = r.epoch.to_string();
    for c in cells {
        line.push(',');
        line.push_str(&cell(c));
    }
    line
}

/// Appends rows as they are produced, flushing after each.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.line(HEADER)?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, rec: &MetricsRecord) -> Result<()> {
        self.line(&format_row(rec))
    }
}

/// A parsed metrics file: named numeric columns with possibly-empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl MetricsTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::format(path, "metrics csv", detail);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("file is empty".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if columns.first().map(String::as_str) != Some("epoch") {
            return Err(bad("first column must be `epoch`".into()));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns.len() {
                return Err(bad(format!(
                    "row {} has {} cells, header has {}",
                    n + 1,
                    cells.len(),
                    columns.len()
                )));
            }
            let row = cells
                .iter()
                .map(|c| {
                    let c = c.trim();
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|_| bad(format!("row {}: `{c}` is not a number", n + 1)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if row[0].is_none() {
                return Err(bad(format!("row {} has no epoch", n + 1)));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(bad("no data rows".into()));
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// `(epoch, value)` pairs of a column, skipping empty cells.
    pub fn series(&self, column: &str) -> Option<Vec<(f64, f64)>> {
        let j = self.columns.iter().position(|c| c == column)?;
        Some(
            self.rows
                .iter()
                .filter_map(|r| Some((r[0]?, r[j]?)))
                .collect(),
        )
    }
}

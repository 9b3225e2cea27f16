//! Cell-by-cell comparison of computed results against transcribed
//! reference tables.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::csv_io::CsvError;
use super::report::Cells;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceKind {
    /// `tolerance` is the displayed precision; the computed value rounded to
    /// it must be within one unit of the reference.
    Ulp,
    Abs,
    Rel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    /// Failures make the check fail.
    Gate,
    /// Compared and listed, never failing.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCell {
    pub table: String,
    pub row: String,
    pub column: String,
    pub value: f64,
    pub tolerance: f64,
    pub tolerance_kind: ToleranceKind,
    pub status: CellStatus,
    pub provenance: String,
}

impl GoldenCell {
    pub fn accepts(&self, computed: f64) -> bool {
        if !computed.is_finite() {
            return false;
        }
        let slack = 1e-9 * self.value.abs().max(self.tolerance);
        match self.tolerance_kind {
            ToleranceKind::Ulp => {
                let u = self.tolerance;
                let rounded = (computed / u).round() * u;
                (rounded - self.value).abs() <= u + slack
            }
            ToleranceKind::Abs => (computed - self.value).abs() <= self.tolerance + slack,
            ToleranceKind::Rel => {
                (computed - self.value).abs() <= self.tolerance * self.value.abs() + 1e-12
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenDiff {
    pub cell: GoldenCell,
    /// `None` when the result has no such cell.
    pub computed: Option<f64>,
}

impl fmt::Display for GoldenDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.cell;
        let computed = self
            .computed
            .map_or("missing".to_string(), |v| format!("{v}"));
        write!(
            f,
            "{} / {} / {}: expected {} ({:?} {}), computed {} [{}]",
            c.table,
            c.row,
            c.column,
            c.value,
            c.tolerance_kind,
            c.tolerance,
            computed,
            c.provenance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldenReport {
    pub checked: usize,
    /// Gate cells out of tolerance.
    pub failures: Vec<GoldenDiff>,
    /// Info cells out of tolerance.
    pub info: Vec<GoldenDiff>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn read_golden(path: &Path) -> Result<Vec<GoldenCell>, CsvError> {
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e| CsvError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn golden_check(computed: &Cells, golden: &[GoldenCell]) -> GoldenReport {
    let mut report = GoldenReport::default();
    for cell in golden {
        report.checked += 1;
        let key = (cell.table.clone(), cell.row.clone(), cell.column.clone());
        let value = computed.get(&key).copied();
        if value.is_some_and(|v| cell.accepts(v)) {
            continue;
        }
        let diff = GoldenDiff {
            cell: cell.clone(),
            computed: value,
        };
        match cell.status {
            CellStatus::Gate => report.failures.push(diff),
            CellStatus::Info => report.info.push(diff),
        }
    }
    report
}

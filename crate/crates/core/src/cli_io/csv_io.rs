//! CSV readers for fixture data and writers for results. All files have a
//! header row and use `.` as decimal separator.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::capacity_timing::CrossingReport;
use crate::control_needs::ControlSeries;
use crate::forecast_engine::ForecastResult;
use crate::profile::{HourlyProfile, HOURS};
use crate::urban_density::DensityTable;

/// Tolerance on the sum of a usage-share file before renormalization.
pub const SHARE_FILE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot access {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", .path.display())]
    Format { path: PathBuf, message: String },
}

impl CsvError {
    pub fn is_io(&self) -> bool {
        matches!(self, CsvError::Io { .. })
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CsvError> {
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn format_err(path: &Path, message: impl Into<String>) -> CsvError {
    CsvError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(
    path: &Path,
    header: &[&str],
) -> Result<Vec<T>, CsvError> {
    let mut rdr = reader(path)?;
    let found = rdr
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(format_err(
            path,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| format_err(path, e.to_string())))
        .collect()
}

fn hourly_rows<const N: usize>(
    path: &Path,
    rows: Vec<(usize, [f64; N])>,
) -> Result<[[f64; HOURS]; N], CsvError> {
    let mut out = [[f64::NAN; HOURS]; N];
    for (hour, values) in rows {
        if hour >= HOURS {
            return Err(format_err(path, format!("hour {hour} outside 0-23")));
        }
        if !out[0][hour].is_nan() {
            return Err(format_err(path, format!("hour {hour} appears twice")));
        }
        for (k, v) in values.into_iter().enumerate() {
            out[k][hour] = v;
        }
    }
    if let Some(h) = (0..HOURS).find(|&h| out[0][h].is_nan()) {
        return Err(format_err(path, format!("hour {h} is missing")));
    }
    Ok(out)
}

/// Reads `hour,inbound,outbound`.
pub fn read_crossings(path: &Path) -> Result<([f64; HOURS], [f64; HOURS]), CsvError> {
    #[derive(Deserialize)]
    struct Row {
        hour: usize,
        inbound: f64,
        outbound: f64,
    }
    let rows: Vec<Row> = read_rows(path, &["hour", "inbound", "outbound"])?;
    let [inbound, outbound] = hourly_rows(
        path,
        rows.into_iter()
            .map(|r| (r.hour, [r.inbound, r.outbound]))
            .collect(),
    )?;
    Ok((inbound, outbound))
}

/// Reads `hour,share`; the sum must be 1 within [`SHARE_FILE_TOLERANCE`]
/// and the profile is renormalized exactly.
pub fn read_share_profile(path: &Path) -> Result<HourlyProfile, CsvError> {
    #[derive(Deserialize)]
    struct Row {
        hour: usize,
        share: f64,
    }
    let rows: Vec<Row> = read_rows(path, &["hour", "share"])?;
    let [shares] = hourly_rows(
        path,
        rows.into_iter().map(|r| (r.hour, [r.share])).collect(),
    )?;
    let sum: f64 = shares.iter().sum();
    if (sum - 1.0).abs() > SHARE_FILE_TOLERANCE {
        return Err(format_err(path, format!("shares sum to {sum}, expected 1")));
    }
    HourlyProfile::normalized_share(&shares).map_err(|e| format_err(path, e.to_string()))
}

/// Reads `year,value`.
pub fn read_history(path: &Path) -> Result<BTreeMap<i32, f64>, CsvError> {
    #[derive(Deserialize)]
    struct Row {
        year: i32,
        value: f64,
    }
    let rows: Vec<Row> = read_rows(path, &["year", "value"])?;
    let mut out = BTreeMap::new();
    for r in rows {
        if out.insert(r.year, r.value).is_some() {
            return Err(format_err(path, format!("year {} appears twice", r.year)));
        }
    }
    Ok(out)
}

/// Creates `path` and writes `rows` under `header`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CsvError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let io = |source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_io = |e: csv::Error| CsvError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record(header).map_err(csv_io)?;
    for r in rows {
        w.write_record(r).map_err(csv_io)?;
    }
    let mut inner = w.into_inner().map_err(|e| io(e.into_error()))?;
    inner.flush().map_err(io)
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub const FORECAST_HEADER: [&str; 8] = [
    "year",
    "scenario",
    "device",
    "application",
    "category",
    "hour",
    "volume_gb_km2",
    "density_per_km2",
];

/// Long format: one row per year, device, application and hour.
pub fn forecast_rows(result: &ForecastResult) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (yi, &year) in result.years.iter().enumerate() {
        for d in &result.devices {
            for a in &d.applications {
                for h in 0..HOURS {
                    rows.push(vec![
                        year.to_string(),
                        result.scenario.clone(),
                        d.id.clone(),
                        a.id.clone(),
                        a.category.as_str().to_string(),
                        h.to_string(),
                        num(a.volume[yi][h]),
                        num(d.density[yi][h]),
                    ]);
                }
            }
        }
    }
    rows
}

pub fn write_forecast(path: &Path, results: &[ForecastResult]) -> Result<(), CsvError> {
    write_csv(
        path,
        &FORECAST_HEADER,
        results.iter().flat_map(forecast_rows),
    )
}

pub fn write_penetration(path: &Path, results: &[ForecastResult]) -> Result<(), CsvError> {
    let mut rows = Vec::new();
    for r in results {
        for &year in &r.years {
            for d in &r.devices {
                rows.push(vec![
                    year.to_string(),
                    r.scenario.clone(),
                    d.id.clone(),
                    d.estimate.as_str().to_string(),
                    num(d.penetration.value(year)),
                ]);
            }
        }
    }
    write_csv(
        path,
        &["year", "scenario", "device", "estimate", "penetration"],
        rows,
    )
}

pub fn write_densities(path: &Path, table: &DensityTable) -> Result<(), CsvError> {
    let rows = table.iter().flat_map(|(b, p)| {
        (0..HOURS).map(move |h| vec![b.as_str().to_string(), h.to_string(), num(p[h])])
    });
    write_csv(path, &["binding", "hour", "density_per_km2"], rows)
}

/// Totals and per-device contributions; `device` is `all` on total rows.
pub fn write_control(path: &Path, series: &[ControlSeries]) -> Result<(), CsvError> {
    let mut rows = Vec::new();
    for s in series {
        for y in &s.years {
            for (name, unit, v) in [
                ("attachment", "requests/min/km2", &y.attachment),
                ("handover", "handovers/h/km2", &y.handover),
            ] {
                rows.push(vec![
                    y.year.to_string(),
                    s.scenario.clone(),
                    name.into(),
                    "all".into(),
                    num(v.total),
                    unit.into(),
                ]);
                for (d, c) in &v.contributions {
                    rows.push(vec![
                        y.year.to_string(),
                        s.scenario.clone(),
                        name.into(),
                        d.clone(),
                        num(*c),
                        unit.into(),
                    ]);
                }
            }
        }
    }
    write_csv(
        path,
        &["year", "scenario", "indicator", "device", "value", "unit"],
        rows,
    )
}

pub fn write_capacity(path: &Path, reports: &[CrossingReport]) -> Result<(), CsvError> {
    let rows = reports.iter().flat_map(|r| {
        r.crossings.iter().map(move |c| {
            vec![
                r.scenario.clone(),
                c.assumption.clone(),
                num(c.multiplier),
                r.baseline_year.to_string(),
                c.year.map(|y| y.to_string()).unwrap_or_default(),
            ]
        })
    });
    write_csv(
        path,
        &[
            "scenario",
            "assumption",
            "multiplier",
            "baseline_year",
            "crossing_year",
        ],
        rows,
    )
}

/// Wide per-hour stacked contributions, one column per application.
pub fn write_plot(path: &Path, result: &ForecastResult) -> Result<(), CsvError> {
    let apps: Vec<(usize, usize)> = result
        .devices
        .iter()
        .enumerate()
        .flat_map(|(di, d)| (0..d.applications.len()).map(move |ai| (di, ai)))
        .collect();
    let mut header = vec!["year".to_string(), "hour".to_string()];
    header.extend(
        apps.iter()
            .map(|&(di, ai)| result.devices[di].applications[ai].id.clone()),
    );
    header.push("total".into());
    let mut rows = Vec::new();
    for (yi, &year) in result.years.iter().enumerate() {
        for h in 0..HOURS {
            let mut row = vec![year.to_string(), h.to_string()];
            let mut total = 0.0;
            for &(di, ai) in &apps {
                let v = result.devices[di].applications[ai].volume[yi][h];
                total += v;
                row.push(num(v));
            }
            row.push(num(total));
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, rows)
}

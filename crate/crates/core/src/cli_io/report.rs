//! Summary tables of daily and peak-hour volume and density by traffic
//! category and application, with baseline, per-scenario target year, share
//! and growth-rate columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::common::YearRange;
use crate::forecast_engine::{cagr, ForecastError, ForecastResult};
use crate::profile::{median24, HOURS};
use crate::volume_models::TrafficCategory;

use super::config::ScenarioConfig;

/// (table, row, column)
pub type CellKey = (String, String, String);
pub type Cells = BTreeMap<CellKey, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    DailyVolume,
    PeakVolume,
    MedianDensity,
    PeakDensity,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::DailyVolume,
        Metric::PeakVolume,
        Metric::MedianDensity,
        Metric::PeakDensity,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Metric::DailyVolume => "daily_volume",
            Metric::PeakVolume => "peak_volume",
            Metric::MedianDensity => "median_density",
            Metric::PeakDensity => "peak_density",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::DailyVolume => "Daily user volume",
            Metric::PeakVolume => "Peak hour user volume",
            Metric::MedianDensity => "Daily median device density",
            Metric::PeakDensity => "Peak hour device density",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::DailyVolume | Metric::PeakVolume => "GB/km2",
            Metric::MedianDensity | Metric::PeakDensity => "devices/km2",
        }
    }

    fn is_volume(self) -> bool {
        matches!(self, Metric::DailyVolume | Metric::PeakVolume)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub is_group: bool,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub metric: Metric,
    pub columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

/// Hourly series of one application under `metric`: volume or the density
/// of the device running it.
fn app_hourly(result: &ForecastResult, yi: usize, app: &str, metric: Metric) -> [f64; HOURS] {
    for d in &result.devices {
        if let Some(a) = d.applications.iter().find(|a| a.id == app) {
            return if metric.is_volume() {
                a.volume[yi]
            } else {
                d.density[yi]
            };
        }
    }
    [0.0; HOURS]
}

fn reduce(metric: Metric, hourly: &[f64; HOURS], peak: usize) -> f64 {
    match metric {
        Metric::DailyVolume => hourly.iter().sum(),
        Metric::MedianDensity => median24(hourly),
        Metric::PeakVolume | Metric::PeakDensity => hourly[peak],
    }
}

fn group_value(
    result: &ForecastResult,
    year: i32,
    apps: &[String],
    metric: Metric,
) -> Result<f64, ForecastError> {
    let yi = result.year_index(year)?;
    let peak = result.peak_hour(year)?.hour;
    let mut sum = [0.0; HOURS];
    for a in apps {
        let h = app_hourly(result, yi, a, metric);
        for k in 0..HOURS {
            sum[k] += h[k];
        }
    }
    Ok(reduce(metric, &sum, peak))
}

/// Builds all four tables. The baseline column comes from `results[0]`.
pub fn summary_tables(
    results: &[ForecastResult],
    baseline_year: i32,
    target_year: i32,
) -> Result<Vec<SummaryTable>, ForecastError> {
    let Some(base) = results.first() else {
        return Ok(Vec::new());
    };
    let mut by_category: BTreeMap<TrafficCategory, Vec<String>> = BTreeMap::new();
    for d in &base.devices {
        for a in &d.applications {
            by_category
                .entry(a.category)
                .or_default()
                .push(a.id.clone());
        }
    }
    for apps in by_category.values_mut() {
        apps.sort();
    }

    let mut columns = vec![baseline_year.to_string(), format!("{baseline_year}_share")];
    for r in results {
        columns.push(format!("{}_{target_year}", r.scenario));
        columns.push(format!("{}_{target_year}_share", r.scenario));
        columns.push(format!("{}_cagr", r.scenario));
    }
    let span = (target_year - baseline_year).max(0) as u32;

    let mut tables = Vec::new();
    for metric in Metric::ALL {
        let mut groups: Vec<(String, bool, Vec<String>)> = Vec::new();
        for c in TrafficCategory::ALL {
            if metric.is_volume() && c == TrafficCategory::MachineLowActivity {
                continue;
            }
            let Some(apps) = by_category.get(&c) else {
                continue;
            };
            groups.push((c.label().to_string(), true, apps.clone()));
            for a in apps {
                groups.push((a.clone(), false, vec![a.clone()]));
            }
        }
        let all: Vec<String> = groups
            .iter()
            .filter(|g| !g.1)
            .flat_map(|g| g.2.clone())
            .collect();
        groups.push(("Total".to_string(), true, all.clone()));

        let base_total = group_value(base, baseline_year, &all, metric)?;
        let mut totals = Vec::new();
        for r in results {
            totals.push(group_value(r, target_year, &all, metric)?);
        }
        let share = |v: f64, t: f64| if t > 0.0 { Some(v / t) } else { None };

        let mut rows = Vec::new();
        for (label, is_group, apps) in &groups {
            let b = group_value(base, baseline_year, apps, metric)?;
            let mut values = vec![Some(b), share(b, base_total)];
            for (r, &t) in results.iter().zip(&totals) {
                let v = group_value(r, target_year, apps, metric)?;
                values.push(Some(v));
                values.push(share(v, t));
                values.push(if span > 0 {
                    cagr(b, v, span).ok()
                } else {
                    None
                });
            }
            rows.push(SummaryRow {
                label: label.clone(),
                is_group: *is_group,
                values,
            });
        }
        tables.push(SummaryTable {
            metric,
            columns: columns.clone(),
            rows,
        });
    }
    Ok(tables)
}

pub fn table_cells(tables: &[SummaryTable]) -> Cells {
    let mut cells = Cells::new();
    for t in tables {
        for r in &t.rows {
            for (c, v) in t.columns.iter().zip(&r.values) {
                if let Some(v) = v {
                    cells.insert((t.metric.id().to_string(), r.label.clone(), c.clone()), *v);
                }
            }
        }
    }
    cells
}

/// Penetration of every device variant, columns `{year}_{estimate}`.
pub fn penetration_cells(config: &ScenarioConfig, years: YearRange) -> Cells {
    let mut cells = Cells::new();
    for d in &config.devices {
        for (e, model) in d.penetration.iter() {
            let Ok(series) = model.evaluate(years) else {
                continue;
            };
            for y in years.iter() {
                cells.insert(
                    (
                        "penetration".to_string(),
                        d.id.clone(),
                        format!("{y}_{}", e.as_str()),
                    ),
                    series.value(y),
                );
            }
        }
    }
    cells
}

/// Scenario-level scalars: peak hour, peak share and totals per year.
pub fn scenario_cells(results: &[ForecastResult]) -> Result<Cells, ForecastError> {
    let mut cells = Cells::new();
    for r in results {
        for &y in &r.years {
            let p = r.peak_hour(y)?;
            let key = |c: &str| {
                (
                    "scenario".to_string(),
                    r.scenario.clone(),
                    format!("{y}_{c}"),
                )
            };
            cells.insert(key("peak_hour"), p.hour as f64);
            cells.insert(key("peak_share"), p.share);
            cells.insert(key("daily_total"), r.daily_total(y)?);
        }
    }
    Ok(cells)
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 0.1 {
        format!("{v:.2}")
    } else {
        format!("{v:.2e}")
    }
}

fn fmt_percent(v: f64) -> String {
    format!("{:.1} %", v * 100.0)
}

/// Fixed-width text rendering.
pub fn render_text(tables: &[SummaryTable]) -> String {
    let mut out = String::new();
    for t in tables {
        let _ = writeln!(out, "{} [{}]", t.metric.title(), t.metric.unit());
        let label_w = t
            .rows
            .iter()
            .map(|r| r.label.len() + 2)
            .max()
            .unwrap_or(10)
            .max(10);
        let _ = write!(out, "{:<label_w$}", "");
        for c in &t.columns {
            let _ = write!(out, "{c:>w$}", w = c.len().max(14) + 2);
        }
        out.push('\n');
        for r in &t.rows {
            let label = if r.is_group {
                r.label.clone()
            } else {
                format!("  {}", r.label)
            };
            let _ = write!(out, "{label:<label_w$}");
            for (c, v) in t.columns.iter().zip(&r.values) {
                let s = match v {
                    None => "-".to_string(),
                    Some(v) if c.ends_with("_share") || c.ends_with("_cagr") => fmt_percent(*v),
                    Some(v) => fmt_value(*v),
                };
                let _ = write!(out, "{s:>w$}", w = c.len().max(14) + 2);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

//! Composes penetration, urban densities and application volumes into hourly
//! volume and density tensors for a scenario.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Estimate, Variants, YearRange};
use crate::control_needs::ControlRole;
use crate::diffusion::{DiffusionError, PenetrationModel, PenetrationSeries};
use crate::profile::{argmax24, median24, HourlyProfile, ProfileUnit, HOURS};
use crate::urban_density::{DensityBinding, DensityTable};
use crate::volume_models::{allocate_hourly, ApplicationSpec, TrafficCategory, VolumeError};

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("device `{device}`: density `{}` is not available", .binding.as_str())]
    UnknownDensity {
        device: String,
        binding: DensityBinding,
    },
    #[error("device `{device}`: no {estimate} penetration variant (and no medium fallback)")]
    MissingPenetration { device: String, estimate: Estimate },
    #[error("application `{application}`: no {estimate} growth variant (and no medium fallback)")]
    MissingGrowth {
        application: String,
        estimate: Estimate,
    },
    #[error("device `{device}`: {source}")]
    Diffusion {
        device: String,
        source: DiffusionError,
    },
    #[error("application `{application}`: {source}")]
    Volume {
        application: String,
        source: VolumeError,
    },
    #[error("year {0} is not part of the forecast")]
    UnknownYear(i32),
    #[error("cagr undefined: start value {0} is not positive")]
    CagrDomain(f64),
}

/// What a device's penetration is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdoptingBody {
    Population,
    Stock,
    Area,
    Buildings,
    Retailers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub adopting_body: AdoptingBody,
    pub penetration: Variants<PenetrationModel>,
    pub density: DensityBinding,
    #[serde(default)]
    pub applications: Vec<ApplicationSpec>,
    #[serde(default)]
    pub control: ControlRole,
}

/// Estimate selection for one forecast run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Bound used wherever no override applies.
    pub default: Estimate,
    #[serde(default)]
    pub devices: BTreeMap<String, Estimate>,
    #[serde(default)]
    pub applications: BTreeMap<String, Estimate>,
    pub control: Estimate,
}

impl Scenario {
    pub fn slow() -> Self {
        Self::uniform("slow", Estimate::Low)
    }

    pub fn rapid() -> Self {
        Self::uniform("rapid", Estimate::High)
    }

    pub fn uniform(name: &str, estimate: Estimate) -> Self {
        Self {
            name: name.to_string(),
            default: estimate,
            devices: BTreeMap::new(),
            applications: BTreeMap::new(),
            control: estimate,
        }
    }

    pub fn device_estimate(&self, id: &str) -> Estimate {
        self.devices.get(id).copied().unwrap_or(self.default)
    }

    pub fn application_estimate(&self, id: &str) -> Estimate {
        self.applications.get(id).copied().unwrap_or(self.default)
    }
}

/// Everything a forecast needs besides the scenario and years.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastInputs {
    pub devices: Vec<DeviceSpec>,
    pub densities: DensityTable,
    pub profiles: BTreeMap<String, HourlyProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationForecast {
    pub id: String,
    pub category: TrafficCategory,
    /// Growth variant used; `None` for applications without volume.
    pub estimate: Option<Estimate>,
    /// GB/day per device, by year.
    pub daily_volume: Vec<f64>,
    /// GB/km² per hour, by year.
    pub volume: Vec<[f64; HOURS]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceForecast {
    pub id: String,
    pub estimate: Estimate,
    pub binding: DensityBinding,
    pub penetration: PenetrationSeries,
    /// devices/km² per hour, by year.
    pub density: Vec<[f64; HOURS]>,
    /// Sorted by id.
    pub applications: Vec<ApplicationForecast>,
}

/// Volume tensor (year × device × application × hour) and density tensor
/// (year × device × hour). Devices and applications are sorted by id; all
/// sums run in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub scenario: String,
    pub years: Vec<i32>,
    pub devices: Vec<DeviceForecast>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakHour {
    pub hour: usize,
    pub volume: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianDensity {
    pub total: f64,
    pub per_device: Vec<(String, f64)>,
}

impl ForecastResult {
    pub fn year_index(&self, year: i32) -> Result<usize, ForecastError> {
        self.years
            .iter()
            .position(|&y| y == year)
            .ok_or(ForecastError::UnknownYear(year))
    }

    pub fn device(&self, id: &str) -> Option<&DeviceForecast> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn application(&self, id: &str) -> Option<(&DeviceForecast, &ApplicationForecast)> {
        self.devices
            .iter()
            .flat_map(|d| d.applications.iter().map(move |a| (d, a)))
            .find(|(_, a)| a.id == id)
    }

    /// Daily GB/km² of one application.
    pub fn application_total(&self, year: i32, id: &str) -> Result<f64, ForecastError> {
        let yi = self.year_index(year)?;
        Ok(self
            .application(id)
            .map_or(0.0, |(_, a)| a.volume[yi].iter().sum()))
    }

    pub fn category_total(
        &self,
        year: i32,
        category: TrafficCategory,
    ) -> Result<f64, ForecastError> {
        let yi = self.year_index(year)?;
        let mut total = 0.0;
        for d in &self.devices {
            for a in d.applications.iter().filter(|a| a.category == category) {
                total += a.volume[yi].iter().sum::<f64>();
            }
        }
        Ok(total)
    }

    /// Grand daily total, defined as the sum of category totals.
    pub fn daily_total(&self, year: i32) -> Result<f64, ForecastError> {
        let mut total = 0.0;
        for c in TrafficCategory::ALL {
            total += self.category_total(year, c)?;
        }
        Ok(total)
    }

    pub fn hourly_total(&self, year: i32) -> Result<[f64; HOURS], ForecastError> {
        let yi = self.year_index(year)?;
        let mut out = [0.0; HOURS];
        for d in &self.devices {
            for a in &d.applications {
                for h in 0..HOURS {
                    out[h] += a.volume[yi][h];
                }
            }
        }
        Ok(out)
    }

    pub fn hourly_category(
        &self,
        year: i32,
        category: TrafficCategory,
    ) -> Result<[f64; HOURS], ForecastError> {
        let yi = self.year_index(year)?;
        let mut out = [0.0; HOURS];
        for d in &self.devices {
            for a in d.applications.iter().filter(|a| a.category == category) {
                for h in 0..HOURS {
                    out[h] += a.volume[yi][h];
                }
            }
        }
        Ok(out)
    }

    pub fn density_total(&self, year: i32) -> Result<[f64; HOURS], ForecastError> {
        let yi = self.year_index(year)?;
        let mut out = [0.0; HOURS];
        for d in &self.devices {
            for h in 0..HOURS {
                out[h] += d.density[yi][h];
            }
        }
        Ok(out)
    }

    pub fn peak_hour(&self, year: i32) -> Result<PeakHour, ForecastError> {
        let hourly = self.hourly_total(year)?;
        let (hour, volume) = argmax24(&hourly);
        let total = self.daily_total(year)?;
        let share = if total > 0.0 { volume / total } else { 0.0 };
        Ok(PeakHour {
            hour,
            volume,
            share,
        })
    }

    pub fn median_density(&self, year: i32) -> Result<MedianDensity, ForecastError> {
        let yi = self.year_index(year)?;
        let per_device = self
            .devices
            .iter()
            .map(|d| (d.id.clone(), median24(&d.density[yi])))
            .collect();
        Ok(MedianDensity {
            total: median24(&self.density_total(year)?),
            per_device,
        })
    }

    /// Peak-hour volume for every year.
    pub fn peak_series(&self) -> BTreeMap<i32, f64> {
        self.years
            .iter()
            .map(|&y| (y, self.peak_hour(y).map(|p| p.volume).unwrap_or(0.0)))
            .collect()
    }
}

/// Elementwise penetration × urban density.
pub fn device_density(penetration: f64, u: &HourlyProfile) -> HourlyProfile {
    u.scaled(penetration, ProfileUnit::PerKm2)
}

pub fn forecast(
    inputs: &ForecastInputs,
    scenario: &Scenario,
    years: YearRange,
) -> Result<ForecastResult, ForecastError> {
    let mut devices: Vec<&DeviceSpec> = inputs.devices.iter().collect();
    devices.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen = BTreeSet::new();
    for d in &devices {
        if !seen.insert(d.id.as_str()) {
            return Err(ForecastError::DuplicateId(d.id.clone()));
        }
        for a in &d.applications {
            if !seen.insert(a.id.as_str()) {
                return Err(ForecastError::DuplicateId(a.id.clone()));
            }
        }
    }

    let year_list: Vec<i32> = years.iter().collect();
    let mut out = Vec::with_capacity(devices.len());
    for spec in devices {
        out.push(forecast_device(inputs, spec, scenario, years, &year_list)?);
    }
    Ok(ForecastResult {
        scenario: scenario.name.clone(),
        years: year_list,
        devices: out,
    })
}

fn forecast_device(
    inputs: &ForecastInputs,
    spec: &DeviceSpec,
    scenario: &Scenario,
    years: YearRange,
    year_list: &[i32],
) -> Result<DeviceForecast, ForecastError> {
    let requested = scenario.device_estimate(&spec.id);
    let (estimate, model) =
        spec.penetration
            .select(requested)
            .ok_or_else(|| ForecastError::MissingPenetration {
                device: spec.id.clone(),
                estimate: requested,
            })?;
    let penetration = model
        .evaluate(years)
        .map_err(|source| ForecastError::Diffusion {
            device: spec.id.clone(),
            source,
        })?
        .with_device(spec.id.clone());
    let mut penetration = penetration;
    penetration.estimate = estimate;
    let u = inputs
        .densities
        .get(&spec.density)
        .ok_or(ForecastError::UnknownDensity {
            device: spec.id.clone(),
            binding: spec.density,
        })?;

    let density: Vec<[f64; HOURS]> = year_list
        .iter()
        .map(|&y| *device_density(penetration.value(y), u).values())
        .collect();

    let mut apps: Vec<&ApplicationSpec> = spec.applications.iter().collect();
    apps.sort_by(|a, b| a.id.cmp(&b.id));
    let mut applications = Vec::with_capacity(apps.len());
    for app in apps {
        applications.push(forecast_application(
            inputs, app, scenario, year_list, &density,
        )?);
    }
    Ok(DeviceForecast {
        id: spec.id.clone(),
        estimate,
        binding: spec.density,
        penetration,
        density,
        applications,
    })
}

fn forecast_application(
    inputs: &ForecastInputs,
    app: &ApplicationSpec,
    scenario: &Scenario,
    year_list: &[i32],
    density: &[[f64; HOURS]],
) -> Result<ApplicationForecast, ForecastError> {
    let vol_err = |source| ForecastError::Volume {
        application: app.id.clone(),
        source,
    };
    app.activity.validate().map_err(vol_err)?;
    let requested = scenario.application_estimate(&app.id);
    let estimate = if app.has_volume() {
        let growth = app
            .growth
            .as_ref()
            .ok_or_else(|| ForecastError::MissingGrowth {
                application: app.id.clone(),
                estimate: requested,
            })?;
        let (e, g) = growth
            .select(requested)
            .ok_or_else(|| ForecastError::MissingGrowth {
                application: app.id.clone(),
                estimate: requested,
            })?;
        g.validate().map_err(vol_err)?;
        Some(e)
    } else {
        None
    };

    let mut daily_volume = Vec::with_capacity(year_list.len());
    let mut volume = Vec::with_capacity(year_list.len());
    for (yi, &year) in year_list.iter().enumerate() {
        let v = match estimate {
            Some(e) => app.daily_volume(year, e).unwrap_or(0.0),
            None => 0.0,
        };
        let per_hour = allocate_hourly(v, &app.activity, &inputs.profiles).map_err(vol_err)?;
        daily_volume.push(v);
        volume.push(std::array::from_fn(|h| density[yi][h] * per_hour[h]));
    }
    Ok(ApplicationForecast {
        id: app.id.clone(),
        category: app.category,
        estimate,
        daily_volume,
        volume,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRollup {
    pub years: Vec<i32>,
    pub totals: BTreeMap<TrafficCategory, Vec<f64>>,
    pub grand_totals: Vec<f64>,
    pub shares: BTreeMap<TrafficCategory, Vec<f64>>,
}

pub fn category_rollup(result: &ForecastResult) -> CategoryRollup {
    let mut totals = BTreeMap::new();
    let mut shares = BTreeMap::new();
    let mut grand_totals = Vec::with_capacity(result.years.len());
    for &y in &result.years {
        grand_totals.push(result.daily_total(y).unwrap_or(0.0));
    }
    for c in TrafficCategory::ALL {
        let t: Vec<f64> = result
            .years
            .iter()
            .map(|&y| result.category_total(y, c).unwrap_or(0.0))
            .collect();
        let s = t
            .iter()
            .zip(&grand_totals)
            .map(|(&v, &g)| if g > 0.0 { v / g } else { 0.0 })
            .collect();
        totals.insert(c, t);
        shares.insert(c, s);
    }
    CategoryRollup {
        years: result.years.clone(),
        totals,
        grand_totals,
        shares,
    }
}

pub fn peak_hour(result: &ForecastResult, year: i32) -> Result<PeakHour, ForecastError> {
    result.peak_hour(year)
}

pub fn median_density(result: &ForecastResult, year: i32) -> Result<MedianDensity, ForecastError> {
    result.median_density(year)
}

/// Compound annual growth rate over `years`.
pub fn cagr(v_start: f64, v_end: f64, years: u32) -> Result<f64, ForecastError> {
    if !(v_start > 0.0) {
        return Err(ForecastError::CagrDomain(v_start));
    }
    if years == 0 {
        return Err(ForecastError::CagrDomain(v_start));
    }
    Ok((v_end / v_start).powf(1.0 / years as f64) - 1.0)
}

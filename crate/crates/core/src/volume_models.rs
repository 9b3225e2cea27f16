//! Per-device daily user volumes and their distribution over the day.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Estimate, Variants};
use crate::profile::{HourlyProfile, ProfileUnit, HOURS, SHARE_TOLERANCE};

/// Daily HD video hours at the reference year.
pub const CAMERA_BASE_HOURS: f64 = 7.0;
pub const CAMERA_REFERENCE_YEAR: i32 = 2022;
/// 10 Mbps sustained for one hour, in GB.
pub const HD_RATE_GB_PER_HOUR: f64 = 4.5;

#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("invalid growth parameters: {0}")]
    InvalidGrowth(String),
    #[error("invalid activity model: {0}")]
    InvalidActivity(String),
    #[error("unknown usage profile `{0}`")]
    UnknownProfile(String),
    #[error("usage profile `{id}` is not a normalized share (sum {sum})")]
    NotNormalized { id: String, sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficCategory {
    HighPriority,
    Human,
    MachineLowActivity,
    MachineHighActivity,
}

impl TrafficCategory {
    pub const ALL: [TrafficCategory; 4] = [
        TrafficCategory::HighPriority,
        TrafficCategory::Human,
        TrafficCategory::MachineLowActivity,
        TrafficCategory::MachineHighActivity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficCategory::HighPriority => "high_priority",
            TrafficCategory::Human => "human",
            TrafficCategory::MachineLowActivity => "machine_low_activity",
            TrafficCategory::MachineHighActivity => "machine_high_activity",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TrafficCategory::HighPriority => "High-priority traffic",
            TrafficCategory::Human => "Human traffic",
            TrafficCategory::MachineLowActivity => "Machine low-activity traffic",
            TrafficCategory::MachineHighActivity => "Machine high-activity traffic",
        }
    }
}

impl fmt::Display for TrafficCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Daily volume per device as a function of year, GB/day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum GrowthModel {
    Exponential {
        base: f64,
        base_year: i32,
        cagr: f64,
    },
    CeilingLinear {
        base: f64,
        base_year: i32,
        ceiling: f64,
        ceiling_year: i32,
    },
    Constant {
        value: f64,
    },
    CameraHours {
        daily_hours_delta: f64,
        hd_rate: f64,
    },
}

impl GrowthModel {
    pub fn validate(&self) -> Result<(), VolumeError> {
        let err = |m: &str| Err(VolumeError::InvalidGrowth(m.to_string()));
        match *self {
            GrowthModel::Exponential { base, cagr, .. } => {
                if !(base.is_finite() && base >= 0.0) {
                    return err("exponential base must be non-negative");
                }
                if !(cagr.is_finite() && cagr > -1.0) {
                    return err("cagr must exceed -1");
                }
            }
            GrowthModel::CeilingLinear {
                base,
                base_year,
                ceiling,
                ceiling_year,
            } => {
                if !(base.is_finite() && base >= 0.0 && ceiling.is_finite()) {
                    return err("ceiling-linear base must be non-negative");
                }
                if ceiling < base {
                    return err("ceiling below base");
                }
                if ceiling_year <= base_year {
                    return err("ceiling year must follow base year");
                }
            }
            GrowthModel::Constant { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return err("constant volume must be non-negative");
                }
            }
            GrowthModel::CameraHours {
                daily_hours_delta,
                hd_rate,
            } => {
                if !(daily_hours_delta.is_finite() && daily_hours_delta >= 0.0) {
                    return err("camera hours delta must be non-negative");
                }
                if !(hd_rate.is_finite() && hd_rate >= 0.0) {
                    return err("camera rate must be non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn daily_volume(&self, year: i32) -> f64 {
        match *self {
            GrowthModel::Exponential {
                base,
                base_year,
                cagr,
            } => exponential_volume(base, base_year, cagr, year),
            GrowthModel::CeilingLinear {
                base,
                base_year,
                ceiling,
                ceiling_year,
            } => ceiling_linear_volume(base, base_year, ceiling, ceiling_year, year),
            GrowthModel::Constant { value } => constant_volume(value),
            GrowthModel::CameraHours {
                daily_hours_delta,
                hd_rate,
            } => camera_daily_volume(year, daily_hours_delta, hd_rate),
        }
    }
}

pub fn exponential_volume(base: f64, base_year: i32, cagr: f64, year: i32) -> f64 {
    base * (1.0 + cagr).powi(year - base_year)
}

/// Linear from `base` to `ceiling`, flat outside the ramp.
pub fn ceiling_linear_volume(
    base: f64,
    base_year: i32,
    ceiling: f64,
    ceiling_year: i32,
    year: i32,
) -> f64 {
    if year <= base_year {
        base
    } else if year >= ceiling_year {
        ceiling
    } else {
        let frac = (year - base_year) as f64 / (ceiling_year - base_year) as f64;
        (base + (ceiling - base) * frac).min(ceiling)
    }
}

/// Per-camera daily volume; zero before deployment starts.
pub fn camera_daily_volume(year: i32, daily_hours_delta: f64, hd_rate: f64) -> f64 {
    if year <= CAMERA_REFERENCE_YEAR {
        return 0.0;
    }
    let hours = CAMERA_BASE_HOURS + (year - CAMERA_REFERENCE_YEAR) as f64 * daily_hours_delta;
    hours * hd_rate
}

pub fn constant_volume(value: f64) -> f64 {
    value
}

/// How a daily volume is spread over the hours of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum ActivityModel {
    /// volume·share(h) from a named usage profile.
    UsageProfile { profile: String },
    /// volume/n over the hours [start_hour, end_hour).
    OperatingWindow { start_hour: usize, end_hour: usize },
    /// volume/24 every hour.
    Uniform24h,
    /// Rate per active hour, volume/hours, in every slot; the device density
    /// carries when devices are active.
    ActiveHours { hours: f64 },
}

impl ActivityModel {
    pub fn validate(&self) -> Result<(), VolumeError> {
        match *self {
            ActivityModel::OperatingWindow {
                start_hour,
                end_hour,
            } => {
                if start_hour >= end_hour || end_hour > HOURS {
                    return Err(VolumeError::InvalidActivity(format!(
                        "operating window {start_hour}-{end_hour} is empty or beyond 24h"
                    )));
                }
            }
            ActivityModel::ActiveHours { hours } => {
                if !(hours.is_finite() && hours > 0.0) {
                    return Err(VolumeError::InvalidActivity(
                        "active hours must be positive".into(),
                    ));
                }
            }
            ActivityModel::UsageProfile { .. } | ActivityModel::Uniform24h => {}
        }
        Ok(())
    }

    /// Whether the hourly allocation sums to the daily volume.
    pub fn conserves_daily_volume(&self) -> bool {
        !matches!(self, ActivityModel::ActiveHours { .. })
    }
}

pub fn allocate_hourly(
    volume: f64,
    activity: &ActivityModel,
    profiles: &BTreeMap<String, HourlyProfile>,
) -> Result<HourlyProfile, VolumeError> {
    activity.validate()?;
    let values: [f64; HOURS] = match activity {
        ActivityModel::UsageProfile { profile } => {
            let p = profiles
                .get(profile)
                .ok_or_else(|| VolumeError::UnknownProfile(profile.clone()))?;
            let sum = p.sum();
            if p.unit() != ProfileUnit::Share || (sum - 1.0).abs() > SHARE_TOLERANCE {
                return Err(VolumeError::NotNormalized {
                    id: profile.clone(),
                    sum,
                });
            }
            p.values().map(|s| volume * s)
        }
        &ActivityModel::OperatingWindow {
            start_hour,
            end_hour,
        } => {
            let per_hour = volume / (end_hour - start_hour) as f64;
            std::array::from_fn(|h| {
                if (start_hour..end_hour).contains(&h) {
                    per_hour
                } else {
                    0.0
                }
            })
        }
        ActivityModel::Uniform24h => [volume / HOURS as f64; HOURS],
        &ActivityModel::ActiveHours { hours } => [volume / hours; HOURS],
    };
    HourlyProfile::new(values, ProfileUnit::GbPerDay)
        .map_err(|e| VolumeError::InvalidGrowth(format!("negative volume: {e}")))
}

/// One application running on a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationSpec {
    pub id: String,
    pub category: TrafficCategory,
    /// Absent for low-activity applications, whose volume is not estimated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<Variants<GrowthModel>>,
    pub activity: ActivityModel,
    /// First year the service generates traffic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_start: Option<i32>,
}

impl ApplicationSpec {
    pub fn has_volume(&self) -> bool {
        self.category != TrafficCategory::MachineLowActivity
    }

    /// Daily volume per device, GB/day; `None` when the estimate is missing.
    pub fn daily_volume(&self, year: i32, estimate: Estimate) -> Option<f64> {
        if !self.has_volume() || self.service_start.is_some_and(|s| year < s) {
            return Some(0.0);
        }
        let growth = self.growth.as_ref()?;
        growth.select(estimate).map(|(_, g)| g.daily_volume(year))
    }
}

/// Sum of application volumes of one device, GB/day.
pub fn device_daily_volume(applications: &[ApplicationSpec], year: i32, estimate: Estimate) -> f64 {
    let mut apps: Vec<&ApplicationSpec> = applications.iter().collect();
    apps.sort_by(|a, b| a.id.cmp(&b.id));
    apps.iter()
        .map(|a| a.daily_volume(year, estimate).unwrap_or(0.0))
        .sum()
}

//! Control-plane indicators: attachment (network access) and handover rates
//! at the peak hour.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Estimate, Variants, YearRange};
use crate::forecast_engine::{forecast, ForecastError, ForecastInputs, ForecastResult, Scenario};
use crate::urban_density::DensityBinding;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("invalid control parameter: {0}")]
    InvalidParameter(String),
    #[error("no {estimate} variant for `{what}`")]
    MissingVariant { what: String, estimate: Estimate },
    #[error("device `{device}`: density `{}` is not available", .binding.as_str())]
    UnknownDensity {
        device: String,
        binding: DensityBinding,
    },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// A quantity moving linearly from an anchor value to a target value and
/// held constant outside that interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecliningSchedule {
    pub anchor_year: i32,
    pub anchor: f64,
    pub target_year: i32,
    pub target: f64,
}

impl DecliningSchedule {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.anchor > 0.0
            && self.target > 0.0
            && self.anchor.is_finite()
            && self.target.is_finite())
        {
            return Err(ControlError::InvalidParameter(format!(
                "schedule values must be positive, got {} and {}",
                self.anchor, self.target
            )));
        }
        if self.target_year <= self.anchor_year {
            return Err(ControlError::InvalidParameter(format!(
                "schedule target year {} must follow anchor year {}",
                self.target_year, self.anchor_year
            )));
        }
        Ok(())
    }

    pub fn value(&self, year: i32) -> f64 {
        if year <= self.anchor_year {
            return self.anchor;
        }
        if year >= self.target_year {
            return self.target;
        }
        let frac = (year - self.anchor_year) as f64 / (self.target_year - self.anchor_year) as f64;
        self.anchor + (self.target - self.anchor) * frac
    }
}

/// How a device contributes to control-plane signalling.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum ControlRole {
    #[default]
    None,
    /// Periodic network-access requests. A device-specific inter-request
    /// schedule overrides the global one.
    Attachment {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inter_request: Option<Variants<DecliningSchedule>>,
    },
    /// Cell changes while moving. `density` overrides the device density
    /// used at the peak hour (scaled by the device penetration).
    Handover {
        speed_kmh: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<DensityBinding>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    /// Shortest inter-request time in minutes, the reference for α_i.
    #[serde(default = "default_t_r_min")]
    pub t_r_min: f64,
    /// Inter-request time in minutes.
    pub inter_request: Variants<DecliningSchedule>,
    /// Inter-site distance in km.
    pub inter_site: Variants<DecliningSchedule>,
}

fn default_t_r_min() -> f64 {
    0.25
}

impl ControlParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.t_r_min > 0.0 && self.t_r_min.is_finite()) {
            return Err(ControlError::InvalidParameter(format!(
                "t_r_min must be positive, got {}",
                self.t_r_min
            )));
        }
        for (_, s) in self.inter_request.iter().chain(self.inter_site.iter()) {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentInput {
    pub device: String,
    /// devices/km²
    pub density: f64,
    /// minutes
    pub inter_request: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverInput {
    pub device: String,
    /// devices/km²
    pub density: f64,
    /// km/h
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorValue {
    pub total: f64,
    pub contributions: Vec<(String, f64)>,
}

/// Requests per minute per km².
pub fn attachment_rate(
    inputs: &[AttachmentInput],
    t_r_min: f64,
) -> Result<IndicatorValue, ControlError> {
    if !(t_r_min > 0.0) {
        return Err(ControlError::InvalidParameter(format!(
            "t_r_min must be positive, got {t_r_min}"
        )));
    }
    let mut out = IndicatorValue::default();
    for i in inputs {
        if !(i.inter_request > 0.0) {
            return Err(ControlError::InvalidParameter(format!(
                "{}: inter-request time must be positive, got {}",
                i.device, i.inter_request
            )));
        }
        let alpha = t_r_min / i.inter_request;
        let c = i.density * alpha / t_r_min;
        out.total += c;
        out.contributions.push((i.device.clone(), c));
    }
    Ok(out)
}

/// Handovers per hour per km².
pub fn handover_rate(
    inputs: &[HandoverInput],
    inter_site_km: f64,
) -> Result<IndicatorValue, ControlError> {
    if !(inter_site_km > 0.0) {
        return Err(ControlError::InvalidParameter(format!(
            "inter-site distance must be positive, got {inter_site_km}"
        )));
    }
    let mut out = IndicatorValue::default();
    let s_max = inputs.iter().map(|i| i.speed_kmh).fold(0.0, f64::max);
    if s_max <= 0.0 {
        for i in inputs {
            out.contributions.push((i.device.clone(), 0.0));
        }
        return Ok(out);
    }
    let t_h_min = inter_site_km / s_max;
    for i in inputs {
        if !(i.speed_kmh >= 0.0) {
            return Err(ControlError::InvalidParameter(format!(
                "{}: speed must be non-negative, got {}",
                i.device, i.speed_kmh
            )));
        }
        let beta = i.speed_kmh / s_max;
        let c = i.density * beta / t_h_min;
        out.total += c;
        out.contributions.push((i.device.clone(), c));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearIndicators {
    pub year: i32,
    pub peak_hour: usize,
    pub inter_request_min: f64,
    pub inter_site_km: f64,
    pub attachment: IndicatorValue,
    pub handover: IndicatorValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSeries {
    pub scenario: String,
    pub years: Vec<YearIndicators>,
}

impl ControlSeries {
    pub fn get(&self, year: i32) -> Option<&YearIndicators> {
        self.years.iter().find(|y| y.year == year)
    }
}

pub fn control_series(
    inputs: &ForecastInputs,
    scenario: &Scenario,
    years: YearRange,
    params: &ControlParams,
) -> Result<ControlSeries, ControlError> {
    let result = forecast(inputs, scenario, years)?;
    control_from_forecast(inputs, &result, scenario, params)
}

/// Evaluates both indicators at each year's peak hour of `result`.
pub fn control_from_forecast(
    inputs: &ForecastInputs,
    result: &ForecastResult,
    scenario: &Scenario,
    params: &ControlParams,
) -> Result<ControlSeries, ControlError> {
    params.validate()?;
    let est = scenario.control;
    let pick = |v: &Variants<DecliningSchedule>, what: &str| {
        v.select(est)
            .map(|(_, s)| *s)
            .ok_or_else(|| ControlError::MissingVariant {
                what: what.to_string(),
                estimate: est,
            })
    };
    let global_tr = pick(&params.inter_request, "inter_request")?;
    let inter_site = pick(&params.inter_site, "inter_site")?;

    let mut out = Vec::with_capacity(result.years.len());
    for (yi, &year) in result.years.iter().enumerate() {
        let peak = result.peak_hour(year)?.hour;
        let l = inter_site.value(year);
        let mut att = Vec::new();
        let mut hand = Vec::new();
        for d in &result.devices {
            let spec = inputs.devices.iter().find(|s| s.id == d.id);
            let Some(spec) = spec else { continue };
            match &spec.control {
                ControlRole::None => {}
                ControlRole::Attachment { inter_request } => {
                    let sched = match inter_request {
                        Some(v) => pick(v, &format!("{}.inter_request", d.id))?,
                        None => global_tr,
                    };
                    att.push(AttachmentInput {
                        device: d.id.clone(),
                        density: d.density[yi][peak],
                        inter_request: sched.value(year),
                    });
                }
                ControlRole::Handover { speed_kmh, density } => {
                    let rho =
                        match density {
                            None => d.density[yi][peak],
                            Some(b) => {
                                let u = inputs.densities.get(b).ok_or(
                                    ControlError::UnknownDensity {
                                        device: d.id.clone(),
                                        binding: *b,
                                    },
                                )?;
                                d.penetration.value(year) * u[peak]
                            }
                        };
                    hand.push(HandoverInput {
                        device: d.id.clone(),
                        density: rho,
                        speed_kmh: *speed_kmh,
                    });
                }
            }
        }
        out.push(YearIndicators {
            year,
            peak_hour: peak,
            inter_request_min: global_tr.value(year),
            inter_site_km: l,
            attachment: attachment_rate(&att, params.t_r_min)?,
            handover: handover_rate(&hand, l)?,
        });
    }
    Ok(ControlSeries {
        scenario: result.scenario.clone(),
        years: out,
    })
}

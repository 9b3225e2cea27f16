//! Scenario configuration: a single TOML file describing the study area,
//! the device registry and every low/high parameter pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity_timing::CapacityAssumption;
use crate::common::{Estimate, YearRange};
use crate::control_needs::{ControlParams, ControlRole, DecliningSchedule};
use crate::diffusion::{BassAnchor, PenetrationModel};
use crate::forecast_engine::{DeviceSpec, Scenario};
use crate::urban_density::{AreaProfile, TransportParams};
use crate::volume_models::{ActivityModel, GrowthModel, TrafficCategory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon: YearRange,
    /// Reference year for growth rates, control growth and capacity.
    pub baseline_year: i32,
    pub area: AreaProfile,
    pub transport: TransportParams,
    pub profiles: ProfileSources,
    pub control: ControlParams,
    #[serde(default)]
    pub capacity: Vec<CapacityAssumption>,
    #[serde(default)]
    pub fixtures: FixturePaths,
    #[serde(default)]
    pub levers: Vec<PolicyLever>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    pub fits: Vec<BassFitSpec>,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSources {
    /// CSV with `hour,inbound,outbound`.
    pub crossings: PathBuf,
    /// Allowed relative daily imbalance of the crossing counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance_tolerance: Option<f64>,
    /// Usage-share profiles (`hour,share`) by id.
    #[serde(default)]
    pub usage: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturePaths {
    #[serde(default)]
    pub golden: Vec<PathBuf>,
}

/// A policy that switches a group of device and application parameters
/// between their low and high estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyLever {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub devices: Vec<String>,
    #[serde(default)]
    pub applications: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub default: Estimate,
    /// Estimate of the control schedules; defaults to `default`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Estimate>,
    #[serde(default)]
    pub levers: BTreeMap<String, Estimate>,
    #[serde(default)]
    pub devices: BTreeMap<String, Estimate>,
    #[serde(default)]
    pub applications: BTreeMap<String, Estimate>,
}

/// A Bass fit of a historical adoption series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BassFitSpec {
    pub device: String,
    /// CSV with `year,value`.
    pub history: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<BassAnchor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} validation error(s):\n  {}", .0.len(), join_errors(.0))]
    Invalid(Vec<ValidationError>),
}

fn join_errors(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n  ")
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_config(&text, path)?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(config)
}

/// Parses and validates configuration text; `path` is used in messages only.
pub fn parse_config(text: &str, path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let errors = validate(&config);
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}

pub fn to_toml(config: &ScenarioConfig) -> Result<String, toml::ser::Error> {
    toml::to_string(config)
}

impl ScenarioConfig {
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn scenario_specs(&self) -> Vec<ScenarioSpec> {
        if self.scenarios.is_empty() {
            [("slow", Estimate::Low), ("rapid", Estimate::High)]
                .into_iter()
                .map(|(name, e)| ScenarioSpec {
                    name: name.into(),
                    default: e,
                    control: None,
                    levers: BTreeMap::new(),
                    devices: BTreeMap::new(),
                    applications: BTreeMap::new(),
                })
                .collect()
        } else {
            self.scenarios.clone()
        }
    }

    pub fn scenario_names(&self) -> Vec<String> {
        self.scenario_specs().into_iter().map(|s| s.name).collect()
    }

    /// Applies lever selections, then explicit overrides.
    pub fn scenario(&self, name: &str) -> Option<Scenario> {
        let spec = self.scenario_specs().into_iter().find(|s| s.name == name)?;
        let mut scenario = Scenario {
            name: spec.name.clone(),
            default: spec.default,
            devices: BTreeMap::new(),
            applications: BTreeMap::new(),
            control: spec.control.unwrap_or(spec.default),
        };
        for (lever_name, &estimate) in &spec.levers {
            let lever = self.levers.iter().find(|l| &l.name == lever_name)?;
            for d in &lever.devices {
                scenario.devices.insert(d.clone(), estimate);
            }
            for a in &lever.applications {
                scenario.applications.insert(a.clone(), estimate);
            }
        }
        scenario.devices.extend(spec.devices.clone());
        scenario.applications.extend(spec.applications.clone());
        Some(scenario)
    }
}

struct Collector(Vec<ValidationError>);

impl Collector {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationError {
            field: field.into(),
            message: message.into(),
        });
    }

    fn check<E: fmt::Display>(&mut self, field: impl Into<String>, r: Result<(), E>) {
        if let Err(e) = r {
            self.push(field, e.to_string());
        }
    }
}

/// Every schema and cross-reference problem of `config`.
pub fn validate(config: &ScenarioConfig) -> Vec<ValidationError> {
    let mut c = Collector(Vec::new());
    let horizon = config.horizon;
    if horizon.is_empty() {
        c.push(
            "horizon",
            format!("start {} is after end {}", horizon.start, horizon.end),
        );
    }
    if !horizon.contains(config.baseline_year) {
        c.push(
            "baseline_year",
            format!("{} is outside the horizon {horizon}", config.baseline_year),
        );
    }
    c.check("area", config.area.validate());
    c.check("transport", config.transport.validate());
    c.check("control", config.control.validate());
    if let Some(t) = config.profiles.balance_tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            c.push("profiles.balance_tolerance", "must be non-negative");
        }
    }

    let mut names = BTreeSet::new();
    for (i, a) in config.capacity.iter().enumerate() {
        if !names.insert(a.name.as_str()) {
            c.push(
                format!("capacity[{i}]"),
                format!("duplicate assumption `{}`", a.name),
            );
        }
        if !(a.multiplier >= 1.0 && a.multiplier.is_finite()) {
            c.push(
                format!("capacity[{}].multiplier", a.name),
                format!("must be at least 1, got {}", a.multiplier),
            );
        }
    }

    let mut device_ids = BTreeSet::new();
    let mut app_ids = BTreeSet::new();
    for d in &config.devices {
        if !device_ids.insert(d.id.as_str()) {
            c.push(format!("devices[{}]", d.id), "duplicate device id");
        }
        for a in &d.applications {
            if !app_ids.insert(a.id.as_str()) {
                c.push(
                    format!("devices[{}].applications[{}]", d.id, a.id),
                    "duplicate application id",
                );
            }
        }
        validate_device(&mut c, d, config);
    }
    for shared in device_ids.intersection(&app_ids) {
        c.push(
            format!("devices[{shared}]"),
            "id is used by both a device and an application",
        );
    }

    for (i, l) in config.levers.iter().enumerate() {
        if config.levers[..i].iter().any(|o| o.name == l.name) {
            c.push(format!("levers[{}]", l.name), "duplicate lever name");
        }
        if l.devices.is_empty() && l.applications.is_empty() {
            c.push(
                format!("levers[{}]", l.name),
                "selects no device or application parameters",
            );
        }
        for d in &l.devices {
            if !device_ids.contains(d.as_str()) {
                c.push(
                    format!("levers[{}].devices", l.name),
                    format!("unknown device `{d}`"),
                );
            }
        }
        for a in &l.applications {
            if !app_ids.contains(a.as_str()) {
                c.push(
                    format!("levers[{}].applications", l.name),
                    format!("unknown application `{a}`"),
                );
            }
        }
    }

    for (i, s) in config.scenarios.iter().enumerate() {
        if config.scenarios[..i].iter().any(|o| o.name == s.name) {
            c.push(format!("scenarios[{}]", s.name), "duplicate scenario name");
        }
        if s.default == Estimate::Medium {
            c.push(
                format!("scenarios[{}].default", s.name),
                "must be `low` or `high`",
            );
        }
        for lever in s.levers.keys() {
            if !config.levers.iter().any(|l| &l.name == lever) {
                c.push(
                    format!("scenarios[{}].levers", s.name),
                    format!("unknown lever `{lever}`"),
                );
            }
        }
        for d in s.devices.keys() {
            if !device_ids.contains(d.as_str()) {
                c.push(
                    format!("scenarios[{}].devices", s.name),
                    format!("unknown device `{d}`"),
                );
            }
        }
        for a in s.applications.keys() {
            if !app_ids.contains(a.as_str()) {
                c.push(
                    format!("scenarios[{}].applications", s.name),
                    format!("unknown application `{a}`"),
                );
            }
        }
    }

    for f in &config.fits {
        if !device_ids.contains(f.device.as_str()) {
            c.push(
                format!("fits[{}]", f.device),
                format!("unknown device `{}`", f.device),
            );
        }
    }
    c.0
}

fn validate_device(c: &mut Collector, d: &DeviceSpec, config: &ScenarioConfig) {
    let field = format!("devices[{}]", d.id);
    if d.penetration.is_empty() {
        c.push(
            format!("{field}.penetration"),
            "no low, high or medium variant",
        );
    }
    if d.penetration.medium.is_none()
        && (d.penetration.low.is_none() != d.penetration.high.is_none())
    {
        c.push(
            format!("{field}.penetration"),
            "low and high must be given together unless a medium variant exists",
        );
    }
    for (e, m) in d.penetration.iter() {
        c.check(format!("{field}.penetration.{e}"), m.validate());
    }
    if let (Some(lo), Some(hi)) = (&d.penetration.low, &d.penetration.high) {
        check_penetration_bounds(c, &field, lo, hi, config.horizon);
    }

    match &d.control {
        ControlRole::None => {}
        ControlRole::Attachment { inter_request } => {
            if let Some(v) = inter_request {
                for (e, s) in v.iter() {
                    c.check(format!("{field}.control.inter_request.{e}"), s.validate());
                }
            }
        }
        ControlRole::Handover { speed_kmh, .. } => {
            if !(*speed_kmh >= 0.0 && speed_kmh.is_finite()) {
                c.push(format!("{field}.control.speed_kmh"), "must be non-negative");
            }
        }
    }

    for a in &d.applications {
        let afield = format!("{field}.applications[{}]", a.id);
        c.check(format!("{afield}.activity"), a.activity.validate());
        if let ActivityModel::UsageProfile { profile } = &a.activity {
            if !config.profiles.usage.contains_key(profile) {
                c.push(
                    format!("{afield}.activity.profile"),
                    format!("unknown profile `{profile}` (not listed under profiles.usage)"),
                );
            }
        }
        match (&a.growth, a.category) {
            (None, TrafficCategory::MachineLowActivity) => {}
            (None, _) => c.push(
                format!("{afield}.growth"),
                "applications with volume need a growth model",
            ),
            (Some(g), _) => {
                if g.is_empty() {
                    c.push(format!("{afield}.growth"), "no low, high or medium variant");
                }
                for (e, m) in g.iter() {
                    c.check(format!("{afield}.growth.{e}"), m.validate());
                }
                if let (Some(lo), Some(hi)) = (&g.low, &g.high) {
                    check_growth_bounds(c, &afield, lo, hi, a.service_start, config.horizon);
                }
            }
        }
    }
}

fn bound_message(year: i32, lo: f64, hi: f64) -> String {
    format!("low estimate exceeds high estimate in {year} ({lo} > {hi}); low and high must bracket the parameter")
}

fn check_penetration_bounds(
    c: &mut Collector,
    field: &str,
    lo: &PenetrationModel,
    hi: &PenetrationModel,
    years: YearRange,
) {
    let (Ok(l), Ok(h)) = (lo.evaluate(years), hi.evaluate(years)) else {
        return;
    };
    for y in years.iter() {
        let (a, b) = (l.value(y), h.value(y));
        if a > b * (1.0 + 1e-12) {
            c.push(format!("{field}.penetration"), bound_message(y, a, b));
            return;
        }
    }
}

fn check_growth_bounds(
    c: &mut Collector,
    field: &str,
    lo: &GrowthModel,
    hi: &GrowthModel,
    service_start: Option<i32>,
    years: YearRange,
) {
    for y in years
        .iter()
        .filter(|&y| service_start.is_none_or(|s| y >= s))
    {
        let (a, b) = (lo.daily_volume(y), hi.daily_volume(y));
        if a > b * (1.0 + 1e-12) {
            c.push(format!("{field}.growth"), bound_message(y, a, b));
            return;
        }
    }
}

/// Parameters after scenario selection, written next to every result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub scenario: String,
    pub years: YearRange,
    pub baseline_year: i32,
    pub control_estimate: Estimate,
    pub area: AreaProfile,
    pub transport: TransportParams,
    pub t_r_min: f64,
    pub inter_request: DecliningSchedule,
    pub inter_site: DecliningSchedule,
    pub devices: Vec<ResolvedDevice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDevice {
    pub id: String,
    pub estimate: Estimate,
    pub penetration: PenetrationModel,
    pub density: crate::urban_density::DensityBinding,
    pub control: ControlRole,
    pub applications: Vec<ResolvedApplication>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedApplication {
    pub id: String,
    pub category: TrafficCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthModel>,
    pub activity: ActivityModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_start: Option<i32>,
}

/// Resolves every low/high choice of `scenario`. The config must be valid.
pub fn resolve_parameters(
    config: &ScenarioConfig,
    scenario: &Scenario,
    years: YearRange,
) -> ResolvedParameters {
    let ce = scenario.control;
    let pick = |v: &crate::common::Variants<DecliningSchedule>| {
        *v.select(ce).expect("validated schedule").1
    };
    let mut devices: Vec<&DeviceSpec> = config.devices.iter().collect();
    devices.sort_by(|a, b| a.id.cmp(&b.id));
    let devices = devices
        .into_iter()
        .filter_map(|d| {
            let (estimate, model) = d.penetration.select(scenario.device_estimate(&d.id))?;
            let mut apps: Vec<_> = d.applications.iter().collect();
            apps.sort_by(|a, b| a.id.cmp(&b.id));
            let applications = apps
                .into_iter()
                .map(|a| {
                    let sel = a
                        .growth
                        .as_ref()
                        .filter(|_| a.has_volume())
                        .and_then(|g| g.select(scenario.application_estimate(&a.id)));
                    ResolvedApplication {
                        id: a.id.clone(),
                        category: a.category,
                        estimate: sel.map(|(e, _)| e),
                        growth: sel.map(|(_, g)| g.clone()),
                        activity: a.activity.clone(),
                        service_start: a.service_start,
                    }
                })
                .collect();
            Some(ResolvedDevice {
                id: d.id.clone(),
                estimate,
                penetration: model.clone(),
                density: d.density,
                control: d.control.clone(),
                applications,
            })
        })
        .collect();
    ResolvedParameters {
        scenario: scenario.name.clone(),
        years,
        baseline_year: config.baseline_year,
        control_estimate: ce,
        area: config.area.clone(),
        transport: config.transport.clone(),
        t_r_min: config.control.t_r_min,
        inter_request: pick(&config.control.inter_request),
        inter_site: pick(&config.control.inter_site),
        devices,
    }
}

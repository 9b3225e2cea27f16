//! Loads fixture data referenced by a configuration and runs scenarios.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::capacity_timing::{sweep, CapacityAssumption, CapacityError, Crossing, CrossingReport};
use crate::common::YearRange;
use crate::control_needs::{control_from_forecast, ControlError, ControlSeries};
use crate::diffusion::{bass_fit_with, bass_project, BassFit, BassFitOptions, DiffusionError};
use crate::forecast_engine::{forecast, ForecastError, ForecastInputs, ForecastResult, Scenario};
use crate::urban_density::{
    CrossingCounts, DensityError, UrbanDensities, DEFAULT_BALANCE_TOLERANCE,
};

use super::config::{
    resolve_parameters, BassFitSpec, ConfigError, ResolvedParameters, ScenarioConfig,
};
use super::csv_io::{read_crossings, read_history, read_share_profile, CsvError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("urban densities: {0}")]
    Density(#[from] DensityError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("capacity: {0}")]
    Capacity(#[from] CapacityError),
    #[error("bass fit for `{device}`: {source}")]
    Fit {
        device: String,
        source: DiffusionError,
    },
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    pub fn is_io(&self) -> bool {
        match self {
            PipelineError::Config(ConfigError::Io { .. }) => true,
            PipelineError::Csv(e) => e.is_io(),
            _ => false,
        }
    }
}

/// A validated configuration together with its loaded data files.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub config: ScenarioConfig,
    pub counts: CrossingCounts,
    pub densities: UrbanDensities,
    pub inputs: ForecastInputs,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub resolved: ResolvedParameters,
    pub result: ForecastResult,
    pub control: ControlSeries,
    pub capacity: CrossingReport,
}

pub fn load_model(config: ScenarioConfig) -> Result<LoadedModel, PipelineError> {
    let (inbound, outbound) = read_crossings(&config.resolve_path(&config.profiles.crossings))?;
    let tolerance = config
        .profiles
        .balance_tolerance
        .unwrap_or(DEFAULT_BALANCE_TOLERANCE);
    let counts = CrossingCounts::with_tolerance(inbound, outbound, tolerance)?;
    let densities = UrbanDensities::build(&config.area, &counts, &config.transport)?;
    let mut profiles = BTreeMap::new();
    for (id, path) in &config.profiles.usage {
        profiles.insert(id.clone(), read_share_profile(&config.resolve_path(path))?);
    }
    let inputs = ForecastInputs {
        devices: config.devices.clone(),
        densities: densities.table(),
        profiles,
    };
    Ok(LoadedModel {
        config,
        counts,
        densities,
        inputs,
    })
}

impl LoadedModel {
    pub fn scenario(&self, name: &str) -> Result<Scenario, PipelineError> {
        self.config.scenario(name).ok_or_else(|| {
            PipelineError::Invalid(format!(
                "unknown scenario `{name}` (configured: {})",
                self.config.scenario_names().join(", ")
            ))
        })
    }

    pub fn years(&self, years: Option<YearRange>) -> Result<YearRange, PipelineError> {
        let y = years.unwrap_or(self.config.horizon);
        if !y.contains(self.config.baseline_year) {
            return Err(PipelineError::Invalid(format!(
                "years {y} must include the baseline year {}",
                self.config.baseline_year
            )));
        }
        Ok(y)
    }

    pub fn forecast(
        &self,
        scenario: &Scenario,
        years: YearRange,
    ) -> Result<ForecastResult, PipelineError> {
        Ok(forecast(&self.inputs, scenario, years)?)
    }

    pub fn run(&self, name: &str, years: Option<YearRange>) -> Result<ScenarioRun, PipelineError> {
        let scenario = self.scenario(name)?;
        let years = self.years(years)?;
        let result = self.forecast(&scenario, years)?;
        let control =
            control_from_forecast(&self.inputs, &result, &scenario, &self.config.control)?;
        let peaks = result.peak_series();
        let capacity = if peaks
            .get(&self.config.baseline_year)
            .is_some_and(|&p| p == 0.0)
        {
            // No demand at all: nothing ever crosses.
            no_crossings(
                &scenario.name,
                self.config.baseline_year,
                &self.config.capacity,
            )
        } else {
            sweep(
                &scenario.name,
                &peaks,
                self.config.baseline_year,
                &self.config.capacity,
            )?
        };
        let resolved = resolve_parameters(&self.config, &scenario, years);
        Ok(ScenarioRun {
            scenario,
            resolved,
            result,
            control,
            capacity,
        })
    }
}

fn no_crossings(
    scenario: &str,
    baseline_year: i32,
    assumptions: &[CapacityAssumption],
) -> CrossingReport {
    let mut crossings: Vec<Crossing> = assumptions
        .iter()
        .map(|a| Crossing {
            assumption: a.name.clone(),
            multiplier: a.multiplier,
            year: None,
        })
        .collect();
    crossings.sort_by(|a, b| {
        a.multiplier
            .total_cmp(&b.multiplier)
            .then_with(|| a.assumption.cmp(&b.assumption))
    });
    CrossingReport {
        scenario: scenario.to_string(),
        baseline_year,
        crossings,
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub device: String,
    pub history: BTreeMap<i32, f64>,
    pub fit: BassFit,
}

/// Runs one configured Bass fit. A fit that exhausts its iteration budget is
/// reported with `converged = false` rather than as an error.
pub fn run_fit(config: &ScenarioConfig, spec: &BassFitSpec) -> Result<FitOutcome, PipelineError> {
    let history = read_history(&config.resolve_path(&spec.history))?;
    let options = BassFitOptions {
        fixed_p: spec.fixed_p,
        fixed_q: spec.fixed_q,
        anchor: spec.anchor,
        ..Default::default()
    };
    let fit = match bass_fit_with(&history, &options) {
        Ok(f) => f,
        Err(DiffusionError::Convergence { best }) => *best,
        Err(source) => {
            return Err(PipelineError::Fit {
                device: spec.device.clone(),
                source,
            })
        }
    };
    Ok(FitOutcome {
        device: spec.device.clone(),
        history,
        fit,
    })
}

pub fn fit_projection(
    outcome: &FitOutcome,
    years: YearRange,
) -> Result<BTreeMap<i32, f64>, PipelineError> {
    let s = bass_project(&outcome.fit.params, years).map_err(|source| PipelineError::Fit {
        device: outcome.device.clone(),
        source,
    })?;
    Ok(s.values)
}

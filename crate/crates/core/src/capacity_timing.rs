//! Year in which peak-hour demand first exceeds a multiple of the baseline
//! capacity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CapacityError {
    #[error("capacity multiplier must be at least 1, got {0}")]
    InvalidMultiplier(f64),
    #[error("baseline year {0} is missing from the peak series")]
    MissingBaseline(i32),
    #[error("baseline peak volume {0} is not positive")]
    NonPositiveBaseline(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityAssumption {
    pub name: String,
    pub multiplier: f64,
}

/// First year at or after `baseline_year` whose peak volume reaches
/// `multiplier` times the baseline peak. `None` when never reached.
pub fn capacity_crossing_year(
    peaks: &BTreeMap<i32, f64>,
    baseline_year: i32,
    multiplier: f64,
) -> Result<Option<i32>, CapacityError> {
    if !(multiplier >= 1.0) || !multiplier.is_finite() {
        return Err(CapacityError::InvalidMultiplier(multiplier));
    }
    let base = *peaks
        .get(&baseline_year)
        .ok_or(CapacityError::MissingBaseline(baseline_year))?;
    if !(base > 0.0) {
        return Err(CapacityError::NonPositiveBaseline(base));
    }
    let capacity = multiplier * base;
    Ok(peaks
        .range(baseline_year..)
        .find(|(_, &v)| v >= capacity)
        .map(|(&y, _)| y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub assumption: String,
    pub multiplier: f64,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub scenario: String,
    pub baseline_year: i32,
    /// Sorted by multiplier.
    pub crossings: Vec<Crossing>,
}

impl CrossingReport {
    pub fn year_for(&self, multiplier: f64) -> Option<i32> {
        self.crossings
            .iter()
            .find(|c| c.multiplier == multiplier)
            .and_then(|c| c.year)
    }
}

pub fn sweep(
    scenario: &str,
    peaks: &BTreeMap<i32, f64>,
    baseline_year: i32,
    assumptions: &[CapacityAssumption],
) -> Result<CrossingReport, CapacityError> {
    let mut sorted: Vec<&CapacityAssumption> = assumptions.iter().collect();
    sorted.sort_by(|a, b| {
        a.multiplier
            .total_cmp(&b.multiplier)
            .then_with(|| a.name.cmp(&b.name))
    });
    let mut crossings = Vec::with_capacity(sorted.len());
    for a in sorted {
        crossings.push(Crossing {
            assumption: a.name.clone(),
            multiplier: a.multiplier,
            year: capacity_crossing_year(peaks, baseline_year, a.multiplier)?,
        });
    }
    Ok(CrossingReport {
        scenario: scenario.to_string(),
        baseline_year,
        crossings,
    })
}

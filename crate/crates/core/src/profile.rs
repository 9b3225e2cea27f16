use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS: usize = 24;

/// Tolerance on the sum of a share-tagged profile.
pub const SHARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileUnit {
    PerKm2,
    Share,
    Dimensionless,
    GbPerDay,
    GbPerKm2,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("expected {HOURS} hourly values, got {0}")]
    WrongLength(usize),
    #[error("hour {hour}: value {value} is negative or not finite")]
    InvalidValue { hour: usize, value: f64 },
    #[error("share profile sums to {0}, expected 1")]
    NotNormalized(f64),
}

/// A 24-slot non-negative series over hours 0..23.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyProfile {
    values: [f64; HOURS],
    unit: ProfileUnit,
}

impl HourlyProfile {
    pub fn new(values: [f64; HOURS], unit: ProfileUnit) -> Result<Self, ProfileError> {
        for (hour, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProfileError::InvalidValue { hour, value });
            }
        }
        if unit == ProfileUnit::Share {
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() > SHARE_TOLERANCE {
                return Err(ProfileError::NotNormalized(sum));
            }
        }
        Ok(Self { values, unit })
    }

    pub fn from_slice(values: &[f64], unit: ProfileUnit) -> Result<Self, ProfileError> {
        let arr: [f64; HOURS] = values
            .try_into()
            .map_err(|_| ProfileError::WrongLength(values.len()))?;
        Self::new(arr, unit)
    }

    /// Rescales non-negative weights so they sum to one.
    pub fn normalized_share(weights: &[f64]) -> Result<Self, ProfileError> {
        let arr: [f64; HOURS] = weights
            .try_into()
            .map_err(|_| ProfileError::WrongLength(weights.len()))?;
        for (hour, &value) in arr.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProfileError::InvalidValue { hour, value });
            }
        }
        let sum: f64 = arr.iter().sum();
        if sum <= 0.0 {
            return Err(ProfileError::NotNormalized(sum));
        }
        Self::new(arr.map(|v| v / sum), ProfileUnit::Share)
    }

    pub fn constant(value: f64, unit: ProfileUnit) -> Result<Self, ProfileError> {
        Self::new([value; HOURS], unit)
    }

    pub fn zeros(unit: ProfileUnit) -> Self {
        Self {
            values: [0.0; HOURS],
            unit,
        }
    }

    pub fn values(&self) -> &[f64; HOURS] {
        &self.values
    }

    pub fn unit(&self) -> ProfileUnit {
        self.unit
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / HOURS as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Median of the 24 values (mean of the two central ones).
    pub fn median(&self) -> f64 {
        median24(&self.values)
    }

    /// Largest value and its hour; ties go to the lowest hour.
    pub fn argmax(&self) -> (usize, f64) {
        argmax24(&self.values)
    }

    pub fn scaled(&self, k: f64, unit: ProfileUnit) -> Self {
        Self {
            values: self.values.map(|v| v * k),
            unit,
        }
    }
}

impl Index<usize> for HourlyProfile {
    type Output = f64;

    fn index(&self, hour: usize) -> &f64 {
        &self.values[hour]
    }
}

pub(crate) fn median24(values: &[f64; HOURS]) -> f64 {
    let mut sorted = *values;
    sorted.sort_by(f64::total_cmp);
    0.5 * (sorted[HOURS / 2 - 1] + sorted[HOURS / 2])
}

pub(crate) fn argmax24(values: &[f64; HOURS]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (h, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (h, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_wrong_length() {
        let mut v = [1.0; HOURS];
        v[3] = -1.0;
        assert!(matches!(
            HourlyProfile::new(v, ProfileUnit::PerKm2),
            Err(ProfileError::InvalidValue { hour: 3, .. })
        ));
        assert_eq!(
            HourlyProfile::from_slice(&[1.0; 23], ProfileUnit::PerKm2),
            Err(ProfileError::WrongLength(23))
        );
    }

    #[test]
    fn share_must_sum_to_one() {
        assert!(HourlyProfile::constant(1.0 / 24.0, ProfileUnit::Share).is_ok());
        assert!(HourlyProfile::constant(0.05, ProfileUnit::Share).is_err());
        let p = HourlyProfile::normalized_share(&[2.0; HOURS]).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_and_argmax() {
        let mut v = [0.0; HOURS];
        for (h, x) in v.iter_mut().enumerate() {
            *x = h as f64;
        }
        let p = HourlyProfile::new(v, ProfileUnit::PerKm2).unwrap();
        assert_eq!(p.median(), 11.5);
        assert_eq!(p.argmax(), (23, 23.0));
        let flat = HourlyProfile::constant(5.0, ProfileUnit::PerKm2).unwrap();
        assert_eq!(flat.argmax().0, 0);
        assert_eq!(flat.median(), 5.0);
    }
}

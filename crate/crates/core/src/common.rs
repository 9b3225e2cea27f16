use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Option<Self> {
        (start <= end).then_some(Self { start, end })
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl FromStr for YearRange {
    type Err = String;

    /// Accepts `2018-2030` or a single year.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (a, b) = match s.split_once('-') {
            Some((a, b)) => (a, b),
            None => (s, s),
        };
        let start: i32 = a
            .trim()
            .parse()
            .map_err(|_| format!("invalid year `{a}`"))?;
        let end: i32 = b
            .trim()
            .parse()
            .map_err(|_| format!("invalid year `{b}`"))?;
        YearRange::new(start, end).ok_or_else(|| format!("empty year range `{s}`"))
    }
}

/// Which bound of an uncertain parameter is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimate {
    Low,
    High,
    Medium,
}

impl Estimate {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimate::Low => "low",
            Estimate::High => "high",
            Estimate::Medium => "medium",
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Estimate::Low),
            "high" => Ok(Estimate::High),
            "medium" => Ok(Estimate::Medium),
            other => Err(format!("unknown estimate `{other}`")),
        }
    }
}

/// Low/high/medium alternatives of one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct Variants<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium: Option<T>,
}

impl<T> Default for Variants<T> {
    fn default() -> Self {
        Self {
            low: None,
            high: None,
            medium: None,
        }
    }
}

impl<T> Variants<T> {
    pub fn medium(value: T) -> Self {
        Self {
            medium: Some(value),
            ..Self::default()
        }
    }

    pub fn bounded(low: T, high: T) -> Self {
        Self {
            low: Some(low),
            high: Some(high),
            medium: None,
        }
    }

    pub fn get(&self, estimate: Estimate) -> Option<&T> {
        match estimate {
            Estimate::Low => self.low.as_ref(),
            Estimate::High => self.high.as_ref(),
            Estimate::Medium => self.medium.as_ref(),
        }
    }

    /// The requested variant, or the medium one when the bound is absent.
    pub fn select(&self, estimate: Estimate) -> Option<(Estimate, &T)> {
        if let Some(v) = self.get(estimate) {
            return Some((estimate, v));
        }
        match estimate {
            Estimate::Medium => None,
            _ => self.medium.as_ref().map(|v| (Estimate::Medium, v)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none() && self.medium.is_none()
    }

    pub fn has_bounds(&self) -> bool {
        self.low.is_some() && self.high.is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Estimate, &T)> {
        [
            (Estimate::Low, self.low.as_ref()),
            (Estimate::High, self.high.as_ref()),
            (Estimate::Medium, self.medium.as_ref()),
        ]
        .into_iter()
        .filter_map(|(e, v)| v.map(|v| (e, v)))
    }
}

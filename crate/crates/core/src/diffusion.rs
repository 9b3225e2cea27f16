//! Annual device-penetration models: Bass diffusion, replacement-purchase
//! stock accumulation, coverage rollouts and linear rollouts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Estimate, YearRange};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("need at least 4 history points, got {0}")]
    InsufficientData(usize),
    #[error("history has no growth signal (all values equal)")]
    DegenerateHistory,
    #[error("history value for {year} is negative or not finite")]
    InvalidHistory { year: i32 },
    #[error("least-squares fit did not converge within {} iterations (residual norm {})", .best.iterations, .best.residual_norm)]
    Convergence { best: Box<BassFit> },
    #[error("model error in {year}: {message}")]
    Model { year: i32, message: String },
}

/// Penetration values of one device for one estimate kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationSeries {
    pub device_id: String,
    pub estimate: Estimate,
    pub values: BTreeMap<i32, f64>,
}

impl PenetrationSeries {
    pub fn new(estimate: Estimate, values: BTreeMap<i32, f64>) -> Self {
        Self {
            device_id: String::new(),
            estimate,
            values,
        }
    }

    pub fn with_device(mut self, device_id: impl Into<String>) -> Self {
        self.device_id = device_id.into();
        self
    }

    /// Value for `year`, zero outside the evaluated range.
    pub fn value(&self, year: i32) -> f64 {
        self.values.get(&year).copied().unwrap_or(0.0)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values
            .values()
            .zip(self.values.values().skip(1))
            .all(|(a, b)| b >= a)
    }
}

// ---------------------------------------------------------------------------
// Bass diffusion

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BassParams {
    /// Innovation coefficient (1/year).
    pub p: f64,
    /// Imitation coefficient (1/year).
    pub q: f64,
    /// Carrying capacity in penetration units.
    pub m: f64,
    /// Year at which cumulative adoption is zero.
    pub t0: f64,
}

/// Cumulative adoption fraction F(t) of the Bass model.
pub fn bass_cdf(t: f64, p: f64, q: f64) -> f64 {
    let e = (-(p + q) * t).exp();
    (1.0 - e) / (1.0 + (q / p) * e)
}

impl BassParams {
    pub fn new(p: f64, q: f64, m: f64, t0: f64) -> Result<Self, DiffusionError> {
        let params = Self { p, q, m, t0 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "p must be positive, got {}",
                self.p
            )));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "q must be non-negative, got {}",
                self.q
            )));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "m must be positive, got {}",
                self.m
            )));
        }
        if !self.t0.is_finite() {
            return Err(DiffusionError::InvalidParams("t0 must be finite".into()));
        }
        Ok(())
    }

    /// m·F(year − t0); zero at or before t0.
    pub fn value(&self, year: f64) -> f64 {
        let t = year - self.t0;
        if t <= 0.0 {
            0.0
        } else {
            self.m * bass_cdf(t, self.p, self.q)
        }
    }
}

pub fn bass_project(
    params: &BassParams,
    years: YearRange,
) -> Result<PenetrationSeries, DiffusionError> {
    params.validate()?;
    let values = years.iter().map(|y| (y, params.value(y as f64))).collect();
    Ok(PenetrationSeries::new(Estimate::Medium, values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BassFit {
    pub params: BassParams,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Keeps the fitted curve within `tolerance` of `value` at `year`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BassAnchor {
    pub year: i32,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BassFitOptions {
    pub fixed_p: Option<f64>,
    pub fixed_q: Option<f64>,
    pub anchor: Option<BassAnchor>,
    /// Iteration budget of each Levenberg-Marquardt run.
    pub max_iterations: usize,
}

impl Default for BassFitOptions {
    fn default() -> Self {
        Self {
            fixed_p: None,
            fixed_q: None,
            anchor: None,
            max_iterations: 500,
        }
    }
}

const P_GRID: [f64; 4] = [0.001, 0.01, 0.03, 0.1];
const Q_GRID: [f64; 4] = [0.01, 0.1, 0.3, 1.0];
const M_SCALE_GRID: [f64; 2] = [1.1, 2.0];
const T0_OFFSET_GRID: [f64; 2] = [1.0, 10.0];

pub fn bass_fit(history: &BTreeMap<i32, f64>) -> Result<BassFit, DiffusionError> {
    bass_fit_with(history, &BassFitOptions::default())
}

/// Deterministic least-squares fit of (p, q, m, t0) using a fixed multi-start
/// grid and a box-constrained Levenberg-Marquardt iteration per start.
pub fn bass_fit_with(
    history: &BTreeMap<i32, f64>,
    options: &BassFitOptions,
) -> Result<BassFit, DiffusionError> {
    if history.len() < 4 {
        return Err(DiffusionError::InsufficientData(history.len()));
    }
    for (&year, &v) in history {
        if !v.is_finite() || v < 0.0 {
            return Err(DiffusionError::InvalidHistory { year });
        }
    }
    let first = *history.values().next().unwrap();
    if history
        .values()
        .all(|&v| (v - first).abs() <= 1e-12 * first.abs().max(1.0))
    {
        return Err(DiffusionError::DegenerateHistory);
    }
    if let Some(p) = options.fixed_p {
        if !(p.is_finite() && p > 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "fixed p must be positive, got {p}"
            )));
        }
    }
    if let Some(q) = options.fixed_q {
        if !(q.is_finite() && q >= 0.0) {
            return Err(DiffusionError::InvalidParams(format!(
                "fixed q must be non-negative, got {q}"
            )));
        }
    }
    if let Some(a) = options.anchor {
        if !(a.value > 0.0 && a.tolerance >= 0.0 && a.tolerance < a.value) {
            return Err(DiffusionError::InvalidParams(
                "anchor must be positive with tolerance below its value".into(),
            ));
        }
    }

    let problem = FitProblem::new(history, options);
    let max_v = history.values().copied().fold(0.0, f64::max);
    let first_positive = history
        .iter()
        .find(|(_, &v)| v > 0.0)
        .map(|(&y, _)| y as f64)
        .unwrap();

    let p_grid: Vec<f64> = options.fixed_p.map_or(P_GRID.to_vec(), |p| vec![p]);
    let q_grid: Vec<f64> = options.fixed_q.map_or(Q_GRID.to_vec(), |q| vec![q]);
    let third_grid: Vec<f64> = match options.anchor {
        Some(a) => vec![a.value],
        None => M_SCALE_GRID.iter().map(|s| s * max_v).collect(),
    };

    let mut best: Option<LmOutcome> = None;
    for &p in &p_grid {
        for &q in &q_grid {
            for &third in &third_grid {
                for &off in &T0_OFFSET_GRID {
                    let start = [p, q, third, (first_positive - off).min(problem.hi[3])];
                    let outcome = problem.levenberg_marquardt(start, options.max_iterations);
                    if best.as_ref().is_none_or(|b| outcome.cost < b.cost) {
                        best = Some(outcome);
                    }
                }
            }
        }
    }
    let best = best.unwrap();
    let params = problem
        .params(&best.theta)
        .ok_or_else(|| DiffusionError::InvalidParams("fit produced invalid parameters".into()))?;
    let fit = BassFit {
        params,
        residual_norm: (2.0 * best.cost).sqrt(),
        iterations: best.iterations,
        converged: best.converged,
    };
    if fit.converged {
        Ok(fit)
    } else {
        Err(DiffusionError::Convergence {
            best: Box::new(fit),
        })
    }
}

struct LmOutcome {
    theta: [f64; 4],
    cost: f64,
    iterations: usize,
    converged: bool,
}

/// Parameter vector is [p, q, m or anchor value, t0].
struct FitProblem {
    years: Vec<f64>,
    values: Vec<f64>,
    anchor: Option<BassAnchor>,
    free: Vec<usize>,
    lo: [f64; 4],
    hi: [f64; 4],
}

impl FitProblem {
    fn new(history: &BTreeMap<i32, f64>, options: &BassFitOptions) -> Self {
        let first_positive = history
            .iter()
            .find(|(_, &v)| v > 0.0)
            .map(|(&y, _)| y as f64)
            .unwrap_or(f64::INFINITY);
        let mut t0_hi = first_positive;
        let (third_lo, third_hi) = match options.anchor {
            Some(a) => {
                t0_hi = t0_hi.min(a.year as f64 - 1e-6);
                (a.value - a.tolerance, a.value + a.tolerance)
            }
            None => (1e-9, f64::INFINITY),
        };
        let mut free = Vec::new();
        if options.fixed_p.is_none() {
            free.push(0);
        }
        if options.fixed_q.is_none() {
            free.push(1);
        }
        free.extend([2, 3]);
        Self {
            years: history.keys().map(|&y| y as f64).collect(),
            values: history.values().copied().collect(),
            anchor: options.anchor,
            free,
            lo: [1e-9, 0.0, third_lo, f64::NEG_INFINITY],
            hi: [10.0, 10.0, third_hi, t0_hi],
        }
    }

    fn params(&self, theta: &[f64; 4]) -> Option<BassParams> {
        let [p, q, third, t0] = *theta;
        let m = match self.anchor {
            Some(a) => {
                let f = bass_cdf(a.year as f64 - t0, p, q);
                if !(f > 0.0) {
                    return None;
                }
                third / f
            }
            None => third,
        };
        BassParams::new(p, q, m, t0).ok()
    }

    fn residuals(&self, theta: &[f64; 4]) -> Option<DVector<f64>> {
        let params = self.params(theta)?;
        let r = DVector::from_iterator(
            self.years.len(),
            self.years
                .iter()
                .zip(&self.values)
                .map(|(&y, &v)| params.value(y) - v),
        );
        r.iter().all(|x| x.is_finite()).then_some(r)
    }

    fn cost(&self, theta: &[f64; 4]) -> f64 {
        self.residuals(theta)
            .map_or(f64::INFINITY, |r| 0.5 * r.norm_squared())
    }

    fn clamp(&self, theta: &mut [f64; 4]) {
        for i in 0..4 {
            theta[i] = theta[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    fn jacobian(&self, theta: &[f64; 4], r0: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(self.years.len(), self.free.len());
        for (col, &i) in self.free.iter().enumerate() {
            let h = 1e-6 * (theta[i].abs() + 1e-3);
            let mut up = *theta;
            let mut dn = *theta;
            up[i] = (theta[i] + h).min(self.hi[i]);
            dn[i] = (theta[i] - h).max(self.lo[i]);
            let (ru, rd, span) = match (self.residuals(&up), self.residuals(&dn)) {
                (Some(ru), Some(rd)) => (ru, rd, up[i] - dn[i]),
                (Some(ru), None) => (ru, r0.clone(), up[i] - theta[i]),
                (None, Some(rd)) => (r0.clone(), rd, theta[i] - dn[i]),
                (None, None) => return None,
            };
            if span <= 0.0 {
                return None;
            }
            jac.set_column(col, &((ru - rd) / span));
        }
        Some(jac)
    }

    fn levenberg_marquardt(&self, start: [f64; 4], max_iterations: usize) -> LmOutcome {
        let mut theta = start;
        self.clamp(&mut theta);
        let mut cost = self.cost(&theta);
        let mut lambda = 1e-3;
        let mut iterations = 0;
        let mut converged = false;
        if !cost.is_finite() {
            return LmOutcome {
                theta,
                cost,
                iterations,
                converged,
            };
        }
        while iterations < max_iterations {
            iterations += 1;
            let r = self.residuals(&theta).unwrap();
            let Some(jac) = self.jacobian(&theta, &r) else {
                break;
            };
            let jt = jac.transpose();
            let a = &jt * &jac;
            let g = &jt * &r;
            let mut accepted = None;
            while lambda < 1e16 {
                let mut damped = a.clone();
                for k in 0..damped.nrows() {
                    damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
                }
                if let Some(chol) = damped.cholesky() {
                    let step = chol.solve(&(-&g));
                    let mut trial = theta;
                    for (k, &i) in self.free.iter().enumerate() {
                        trial[i] += step[k];
                    }
                    self.clamp(&mut trial);
                    let trial_cost = self.cost(&trial);
                    if trial_cost < cost {
                        accepted = Some((trial, trial_cost));
                        lambda = (lambda / 3.0).max(1e-12);
                        break;
                    }
                }
                lambda *= 4.0;
            }
            let Some((trial, trial_cost)) = accepted else {
                converged = true;
                break;
            };
            let step_norm: f64 = self
                .free
                .iter()
                .map(|&i| ((trial[i] - theta[i]) / (theta[i].abs() + 1e-12)).powi(2))
                .sum::<f64>()
                .sqrt();
            let decrease = cost - trial_cost;
            theta = trial;
            cost = trial_cost;
            if cost < 1e-28 || decrease <= 1e-10 * cost || step_norm < 1e-10 {
                converged = true;
                break;
            }
        }
        LmOutcome {
            theta,
            cost,
            iterations,
            converged,
        }
    }
}

// ---------------------------------------------------------------------------
// Replacement-purchase stock model

/// Year-dependent quantity (sales, connected share, population).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// base + slope·(year − base_year)
    Linear {
        base: f64,
        base_year: i32,
        slope: f64,
    },
    /// base·factor^(year − base_year)
    Geometric {
        base: f64,
        base_year: i32,
        factor: f64,
    },
    /// Explicit values from `start_year`; zero before, `after` (or the last
    /// value) beyond the table.
    Table {
        start_year: i32,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        after: Option<f64>,
    },
}

impl Schedule {
    pub fn value(&self, year: i32) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Linear {
                base,
                base_year,
                slope,
            } => base + slope * (year - base_year) as f64,
            Schedule::Geometric {
                base,
                base_year,
                factor,
            } => base * factor.powi(year - base_year),
            Schedule::Table {
                start_year,
                ref values,
                after,
            } => {
                if year < start_year {
                    return 0.0;
                }
                let idx = (year - start_year) as usize;
                match values.get(idx) {
                    Some(&v) => v,
                    None => after.or_else(|| values.last().copied()).unwrap_or(0.0),
                }
            }
        }
    }

    fn validate(&self, what: &str) -> Result<(), DiffusionError> {
        let finite = match self {
            Schedule::Constant { value } => value.is_finite(),
            Schedule::Linear { base, slope, .. } => base.is_finite() && slope.is_finite(),
            Schedule::Geometric { base, factor, .. } => {
                base.is_finite() && factor.is_finite() && *factor >= 0.0
            }
            Schedule::Table { values, after, .. } => {
                !values.is_empty() && values.iter().chain(after.iter()).all(|v| v.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(DiffusionError::InvalidParams(format!(
                "{what} schedule is empty or not finite"
            )))
        }
    }
}

/// What connected devices are divided by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum StockBody {
    /// The device stock itself (cars, buses, bikes); penetration clamped to [0, 1].
    Stock {
        initial_stock: f64,
        base_year: i32,
        annual_net_growth: f64,
    },
    /// An external population of adopters.
    Population { size: Schedule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockModel {
    pub body: StockBody,
    pub annual_sales: Schedule,
    pub connected_share: Schedule,
    /// `None` means devices are never retired within the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_lifetime_years: Option<u32>,
    pub start_year: i32,
}

impl StockModel {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        if self.device_lifetime_years == Some(0) {
            return Err(DiffusionError::InvalidParams(
                "device lifetime must be at least 1 year".into(),
            ));
        }
        self.annual_sales.validate("annual sales")?;
        self.connected_share.validate("connected share")?;
        match &self.body {
            StockBody::Stock {
                initial_stock,
                annual_net_growth,
                ..
            } => {
                if !(initial_stock.is_finite() && annual_net_growth.is_finite()) {
                    return Err(DiffusionError::InvalidParams("stock must be finite".into()));
                }
            }
            StockBody::Population { size } => size.validate("adopting body size")?,
        }
        Ok(())
    }

    pub fn body_size(&self, year: i32) -> f64 {
        match &self.body {
            StockBody::Stock {
                initial_stock,
                base_year,
                annual_net_growth,
            } => initial_stock + annual_net_growth * (year - base_year) as f64,
            StockBody::Population { size } => size.value(year),
        }
    }

    /// Connected devices alive in `year`.
    pub fn connected_count(&self, year: i32) -> f64 {
        if year < self.start_year {
            return 0.0;
        }
        let first = match self.device_lifetime_years {
            Some(life) => self.start_year.max(year - life as i32 + 1),
            None => self.start_year,
        };
        (first..=year)
            .map(|s| self.annual_sales.value(s) * self.connected_share.value(s).clamp(0.0, 1.0))
            .sum()
    }
}

pub fn replacement_penetration(
    model: &StockModel,
    years: YearRange,
) -> Result<PenetrationSeries, DiffusionError> {
    model.validate()?;
    let mut values = BTreeMap::new();
    for year in years.iter() {
        let body = model.body_size(year);
        if !(body > 0.0) {
            return Err(DiffusionError::Model {
                year,
                message: format!("adopting body size {body} is not positive"),
            });
        }
        let mut pen = model.connected_count(year) / body;
        if matches!(model.body, StockBody::Stock { .. }) {
            pen = pen.clamp(0.0, 1.0);
        }
        values.insert(year, pen.max(0.0));
    }
    Ok(PenetrationSeries::new(Estimate::Medium, values))
}

// ---------------------------------------------------------------------------
// Rollouts

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSchedule {
    /// devices/km²
    pub max_density: f64,
    pub annual_fraction: f64,
    pub start_year: i32,
}

impl RolloutSchedule {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        if !(self.max_density.is_finite() && self.max_density >= 0.0) {
            return Err(DiffusionError::InvalidParams(
                "max density must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.annual_fraction) {
            return Err(DiffusionError::InvalidParams(format!(
                "annual fraction {} outside [0, 1]",
                self.annual_fraction
            )));
        }
        Ok(())
    }

    pub fn value(&self, year: i32) -> f64 {
        if year < self.start_year {
            return 0.0;
        }
        let steps = (year - self.start_year + 1) as f64;
        (self.max_density * self.annual_fraction * steps).min(self.max_density)
    }
}

pub fn coverage_rollout(
    sched: &RolloutSchedule,
    years: YearRange,
) -> Result<PenetrationSeries, DiffusionError> {
    sched.validate()?;
    let values = years.iter().map(|y| (y, sched.value(y))).collect();
    Ok(PenetrationSeries::new(Estimate::Medium, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRollout {
    pub base: f64,
    pub target: f64,
    pub start_year: i32,
    pub duration_years: u32,
}

impl LinearRollout {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        if self.duration_years == 0 {
            return Err(DiffusionError::InvalidParams(
                "rollout duration must be at least 1 year".into(),
            ));
        }
        if !(self.base.is_finite()
            && self.target.is_finite()
            && self.base >= 0.0
            && self.target >= 0.0)
        {
            return Err(DiffusionError::InvalidParams(
                "rollout levels must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn value(&self, year: i32) -> f64 {
        let end = self.start_year + self.duration_years as i32;
        if year <= self.start_year {
            self.base
        } else if year >= end {
            self.target
        } else {
            let frac = (year - self.start_year) as f64 / self.duration_years as f64;
            self.base + (self.target - self.base) * frac
        }
    }
}

pub fn linear_rollout(
    base: f64,
    target: f64,
    start_year: i32,
    duration_years: u32,
    years: YearRange,
) -> Result<PenetrationSeries, DiffusionError> {
    let r = LinearRollout {
        base,
        target,
        start_year,
        duration_years,
    };
    r.validate()?;
    let values = years.iter().map(|y| (y, r.value(y))).collect();
    Ok(PenetrationSeries::new(Estimate::Medium, values))
}

/// Any of the supported penetration model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PenetrationModel {
    Bass(BassParams),
    Replacement(StockModel),
    Coverage(RolloutSchedule),
    Linear(LinearRollout),
}

impl PenetrationModel {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        match self {
            PenetrationModel::Bass(p) => p.validate(),
            PenetrationModel::Replacement(m) => m.validate(),
            PenetrationModel::Coverage(s) => s.validate(),
            PenetrationModel::Linear(r) => r.validate(),
        }
    }

    pub fn evaluate(&self, years: YearRange) -> Result<PenetrationSeries, DiffusionError> {
        match self {
            PenetrationModel::Bass(p) => bass_project(p, years),
            PenetrationModel::Replacement(m) => replacement_penetration(m, years),
            PenetrationModel::Coverage(s) => coverage_rollout(s, years),
            PenetrationModel::Linear(r) => {
                linear_rollout(r.base, r.target, r.start_year, r.duration_years, years)
            }
        }
    }
}

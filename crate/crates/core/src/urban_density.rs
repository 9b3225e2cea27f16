//! Static and hour-of-day urban densities built from census facts and
//! cordon crossing counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{HourlyProfile, ProfileError, ProfileUnit, HOURS};

/// Daily inbound/outbound imbalance allowed, relative to total inbound.
pub const DEFAULT_BALANCE_TOLERANCE: f64 = 0.01;

/// Inflow is allocated to hours before this one, outflow from it onwards.
pub const INFLOW_END_HOUR: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("invalid area profile: {0}")]
    InvalidArea(String),
    #[error("invalid transport parameters: {0}")]
    InvalidTransport(String),
    #[error("invalid crossing counts: {0}")]
    InvalidCounts(String),
    #[error("net crossing series is constant; pattern is undefined")]
    DegeneratePattern,
    #[error("non-working population is negative at hour {hour} ({value})")]
    InconsistentArea { hour: usize, value: f64 },
    #[error("inconsistent parameters: {0}")]
    InconsistentParameters(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaProfile {
    pub area_km2: f64,
    pub population_density: f64,
    pub resident_employed_density: f64,
    pub workplace_density: f64,
    pub service_workplace_fraction: f64,
    pub retailer_density: f64,
    pub building_density: f64,
}

impl AreaProfile {
    pub fn validate(&self) -> Result<(), DensityError> {
        let fields = [
            ("population_density", self.population_density),
            ("resident_employed_density", self.resident_employed_density),
            ("workplace_density", self.workplace_density),
            ("retailer_density", self.retailer_density),
            ("building_density", self.building_density),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DensityError::InvalidArea(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        if !(self.area_km2.is_finite() && self.area_km2 > 0.0) {
            return Err(DensityError::InvalidArea(
                "area_km2 must be positive".into(),
            ));
        }
        if self.resident_employed_density > self.population_density {
            return Err(DensityError::InvalidArea(
                "resident_employed_density exceeds population_density".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.service_workplace_fraction) {
            return Err(DensityError::InvalidArea(
                "service_workplace_fraction outside [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Service workplaces filled by commuters from outside the area.
    pub fn workforce_deficit(&self) -> f64 {
        self.workplace_density * self.service_workplace_fraction - self.resident_employed_density
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportParams {
    pub car_mode_share: f64,
    /// persons per car
    pub car_occupancy: f64,
    pub car_ownership_per_inhabitant: f64,
    pub bus_to_car_ratio: f64,
    pub bikes_per_inhabitant: f64,
    pub bike_mode_share: f64,
}

impl TransportParams {
    pub fn validate(&self) -> Result<(), DensityError> {
        let all = [
            ("car_mode_share", self.car_mode_share),
            ("car_occupancy", self.car_occupancy),
            (
                "car_ownership_per_inhabitant",
                self.car_ownership_per_inhabitant,
            ),
            ("bus_to_car_ratio", self.bus_to_car_ratio),
            ("bikes_per_inhabitant", self.bikes_per_inhabitant),
            ("bike_mode_share", self.bike_mode_share),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DensityError::InvalidTransport(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        for (name, v) in [
            ("car_mode_share", self.car_mode_share),
            ("bike_mode_share", self.bike_mode_share),
        ] {
            if v > 1.0 {
                return Err(DensityError::InvalidTransport(format!("{name} exceeds 1")));
            }
        }
        if self.car_occupancy <= 0.0 {
            return Err(DensityError::InvalidTransport(
                "car_occupancy must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Hourly crossings into and out of the cordon.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingCounts {
    inbound: [f64; HOURS],
    outbound: [f64; HOURS],
}

impl CrossingCounts {
    pub fn new(inbound: [f64; HOURS], outbound: [f64; HOURS]) -> Result<Self, DensityError> {
        Self::with_tolerance(inbound, outbound, DEFAULT_BALANCE_TOLERANCE)
    }

    pub fn with_tolerance(
        inbound: [f64; HOURS],
        outbound: [f64; HOURS],
        tolerance: f64,
    ) -> Result<Self, DensityError> {
        for (h, (&i, &o)) in inbound.iter().zip(&outbound).enumerate() {
            if !(i.is_finite() && o.is_finite() && i >= 0.0 && o >= 0.0) {
                return Err(DensityError::InvalidCounts(format!(
                    "hour {h}: counts must be non-negative"
                )));
            }
        }
        let total_in: f64 = inbound.iter().sum();
        let total_out: f64 = outbound.iter().sum();
        if (total_in - total_out).abs() > tolerance * total_in {
            return Err(DensityError::InvalidCounts(format!(
                "daily imbalance: inbound {total_in} vs outbound {total_out}"
            )));
        }
        Ok(Self { inbound, outbound })
    }

    pub fn inbound(&self) -> &[f64; HOURS] {
        &self.inbound
    }

    pub fn outbound(&self) -> &[f64; HOURS] {
        &self.outbound
    }
}

/// Normalized cumulative net inflow across the cordon.
pub fn included_people_pattern(counts: &CrossingCounts) -> Result<HourlyProfile, DensityError> {
    let mut cumulative = [0.0; HOURS];
    let mut acc = 0.0;
    for h in 0..HOURS {
        acc += counts.inbound[h] - counts.outbound[h];
        cumulative[h] = acc;
    }
    let lo = cumulative.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) || span <= 1e-12 * hi.abs().max(lo.abs()) {
        return Err(DensityError::DegeneratePattern);
    }
    Ok(HourlyProfile::new(
        cumulative.map(|c| (c - lo) / span),
        ProfileUnit::Dimensionless,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivePopulation {
    pub active: HourlyProfile,
    pub working: HourlyProfile,
    pub non_working: HourlyProfile,
}

pub fn active_population(
    area: &AreaProfile,
    pattern: &HourlyProfile,
) -> Result<ActivePopulation, DensityError> {
    area.validate()?;
    let mut working = [0.0; HOURS];
    let mut non_working = [0.0; HOURS];
    let mut active = [0.0; HOURS];
    for h in 0..HOURS {
        let pat = pattern[h];
        if !(0.0..=1.0).contains(&pat) {
            return Err(DensityError::InvalidCounts(format!(
                "pattern value {pat} at hour {h} outside [0, 1]"
            )));
        }
        working[h] = area.workplace_density * area.service_workplace_fraction * pat;
        non_working[h] = area.population_density - area.resident_employed_density * pat;
        if non_working[h] < 0.0 {
            return Err(DensityError::InconsistentArea {
                hour: h,
                value: non_working[h],
            });
        }
        active[h] = working[h] + non_working[h];
    }
    Ok(ActivePopulation {
        active: HourlyProfile::new(active, ProfileUnit::PerKm2)?,
        working: HourlyProfile::new(working, ProfileUnit::PerKm2)?,
        non_working: HourlyProfile::new(non_working, ProfileUnit::PerKm2)?,
    })
}

/// |active(h) − active(h−1)|, wrapping hour 0 to hour 23.
pub fn moving_population(active: &HourlyProfile) -> HourlyProfile {
    let v = active.values();
    let moving = std::array::from_fn(|h| (v[h] - v[(h + HOURS - 1) % HOURS]).abs());
    HourlyProfile::new(moving, ProfileUnit::PerKm2).expect("absolute differences are non-negative")
}

/// Hourly stock of commuting vehicles: `trips` arrive over the inflow hours
/// following inbound counts and leave over the outflow hours following
/// outbound counts, on top of a resident baseline.
pub fn commuter_stock(
    counts: &CrossingCounts,
    trips: f64,
    resident: f64,
) -> Result<[f64; HOURS], DensityError> {
    let mut flow = [0.0; HOURS];
    if trips != 0.0 {
        let in_sum: f64 = counts.inbound[..INFLOW_END_HOUR].iter().sum();
        let out_sum: f64 = counts.outbound[INFLOW_END_HOUR..].iter().sum();
        if !(in_sum > 0.0 && out_sum > 0.0) {
            return Err(DensityError::InconsistentParameters(
                "no inbound crossings before the split hour or no outbound crossings after it"
                    .into(),
            ));
        }
        for h in 0..INFLOW_END_HOUR {
            flow[h] = trips * counts.inbound[h] / in_sum;
        }
        for h in INFLOW_END_HOUR..HOURS {
            flow[h] = -trips * counts.outbound[h] / out_sum;
        }
    }
    let mut stock = [0.0; HOURS];
    let mut acc = resident;
    for h in 0..HOURS {
        acc += flow[h];
        if acc < 0.0 {
            return Err(DensityError::InconsistentParameters(format!(
                "negative vehicle stock at hour {h}"
            )));
        }
        stock[h] = acc;
    }
    Ok(stock)
}

fn moving_from_stock(stock: &[f64; HOURS]) -> Result<HourlyProfile, DensityError> {
    let moving = std::array::from_fn(|h| (stock[h] - stock[(h + HOURS - 1) % HOURS]).abs());
    Ok(HourlyProfile::new(moving, ProfileUnit::PerKm2)?)
}

/// Commuter car trips per day and km².
pub fn commuter_car_trips(
    area: &AreaProfile,
    params: &TransportParams,
) -> Result<f64, DensityError> {
    area.validate()?;
    params.validate()?;
    let deficit = area.workforce_deficit();
    if deficit < 0.0 {
        return Err(DensityError::InconsistentParameters(format!(
            "negative workforce deficit {deficit}"
        )));
    }
    Ok(deficit * params.car_mode_share / params.car_occupancy)
}

pub fn car_stock(
    area: &AreaProfile,
    counts: &CrossingCounts,
    params: &TransportParams,
    resident_cars: f64,
) -> Result<HourlyProfile, DensityError> {
    let trips = commuter_car_trips(area, params)?;
    Ok(HourlyProfile::new(
        commuter_stock(counts, trips, resident_cars)?,
        ProfileUnit::PerKm2,
    )?)
}

pub fn moving_car_density(
    area: &AreaProfile,
    counts: &CrossingCounts,
    params: &TransportParams,
    resident_cars: f64,
) -> Result<HourlyProfile, DensityError> {
    let trips = commuter_car_trips(area, params)?;
    moving_from_stock(&commuter_stock(counts, trips, resident_cars)?)
}

pub fn moving_bus_density(
    moving_cars: &HourlyProfile,
    ratio: f64,
) -> Result<HourlyProfile, DensityError> {
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(DensityError::InvalidTransport(
            "bus_to_car_ratio must be non-negative".into(),
        ));
    }
    Ok(moving_cars.scaled(ratio, ProfileUnit::PerKm2))
}

/// Bike commutes cover every service workplace, resident or not; one rider per bike.
pub fn moving_bike_density(
    area: &AreaProfile,
    counts: &CrossingCounts,
    params: &TransportParams,
) -> Result<HourlyProfile, DensityError> {
    area.validate()?;
    params.validate()?;
    let trips = area.workplace_density * area.service_workplace_fraction * params.bike_mode_share;
    let resident = params.bikes_per_inhabitant * area.population_density;
    moving_from_stock(&commuter_stock(counts, trips, resident)?)
}

/// Urban density a device's penetration is multiplied by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityBinding {
    ActivePopulation,
    WorkingPopulation,
    NonWorkingPopulation,
    MovingPopulation,
    MovingCars,
    MovingBuses,
    MovingBikes,
    Buildings,
    Retailers,
    /// One per km², for devices whose penetration is already a density.
    Area,
}

impl DensityBinding {
    pub const ALL: [DensityBinding; 10] = [
        DensityBinding::ActivePopulation,
        DensityBinding::WorkingPopulation,
        DensityBinding::NonWorkingPopulation,
        DensityBinding::MovingPopulation,
        DensityBinding::MovingCars,
        DensityBinding::MovingBuses,
        DensityBinding::MovingBikes,
        DensityBinding::Buildings,
        DensityBinding::Retailers,
        DensityBinding::Area,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DensityBinding::ActivePopulation => "active_population",
            DensityBinding::WorkingPopulation => "working_population",
            DensityBinding::NonWorkingPopulation => "non_working_population",
            DensityBinding::MovingPopulation => "moving_population",
            DensityBinding::MovingCars => "moving_cars",
            DensityBinding::MovingBuses => "moving_buses",
            DensityBinding::MovingBikes => "moving_bikes",
            DensityBinding::Buildings => "buildings",
            DensityBinding::Retailers => "retailers",
            DensityBinding::Area => "area",
        }
    }
}

pub type DensityTable = BTreeMap<DensityBinding, HourlyProfile>;

/// Every urban density profile of one study area.
#[derive(Debug, Clone, PartialEq)]
pub struct UrbanDensities {
    pub pattern: HourlyProfile,
    pub population: ActivePopulation,
    pub moving_population: HourlyProfile,
    pub car_stock: HourlyProfile,
    pub moving_cars: HourlyProfile,
    pub moving_buses: HourlyProfile,
    pub moving_bikes: HourlyProfile,
    pub buildings: HourlyProfile,
    pub retailers: HourlyProfile,
}

impl UrbanDensities {
    pub fn build(
        area: &AreaProfile,
        counts: &CrossingCounts,
        transport: &TransportParams,
    ) -> Result<Self, DensityError> {
        let pattern = included_people_pattern(counts)?;
        let population = active_population(area, &pattern)?;
        let moving_population = moving_population(&population.active);
        let resident_cars = transport.car_ownership_per_inhabitant * area.population_density;
        let car_stock = car_stock(area, counts, transport, resident_cars)?;
        let moving_cars = moving_car_density(area, counts, transport, resident_cars)?;
        let moving_buses = moving_bus_density(&moving_cars, transport.bus_to_car_ratio)?;
        let moving_bikes = moving_bike_density(area, counts, transport)?;
        Ok(Self {
            pattern,
            population,
            moving_population,
            car_stock,
            moving_cars,
            moving_buses,
            moving_bikes,
            buildings: HourlyProfile::constant(area.building_density, ProfileUnit::PerKm2)?,
            retailers: HourlyProfile::constant(area.retailer_density, ProfileUnit::PerKm2)?,
        })
    }

    pub fn profile(&self, binding: DensityBinding) -> HourlyProfile {
        match binding {
            DensityBinding::ActivePopulation => self.population.active.clone(),
            DensityBinding::WorkingPopulation => self.population.working.clone(),
            DensityBinding::NonWorkingPopulation => self.population.non_working.clone(),
            DensityBinding::MovingPopulation => self.moving_population.clone(),
            DensityBinding::MovingCars => self.moving_cars.clone(),
            DensityBinding::MovingBuses => self.moving_buses.clone(),
            DensityBinding::MovingBikes => self.moving_bikes.clone(),
            DensityBinding::Buildings => self.buildings.clone(),
            DensityBinding::Retailers => self.retailers.clone(),
            DensityBinding::Area => HourlyProfile::constant(1.0, ProfileUnit::PerKm2).unwrap(),
        }
    }

    pub fn table(&self) -> DensityTable {
        DensityBinding::ALL
            .iter()
            .map(|&b| (b, self.profile(b)))
            .collect()
    }
}

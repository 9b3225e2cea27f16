//! Shared fixtures and proptest strategies for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use proptest::prelude::*;

use urbancast::cli_io::{load_config, load_model, LoadedModel};
use urbancast::diffusion::{
    BassParams, LinearRollout, PenetrationModel, RolloutSchedule, Schedule, StockBody, StockModel,
};
use urbancast::forecast_engine::{AdoptingBody, DeviceSpec, ForecastInputs};
use urbancast::urban_density::DensityBinding;
use urbancast::volume_models::{ActivityModel, ApplicationSpec, GrowthModel, TrafficCategory};
use urbancast::{HourlyProfile, Variants, YearRange};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/helsinki")
}

pub fn fixture_config_path() -> PathBuf {
    fixture_dir().join("helsinki.fixture.toml")
}

/// The fixture model, loaded once per test binary.
pub fn fixture() -> &'static LoadedModel {
    static MODEL: OnceLock<LoadedModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let config = load_config(&fixture_config_path()).expect("fixture config loads");
        load_model(config).expect("fixture data loads")
    })
}

pub fn horizon() -> YearRange {
    YearRange::new(2018, 2030).unwrap()
}

pub const USAGE_PROFILE: &str = "usage";

/// Fixture densities plus one random usage profile.
pub fn inputs_with(devices: Vec<DeviceSpec>, usage: &HourlyProfile) -> ForecastInputs {
    let mut profiles = BTreeMap::new();
    profiles.insert(USAGE_PROFILE.to_string(), usage.clone());
    ForecastInputs {
        devices,
        densities: fixture().inputs.densities.clone(),
        profiles,
    }
}

pub fn usage_profile() -> impl Strategy<Value = HourlyProfile> {
    prop::collection::vec(0.01f64..10.0, 24)
        .prop_map(|w| HourlyProfile::normalized_share(&w).unwrap())
}

/// A pair of penetration models with low(y) <= high(y) for every year.
pub fn ordered_penetration() -> impl Strategy<Value = (PenetrationModel, PenetrationModel)> {
    prop_oneof![
        (
            0.001f64..0.1,
            0.0f64..0.8,
            0.1f64..2.0,
            1.0f64..3.0,
            1990.0f64..2025.0
        )
            .prop_map(|(p, q, m, k, t0)| {
                (
                    PenetrationModel::Bass(BassParams { p, q, m, t0 }),
                    PenetrationModel::Bass(BassParams { p, q, m: m * k, t0 }),
                )
            }),
        (0.0f64..2000.0, 1.0f64..4.0, 0.0f64..=1.0, 2015i32..2032).prop_map(
            |(max, k, f, start)| {
                (
                    PenetrationModel::Coverage(RolloutSchedule {
                        max_density: max,
                        annual_fraction: f,
                        start_year: start,
                    }),
                    PenetrationModel::Coverage(RolloutSchedule {
                        max_density: max * k,
                        annual_fraction: f,
                        start_year: start,
                    }),
                )
            }
        ),
        (
            0.0f64..5.0,
            0.0f64..5.0,
            0.0f64..5.0,
            2015i32..2032,
            1u32..15
        )
            .prop_map(|(base, up, extra, start, duration)| {
                let lo = LinearRollout {
                    base,
                    target: base + up,
                    start_year: start,
                    duration_years: duration,
                };
                let hi = LinearRollout {
                    target: base + up + extra,
                    ..lo
                };
                (PenetrationModel::Linear(lo), PenetrationModel::Linear(hi))
            }),
        (
            1e4f64..1e6,
            0.0f64..5e4,
            1.0f64..2.0,
            0.0f64..=1.0,
            2015i32..2032
        )
            .prop_map(|(size, sales, k, share, start)| {
                let model = |s: f64| StockModel {
                    body: StockBody::Population {
                        size: Schedule::Constant { value: size },
                    },
                    annual_sales: Schedule::Constant { value: s },
                    connected_share: Schedule::Constant { value: share },
                    device_lifetime_years: None,
                    start_year: start,
                };
                (
                    PenetrationModel::Replacement(model(sales)),
                    PenetrationModel::Replacement(model(sales * k)),
                )
            }),
    ]
}

/// A pair of growth models with low(y) <= high(y) from 2018 on. Base years
/// precede the horizon: an exponential with a higher rate is lower before
/// its base year.
pub fn ordered_growth() -> impl Strategy<Value = (GrowthModel, GrowthModel)> {
    prop_oneof![
        (0.0f64..2.0, 2010i32..=2018, 0.0f64..0.5, 0.0f64..0.3).prop_map(
            |(base, base_year, cagr, extra)| {
                (
                    GrowthModel::Exponential {
                        base,
                        base_year,
                        cagr,
                    },
                    GrowthModel::Exponential {
                        base,
                        base_year,
                        cagr: cagr + extra,
                    },
                )
            }
        ),
        (
            0.0f64..2.0,
            2010i32..=2018,
            0.0f64..5.0,
            0.0f64..5.0,
            1i32..15
        )
            .prop_map(|(base, base_year, up, extra, span)| {
                let ceiling_year = base_year + span;
                (
                    GrowthModel::CeilingLinear {
                        base,
                        base_year,
                        ceiling: base + up,
                        ceiling_year,
                    },
                    GrowthModel::CeilingLinear {
                        base,
                        base_year,
                        ceiling: base + up + extra,
                        ceiling_year,
                    },
                )
            }),
        (0.0f64..10.0, 0.0f64..10.0).prop_map(|(v, extra)| (
            GrowthModel::Constant { value: v },
            GrowthModel::Constant { value: v + extra }
        )),
        (0.0f64..4.0, 0.0f64..4.0, 0.1f64..10.0).prop_map(|(d, extra, rate)| {
            (
                GrowthModel::CameraHours {
                    daily_hours_delta: d,
                    hd_rate: rate,
                },
                GrowthModel::CameraHours {
                    daily_hours_delta: d + extra,
                    hd_rate: rate,
                },
            )
        }),
    ]
}

pub fn activity() -> impl Strategy<Value = ActivityModel> {
    prop_oneof![
        Just(ActivityModel::Uniform24h),
        Just(ActivityModel::UsageProfile {
            profile: USAGE_PROFILE.to_string()
        }),
        (0usize..23, 1usize..24).prop_map(|(a, len)| ActivityModel::OperatingWindow {
            start_hour: a,
            end_hour: (a + len).min(24),
        }),
        (0.25f64..12.0).prop_map(|hours| ActivityModel::ActiveHours { hours }),
    ]
}

/// Activities whose hourly allocation sums to the daily volume.
pub fn conserving_activity() -> impl Strategy<Value = ActivityModel> {
    activity().prop_filter("conserving", |a| a.conserves_daily_volume())
}

pub fn category() -> impl Strategy<Value = TrafficCategory> {
    prop::sample::select(TrafficCategory::ALL.to_vec())
}

pub fn binding() -> impl Strategy<Value = DensityBinding> {
    prop::sample::select(DensityBinding::ALL.to_vec())
}

fn application(id: String) -> impl Strategy<Value = ApplicationSpec> {
    (
        category(),
        ordered_growth(),
        activity(),
        prop::option::of(2015i32..2030),
    )
        .prop_map(
            move |(category, (lo, hi), activity, service_start)| ApplicationSpec {
                id: id.clone(),
                category,
                growth: Some(Variants::bounded(lo, hi)),
                activity,
                service_start,
            },
        )
}

/// A device with ordered low/high variants and one to three applications.
pub fn device(index: usize) -> impl Strategy<Value = DeviceSpec> {
    let id = format!("dev{index:02}");
    let apps_id = id.clone();
    (
        ordered_penetration(),
        binding(),
        (1usize..=3).prop_flat_map(move |n| {
            let apps: Vec<_> = (0..n)
                .map(|j| application(format!("{apps_id}_app{j}")))
                .collect();
            apps
        }),
    )
        .prop_map(move |((lo, hi), density, applications)| DeviceSpec {
            id: id.clone(),
            adopting_body: AdoptingBody::Population,
            penetration: Variants::bounded(lo, hi),
            density,
            applications,
            control: Default::default(),
        })
}

/// A registry of one to six devices with unique ids.
pub fn registry() -> impl Strategy<Value = Vec<DeviceSpec>> {
    (1usize..=6).prop_flat_map(|n| (0..n).map(device).collect::<Vec<_>>())
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}
pub mod props;

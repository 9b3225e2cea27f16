//! Property tests over randomly generated models and inputs.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use common::*;
use urbancast::capacity_timing::capacity_crossing_year;
use urbancast::control_needs::{attachment_rate, handover_rate};
use urbancast::diffusion::{
    bass_project, coverage_rollout, replacement_penetration, BassParams, PenetrationModel,
    RolloutSchedule, Schedule, StockBody, StockModel,
};
use urbancast::forecast_engine::{forecast, DeviceSpec, ForecastResult, Scenario};
use urbancast::urban_density::{
    active_population, commuter_stock, included_people_pattern, moving_population, AreaProfile,
    CrossingCounts, UrbanDensities,
};
use urbancast::volume_models::{ceiling_linear_volume, exponential_volume, ActivityModel};
use urbancast::{Estimate, HourlyProfile, ProfileUnit, YearRange, HOURS};

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

// ---------------------------------------------------------------------------
// Penetration

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn penetration_series_are_non_negative_and_non_decreasing((lo, hi) in ordered_penetration()) {
        props::penetration_monotone(&lo, &hi)?;
    }

    #[test]
    fn low_penetration_never_exceeds_high((lo, hi) in ordered_penetration()) {
        props::penetration_bounded(&lo, &hi)?;
    }

    #[test]
    fn bass_projection_starts_at_zero_rises_and_stays_below_m(
        p in 0.001f64..0.2, q in 0.0f64..1.0, m in 0.01f64..5.0, t0 in 1980.0f64..2020.0,
    ) {
        let params = BassParams::new(p, q, m, t0).unwrap();
        prop_assert_eq!(params.value(t0), 0.0);
        // Beyond (p + q)·t ≈ 30 the curve equals m to double precision.
        let resolved = |t: f64| (p + q) * t <= 30.0;
        let mut prev = 0.0;
        for i in 1..=80 {
            let t = 0.5 * i as f64;
            let v = params.value(t0 + t);
            prop_assert!(v <= m, "{v} > m {m}");
            if resolved(t) {
                prop_assert!(v > prev, "not increasing at t = {t}: {v} <= {prev}");
                prop_assert!(v < m, "{v} >= m {m}");
            }
            prev = v;
        }
        let s = bass_project(&params, YearRange::new(1980, 2040).unwrap()).unwrap();
        prop_assert!(s.is_non_decreasing());
        for (&y, &v) in &s.values {
            prop_assert!(v >= 0.0 && v <= m);
            if resolved(y as f64 - t0) {
                prop_assert!(v < m);
            }
        }
    }

    #[test]
    fn bass_fit_recovers_noiseless_parameters(truth in props::bass_truth()) {
        props::bass_round_trip(&truth)?;
    }

    #[test]
    fn replacement_without_lifetime_is_cumulative_connected_sales(
        size in 1e4f64..1e7,
        sales_base in 0.0f64..1e5,
        slope in 0.0f64..1e4,
        shares in prop::collection::vec(0.0f64..=1.0, 1..15),
        start in 2010i32..2030,
        stock in any::<bool>(),
        growth in 0.0f64..1e4,
    ) {
        let body = if stock {
            StockBody::Stock { initial_stock: size, base_year: 2010, annual_net_growth: growth }
        } else {
            StockBody::Population { size: Schedule::Constant { value: size } }
        };
        let model = StockModel {
            body,
            annual_sales: Schedule::Linear { base: sales_base, base_year: start, slope },
            connected_share: Schedule::Table { start_year: start, values: shares.clone(), after: None },
            device_lifetime_years: None,
            start_year: start,
        };
        let years = YearRange::new(2010, 2035).unwrap();
        let s = replacement_penetration(&model, years).unwrap();
        let mut cumulative = 0.0;
        for y in years.iter() {
            if y >= start {
                let idx = ((y - start) as usize).min(shares.len() - 1);
                cumulative += (sales_base + slope * (y - start) as f64) * shares[idx];
            }
            let body = if stock { size + growth * (y - 2010) as f64 } else { size };
            let mut want = cumulative / body;
            if stock {
                want = want.min(1.0);
            }
            prop_assert!(rel_close(s.value(y), want, 1e-12), "{y}: {} vs {want}", s.value(y));
        }
    }

    #[test]
    fn coverage_is_linear_then_flat_at_the_cap(
        max_density in 0.0f64..5000.0, annual_fraction in 0.0f64..=1.0, start_year in 2015i32..2030,
    ) {
        let sched = RolloutSchedule { max_density, annual_fraction, start_year };
        let s = coverage_rollout(&sched, YearRange::new(2010, 2060).unwrap()).unwrap();
        let step = max_density * annual_fraction;
        let mut capped = false;
        for (&y, &v) in &s.values {
            prop_assert!(v <= max_density);
            if y < start_year {
                prop_assert_eq!(v, 0.0);
            } else if capped {
                prop_assert_eq!(v, max_density);
            } else {
                let linear = step * (y - start_year + 1) as f64;
                if linear >= max_density {
                    capped = true;
                    prop_assert_eq!(v, max_density);
                } else {
                    prop_assert!(rel_close(v, linear, 1e-12));
                }
            }
        }
        let peak = s.values.values().copied().fold(0.0, f64::max);
        let reachable = if annual_fraction > 0.0 { max_density } else { 0.0 };
        prop_assert!(peak <= reachable.min(max_density));
    }
}

// ---------------------------------------------------------------------------
// Volumes

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn exponential_volume_grows_by_one_plus_cagr(
        base in 0.01f64..10.0, base_year in 2010i32..2025, cagr in 0.0f64..1.0, year in 2010i32..2040,
    ) {
        let a = exponential_volume(base, base_year, cagr, year);
        let b = exponential_volume(base, base_year, cagr, year + 1);
        prop_assert!(rel_close(b / a, 1.0 + cagr, 1e-12), "{} vs {}", b / a, 1.0 + cagr);
    }

    #[test]
    fn ceiling_linear_is_monotone_and_bounded(
        base in 0.0f64..5.0, up in 0.0f64..5.0, base_year in 2010i32..2025, span in 1i32..20,
    ) {
        let ceiling = base + up;
        let mut prev = f64::NEG_INFINITY;
        for y in 2005..2050 {
            let v = ceiling_linear_volume(base, base_year, ceiling, base_year + span, y);
            prop_assert!(v >= prev && v <= ceiling);
            prev = v;
        }
    }

    #[test]
    fn low_volume_never_exceeds_high((lo, hi) in ordered_growth(), year in 2018i32..2040) {
        props::growth_bounded(&lo, &hi, year)?;
    }

    #[test]
    fn hourly_allocation_conserves_daily_volume(
        volume in 0.0f64..1e6, activity in conserving_activity(), usage in usage_profile(),
    ) {
        props::allocation_conserves(volume, &activity, &usage)?;
    }
}

// ---------------------------------------------------------------------------
// Forecast

fn slice(result: &ForecastResult, device: &str) -> Vec<Vec<[f64; HOURS]>> {
    result
        .device(device)
        .map(|d| d.applications.iter().map(|a| a.volume.clone()).collect())
        .unwrap_or_default()
}

fn allocation(activity: &ActivityModel, volume: f64, usage: &HourlyProfile) -> [f64; HOURS] {
    match *activity {
        ActivityModel::Uniform24h => [volume / 24.0; HOURS],
        ActivityModel::UsageProfile { .. } => std::array::from_fn(|h| volume * usage[h]),
        ActivityModel::OperatingWindow {
            start_hour,
            end_hour,
        } => {
            let n = (end_hour - start_hour) as f64;
            std::array::from_fn(|h| {
                if h >= start_hour && h < end_hour {
                    volume / n
                } else {
                    0.0
                }
            })
        }
        ActivityModel::ActiveHours { hours } => [volume / hours; HOURS],
    }
}

fn scale_penetration(model: &PenetrationModel, k: f64) -> PenetrationModel {
    let mut m = model.clone();
    match &mut m {
        PenetrationModel::Bass(p) => p.m *= k,
        PenetrationModel::Coverage(s) => s.max_density *= k,
        PenetrationModel::Linear(r) => {
            r.base *= k;
            r.target *= k;
        }
        PenetrationModel::Replacement(s) => {
            if let Schedule::Constant { value } = &mut s.annual_sales {
                *value *= k;
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn rapid_dominates_slow_elementwise(devices in registry(), usage in usage_profile()) {
        props::rapid_dominates(&devices, &usage)?;
    }

    #[test]
    fn forecast_is_additive_over_partitions(
        devices in registry(), mask in prop::collection::vec(any::<bool>(), 6), usage in usage_profile(),
    ) {
        let (a, b): (Vec<(usize, DeviceSpec)>, Vec<_>) =
            devices.iter().cloned().enumerate().partition(|(i, _)| mask[*i]);
        let strip = |v: Vec<(usize, DeviceSpec)>| v.into_iter().map(|(_, d)| d).collect::<Vec<_>>();
        let scenario = Scenario::rapid();
        let whole = forecast(&inputs_with(devices, &usage), &scenario, horizon()).unwrap();
        let part_a = forecast(&inputs_with(strip(a), &usage), &scenario, horizon()).unwrap();
        let part_b = forecast(&inputs_with(strip(b), &usage), &scenario, horizon()).unwrap();
        for y in horizon().iter() {
            let w = whole.hourly_total(y).unwrap();
            let pa = part_a.hourly_total(y).unwrap();
            let pb = part_b.hourly_total(y).unwrap();
            for h in 0..HOURS {
                prop_assert!(rel_close(w[h], pa[h] + pb[h], 1e-12), "{y} h{h}: {} vs {}", w[h], pa[h] + pb[h]);
            }
        }
    }

    #[test]
    fn scaling_one_penetration_scales_only_that_slice(
        devices in registry(), pick in any::<prop::sample::Index>(), k in 0.01f64..10.0, usage in usage_profile(),
    ) {
        let i = pick.index(devices.len());
        let mut scaled = devices.clone();
        let target = scaled[i].id.clone();
        let p = &mut scaled[i].penetration;
        p.low = p.low.as_ref().map(|m| scale_penetration(m, k));
        p.high = p.high.as_ref().map(|m| scale_penetration(m, k));
        let scenario = Scenario::slow();
        let base = forecast(&inputs_with(devices.clone(), &usage), &scenario, horizon()).unwrap();
        let out = forecast(&inputs_with(scaled, &usage), &scenario, horizon()).unwrap();
        for d in &devices {
            let before = slice(&base, &d.id);
            let after = slice(&out, &d.id);
            if d.id == target {
                for (ab, aa) in before.iter().zip(&after) {
                    for (yb, ya) in ab.iter().zip(aa) {
                        for h in 0..HOURS {
                            prop_assert!(rel_close(ya[h], k * yb[h], 1e-12), "{}: {} vs {}", d.id, ya[h], k * yb[h]);
                        }
                    }
                }
            } else {
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn hourly_volumes_conserve_daily_volume(devices in registry(), usage in usage_profile()) {
        let inputs = inputs_with(devices.clone(), &usage);
        let result = forecast(&inputs, &Scenario::slow(), horizon()).unwrap();
        for spec in &devices {
            let d = result.device(&spec.id).unwrap();
            let constant = d.density.iter().all(|row| row.iter().all(|&v| v == row[0]));
            for a in &d.applications {
                let app = spec.applications.iter().find(|x| x.id == a.id).unwrap();
                for (yi, &y) in result.years.iter().enumerate() {
                    let daily = app.daily_volume(y, Estimate::Low).unwrap();
                    prop_assert_eq!(a.daily_volume[yi], daily);
                    let alloc = allocation(&app.activity, daily, &usage);
                    let want: f64 = (0..HOURS).map(|h| d.density[yi][h] * alloc[h]).sum();
                    let got: f64 = a.volume[yi].iter().sum();
                    prop_assert!(rel_close(got, want, 1e-9), "{} {y}: {got} vs {want}", a.id);
                    if constant && app.activity.conserves_daily_volume() {
                        let rho = d.density[yi][0];
                        prop_assert!(rel_close(got, rho * daily, 1e-9), "{} {y}: {got} vs {}", a.id, rho * daily);
                    }
                }
            }
        }
    }

    #[test]
    fn category_totals_partition_the_grand_total(devices in registry(), usage in usage_profile()) {
        props::category_partition(&devices, &usage)?;
    }

    #[test]
    fn reruns_are_bit_identical(devices in registry(), usage in usage_profile()) {
        props::reruns_identical(&devices, &usage)?;
    }
}

// ---------------------------------------------------------------------------
// Urban densities

/// Positive inbound counts and outbound counts with the same daily total.
fn balanced_counts() -> impl Strategy<Value = ([f64; HOURS], [f64; HOURS])> {
    (
        prop::collection::vec(1.0f64..1e4, HOURS),
        prop::collection::vec(1.0f64..1e4, HOURS),
    )
        .prop_map(|(i, o)| {
            let total_in: f64 = i.iter().sum();
            let total_out: f64 = o.iter().sum();
            let inbound: [f64; HOURS] = i.try_into().unwrap();
            let outbound: [f64; HOURS] = std::array::from_fn(|h| o[h] * total_in / total_out);
            (inbound, outbound)
        })
}

fn area() -> AreaProfile {
    fixture().config.area.clone()
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn density_profiles_are_non_negative((i, o) in balanced_counts()) {
        let counts = CrossingCounts::new(i, o).unwrap();
        let d = UrbanDensities::build(&area(), &counts, &fixture().config.transport).unwrap();
        for p in d.table().values() {
            prop_assert_eq!(p.values().len(), HOURS);
            prop_assert!(p.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn pattern_is_invariant_under_count_scaling((i, o) in balanced_counts(), k in 0.01f64..100.0) {
        let base = included_people_pattern(&CrossingCounts::new(i, o).unwrap()).unwrap();
        let scaled = included_people_pattern(&CrossingCounts::new(i.map(|v| v * k), o.map(|v| v * k)).unwrap()).unwrap();
        for h in 0..HOURS {
            prop_assert!((base[h] - scaled[h]).abs() <= 1e-9, "h{h}: {} vs {}", base[h], scaled[h]);
        }
    }

    #[test]
    fn active_population_is_affine_in_the_pattern(values in prop::collection::vec(0.0f64..=1.0, HOURS)) {
        let a = area();
        let pattern = HourlyProfile::from_slice(&values, ProfileUnit::Dimensionless).unwrap();
        let pop = active_population(&a, &pattern).unwrap();
        let slope = a.workplace_density * a.service_workplace_fraction - a.resident_employed_density;
        for h in 0..HOURS {
            let want = a.population_density + slope * values[h];
            prop_assert!(rel_close(pop.active[h], want, 1e-12));
        }
    }

    #[test]
    fn moving_population_ignores_constant_offsets(values in prop::collection::vec(0.0f64..1e4, HOURS), c in 0.0f64..1e4) {
        let p = HourlyProfile::from_slice(&values, ProfileUnit::PerKm2).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let q = HourlyProfile::from_slice(&shifted, ProfileUnit::PerKm2).unwrap();
        let (mp, mq) = (moving_population(&p), moving_population(&q));
        for h in 0..HOURS {
            prop_assert!((mp[h] - mq[h]).abs() <= 1e-9 * (1.0 + values[h].abs() + c), "h{h}");
        }
        let flat = HourlyProfile::constant(c, ProfileUnit::PerKm2).unwrap();
        prop_assert!(moving_population(&flat).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vehicle_stock_closes_its_daily_cycle((i, o) in balanced_counts(), trips in 0.0f64..1e4, resident in 0.0f64..1e4) {
        let counts = CrossingCounts::new(i, o).unwrap();
        let stock = commuter_stock(&counts, trips, resident).unwrap();
        prop_assert!((stock[HOURS - 1] - resident).abs() <= 1e-6 * resident.max(trips).max(1.0));
        prop_assert!(stock.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn zero_pattern_gives_the_census_population_exactly() {
    let a = area();
    let pop = active_population(&a, &HourlyProfile::zeros(ProfileUnit::Dimensionless)).unwrap();
    assert!(pop
        .active
        .values()
        .iter()
        .all(|&v| v == a.population_density));
}

// ---------------------------------------------------------------------------
// Control indicators

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn control_rates_are_homogeneous_in_density(att in props::attachment_inputs(), hand in props::handover_inputs(), k in 0.0f64..100.0) {
        props::control_homogeneous(&att, &hand, k)?;
    }

    #[test]
    fn control_rates_are_additive(att in props::attachment_inputs(), hand in props::handover_inputs(), split in 0usize..8) {
        let sa = split.min(att.len());
        let sh = split.min(hand.len());
        let a = attachment_rate(&att, 0.25).unwrap().total;
        let a1 = attachment_rate(&att[..sa], 0.25).unwrap().total;
        let a2 = attachment_rate(&att[sa..], 0.25).unwrap().total;
        prop_assert!(rel_close(a, a1 + a2, 1e-12));
        let h = handover_rate(&hand, 0.4).unwrap().total;
        let h1 = handover_rate(&hand[..sh], 0.4).unwrap().total;
        let h2 = handover_rate(&hand[sh..], 0.4).unwrap().total;
        prop_assert!(rel_close(h, h1 + h2, 1e-12));
    }

    #[test]
    fn handover_rate_scales_inversely_with_site_distance(hand in props::handover_inputs(), l in 0.05f64..5.0) {
        props::handover_inverse_distance(&hand, l)?;
    }

    #[test]
    fn attachment_rate_does_not_depend_on_the_reference_interval(
        att in props::attachment_inputs(), t_r_min in prop::collection::vec(0.01f64..10.0, 4),
    ) {
        let oracle: f64 = att.iter().map(|i| i.density / i.inter_request).sum();
        for t in t_r_min {
            prop_assert!(rel_close(attachment_rate(&att, t).unwrap().total, oracle, 1e-12));
        }
    }
}

// ---------------------------------------------------------------------------
// Capacity

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn crossing_year_is_monotone_in_the_multiplier(
        growth in prop::collection::vec(0.0f64..0.5, 12), base in 1.0f64..1e6, m1 in 1.0f64..20.0, m2 in 1.0f64..20.0,
    ) {
        let mut peaks = BTreeMap::new();
        let mut v = base;
        peaks.insert(2019, v);
        for (i, g) in growth.iter().enumerate() {
            v *= 1.0 + g;
            peaks.insert(2020 + i as i32, v);
        }
        let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        let y_lo = capacity_crossing_year(&peaks, 2019, lo).unwrap();
        let y_hi = capacity_crossing_year(&peaks, 2019, hi).unwrap();
        match (y_lo, y_hi) {
            (Some(a), Some(b)) => prop_assert!(a <= b),
            (None, Some(_)) => prop_assert!(false, "lower multiplier never crosses"),
            _ => {}
        }
        prop_assert_eq!(capacity_crossing_year(&peaks, 2019, 1.0).unwrap(), Some(2019));
    }
}

//! Property checks shared by the property tests and the acceptance run.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::*;
use urbancast::cli_io::csv_io::forecast_rows;
use urbancast::control_needs::{attachment_rate, handover_rate, AttachmentInput, HandoverInput};
use urbancast::diffusion::{bass_fit, BassParams, PenetrationModel};
use urbancast::forecast_engine::{category_rollup, forecast, DeviceSpec, Scenario};
use urbancast::volume_models::{allocate_hourly, ActivityModel, GrowthModel, TrafficCategory};
use urbancast::{HourlyProfile, HOURS};

pub type Check = Result<(), TestCaseError>;

pub fn attachment_inputs() -> impl Strategy<Value = Vec<AttachmentInput>> {
    prop::collection::vec((0.0f64..1e4, 0.5f64..60.0), 1..8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (density, inter_request))| AttachmentInput {
                device: format!("d{i}"),
                density,
                inter_request,
            })
            .collect()
    })
}

pub fn handover_inputs() -> impl Strategy<Value = Vec<HandoverInput>> {
    prop::collection::vec((0.0f64..1e4, 0.1f64..120.0), 1..8).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (density, speed_kmh))| HandoverInput {
                device: format!("d{i}"),
                density,
                speed_kmh,
            })
            .collect()
    })
}

pub fn bass_truth() -> impl Strategy<Value = BassParams> {
    (0.005f64..0.05, 0.1f64..0.6, 0.5f64..2.0, 1995.0f64..2000.0)
        .prop_map(|(p, q, m, t0)| BassParams { p, q, m, t0 })
}

pub fn penetration_monotone(lo: &PenetrationModel, hi: &PenetrationModel) -> Check {
    for model in [lo, hi] {
        let s = model.evaluate(horizon()).unwrap();
        prop_assert!(s.values.values().all(|&v| v >= 0.0), "{:?}", s);
        prop_assert!(s.is_non_decreasing(), "{:?}", s);
    }
    Ok(())
}

pub fn penetration_bounded(lo: &PenetrationModel, hi: &PenetrationModel) -> Check {
    let l = lo.evaluate(horizon()).unwrap();
    let h = hi.evaluate(horizon()).unwrap();
    for y in horizon().iter() {
        prop_assert!(
            l.value(y) <= h.value(y) * (1.0 + 1e-12),
            "{y}: {} > {}",
            l.value(y),
            h.value(y)
        );
    }
    Ok(())
}

pub fn growth_bounded(lo: &GrowthModel, hi: &GrowthModel, year: i32) -> Check {
    prop_assert!(lo.daily_volume(year) <= hi.daily_volume(year) * (1.0 + 1e-12));
    Ok(())
}

pub fn bass_round_trip(truth: &BassParams) -> Check {
    let history: BTreeMap<i32, f64> = (truth.t0.ceil() as i32..=2025)
        .map(|y| (y, truth.value(y as f64)))
        .collect();
    let fit = bass_fit(&history).unwrap();
    let f = fit.params;
    for (got, want, name) in [
        (f.p, truth.p, "p"),
        (f.q, truth.q, "q"),
        (f.m, truth.m, "m"),
    ] {
        prop_assert!(
            ((got - want) / want).abs() <= 1e-3,
            "{name}: {got} vs {want} ({fit:?})"
        );
    }
    prop_assert!(
        (f.t0 - truth.t0).abs() <= 1e-3,
        "t0: {} vs {}",
        f.t0,
        truth.t0
    );
    Ok(())
}

pub fn allocation_conserves(volume: f64, activity: &ActivityModel, usage: &HourlyProfile) -> Check {
    let profiles = BTreeMap::from([(USAGE_PROFILE.to_string(), usage.clone())]);
    let hourly = allocate_hourly(volume, activity, &profiles).unwrap();
    prop_assert!(hourly.values().iter().all(|&v| v >= 0.0));
    prop_assert!(
        (hourly.sum() - volume).abs() <= 1e-9 * volume.max(1e-300),
        "{} vs {volume}",
        hourly.sum()
    );
    Ok(())
}

pub fn rapid_dominates(devices: &[DeviceSpec], usage: &HourlyProfile) -> Check {
    let inputs = inputs_with(devices.to_vec(), usage);
    let slow = forecast(&inputs, &Scenario::slow(), horizon()).unwrap();
    let rapid = forecast(&inputs, &Scenario::rapid(), horizon()).unwrap();
    for (s, r) in slow.devices.iter().zip(&rapid.devices) {
        for (ds, dr) in s.density.iter().zip(&r.density) {
            for h in 0..HOURS {
                prop_assert!(ds[h] <= dr[h] * (1.0 + 1e-12), "{} density", s.id);
            }
        }
        for (a, b) in s.applications.iter().zip(&r.applications) {
            for (vs, vr) in a.volume.iter().zip(&b.volume) {
                for h in 0..HOURS {
                    prop_assert!(vs[h] <= vr[h] * (1.0 + 1e-12), "{} volume", a.id);
                }
            }
        }
    }
    Ok(())
}

pub fn category_partition(devices: &[DeviceSpec], usage: &HourlyProfile) -> Check {
    let result = forecast(
        &inputs_with(devices.to_vec(), usage),
        &Scenario::rapid(),
        horizon(),
    )
    .unwrap();
    let rollup = category_rollup(&result);
    for (yi, &y) in rollup.years.iter().enumerate() {
        let mut sum = 0.0;
        for c in TrafficCategory::ALL {
            sum += rollup.totals[&c][yi];
        }
        prop_assert_eq!(sum.to_bits(), rollup.grand_totals[yi].to_bits());
        let oracle: f64 = result
            .devices
            .iter()
            .flat_map(|d| d.applications.iter())
            .map(|a| a.volume[yi].iter().sum::<f64>())
            .sum();
        prop_assert!(rel_close(oracle, rollup.grand_totals[yi], 1e-12), "{y}");
        if rollup.grand_totals[yi] > 0.0 {
            let shares: f64 = TrafficCategory::ALL
                .iter()
                .map(|c| rollup.shares[c][yi])
                .sum();
            prop_assert!((shares - 1.0).abs() <= 1e-12);
        }
    }
    Ok(())
}

pub fn reruns_identical(devices: &[DeviceSpec], usage: &HourlyProfile) -> Check {
    let inputs = inputs_with(devices.to_vec(), usage);
    let a = forecast(&inputs, &Scenario::rapid(), horizon()).unwrap();
    let b = forecast(&inputs, &Scenario::rapid(), horizon()).unwrap();
    prop_assert_eq!(forecast_rows(&a), forecast_rows(&b));
    Ok(())
}

pub fn control_homogeneous(att: &[AttachmentInput], hand: &[HandoverInput], k: f64) -> Check {
    let a = attachment_rate(att, 0.25).unwrap().total;
    let h = handover_rate(hand, 0.4).unwrap().total;
    let att_k: Vec<_> = att
        .iter()
        .map(|i| AttachmentInput {
            density: i.density * k,
            ..i.clone()
        })
        .collect();
    let hand_k: Vec<_> = hand
        .iter()
        .map(|i| HandoverInput {
            density: i.density * k,
            ..i.clone()
        })
        .collect();
    prop_assert!(rel_close(
        attachment_rate(&att_k, 0.25).unwrap().total,
        k * a,
        1e-12
    ));
    prop_assert!(rel_close(
        handover_rate(&hand_k, 0.4).unwrap().total,
        k * h,
        1e-12
    ));
    let att_2: Vec<_> = att
        .iter()
        .map(|i| AttachmentInput {
            density: i.density * 2.0,
            ..i.clone()
        })
        .collect();
    prop_assert_eq!(attachment_rate(&att_2, 0.25).unwrap().total, 2.0 * a);
    Ok(())
}

pub fn handover_inverse_distance(hand: &[HandoverInput], l: f64) -> Check {
    let base = handover_rate(hand, l).unwrap().total;
    let half = handover_rate(hand, l / 2.0).unwrap().total;
    prop_assert!(
        rel_close(half, 2.0 * base, 1e-12),
        "{half} vs {}",
        2.0 * base
    );
    let oracle: f64 = hand.iter().map(|i| i.density * i.speed_kmh / l).sum();
    prop_assert!(rel_close(base, oracle, 1e-12));
    Ok(())
}

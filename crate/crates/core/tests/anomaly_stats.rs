use std::collections::BTreeSet;

use chrono::NaiveDate;
use fuelrec_core::anomaly::{boxplot_limits, detect_anomalies, label_key};
use fuelrec_core::metrics::kruskal_wallis;
use fuelrec_core::{AnomalyConfig, AnomalyLabel, Far, FarRow, RouteType};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

// Type-7 quantile by direct position arithmetic.
fn q7(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn fence(values: &[f64], k: f64) -> (f64, f64) {
    let (a, b) = (q7(values, 0.25), q7(values, 0.75));
    (a - k * (b - a), b + k * (b - a))
}

fn oracle_labels(values: &[f64], cfg: &AnomalyConfig) -> Vec<AnomalyLabel> {
    if values.len() < cfg.min_points_per_key {
        return vec![AnomalyLabel::Inlier; values.len()];
    }
    let (lo, hi) = fence(values, cfg.data_quality_iqr_factor);
    let keep: Vec<f64> = values.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
    let (lo2, hi2) = fence(&keep, cfg.iqr_factor);
    values
        .iter()
        .map(|&v| {
            if v < lo || v > hi {
                AnomalyLabel::RemovedDataQuality
            } else if v > hi2 {
                AnomalyLabel::OutlierHigh
            } else if v < lo2 {
                AnomalyLabel::OutlierLow
            } else {
                AnomalyLabel::Inlier
            }
        })
        .collect()
}

proptest! {
    #[test]
    fn limits_match_direct_quantiles(values in prop::collection::vec(0.0f64..40.0, 1..50)) {
        let l = boxplot_limits(&values).unwrap();
        let (lo, hi) = fence(&values, 1.5);
        prop_assert!((l.lim_inf - lo).abs() < 1e-9 && (l.lim_sup - hi).abs() < 1e-9);
        prop_assert!(l.q1 <= l.q3);
    }

    #[test]
    fn two_pass_labels_match_oracle(
        values in prop::collection::vec(prop_oneof![4 => 5.0f64..10.0, 1 => 0.0f64..100.0], 1..50),
        dq in 2.0f64..8.0,
    ) {
        let cfg = AnomalyConfig { data_quality_iqr_factor: dq, ..Default::default() };
        let got = label_key(&values, &cfg).unwrap().labels;
        prop_assert_eq!(got, oracle_labels(&values, &cfg));
    }
}

#[test]
fn hand_cases() {
    let l = boxplot_limits(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((l.q1, l.q3, l.lim_inf, l.lim_sup), (1.75, 3.25, -0.5, 5.5));
    let cfg = AnomalyConfig {
        min_points_per_key: 4,
        data_quality_iqr_factor: 3.0,
        ..Default::default()
    };
    let k = label_key(&[6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 6.0, 60.0], &cfg).unwrap();
    assert_eq!(k.labels[7], AnomalyLabel::RemovedDataQuality);
    assert!(k.labels[..7].iter().all(|l| *l == AnomalyLabel::Inlier));
    let lim = k.limits.unwrap();
    assert_eq!((lim.lim_inf, lim.lim_sup), (6.0, 6.0));
}

#[test]
fn detection_is_per_key() {
    let d = |i: u32| NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Days::new(i as u64);
    let mut rows = Vec::new();
    // two keys with different levels; a value normal for one is extreme for the other
    for i in 0..20u32 {
        for (g, base) in [("small", 6.0), ("large", 30.0)] {
            let bump = if i == 19 { 14.0 } else { (i % 5) as f64 * 0.1 };
            rows.push(FarRow {
                vehicle_id: format!("{g}-v"),
                date: d(i),
                vehicle_group: g.into(),
                route_type: RouteType::Hwy,
                values: vec![],
                fuel_consumption: Some(base + bump),
                imputed: BTreeSet::new(),
            });
        }
    }
    let far = Far { features: vec![], rows };
    let (labels, table) = detect_anomalies(&far, &AnomalyConfig::default()).unwrap();
    assert_eq!(table.entries.len(), 2);
    for (r, l) in far.rows.iter().zip(&labels) {
        let expect_outlier = r.date == d(19);
        assert_eq!(*l != AnomalyLabel::Inlier, expect_outlier, "{} {}", r.vehicle_group, r.date);
    }
    assert!(detect_anomalies(&Far::default(), &AnomalyConfig::default()).is_err());
}

#[test]
fn kruskal_wallis_against_statrs_tail() {
    let k = kruskal_wallis(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
    assert!((k.h - 3.857).abs() < 1e-3);
    let tail = ChiSquared::new(1.0).unwrap().sf(k.h);
    assert!((k.p_value - tail).abs() < 1e-9);

    let same = kruskal_wallis(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]).unwrap();
    assert!(same.h.abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let k_groups = rng.random_range(2..6);
        let groups: Vec<Vec<f64>> = (0..k_groups)
            .map(|j| {
                let n = rng.random_range(3..30);
                // rounding creates ties
                (0..n).map(|_| ((rng.random::<f64>() + 0.1 * j as f64) * 20.0).round()).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
        let got = kruskal_wallis(&refs).unwrap();
        let want = ChiSquared::new((k_groups - 1) as f64).unwrap().sf(got.h);
        assert!((got.p_value - want).abs() < 1e-9, "p {} vs {want}", got.p_value);
    }
    assert!(kruskal_wallis(&[&[1.0, 2.0]]).is_err());
}

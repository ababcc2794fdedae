use std::collections::BTreeMap;

use fuelrec_core::ingest::{aggregate_daily, build_far, clean_far, CleaningConfig};
use fuelrec_core::model::{train_fuel_model, ModelMode, ModelSpec};
use fuelrec_core::stats::{grouped_spearman, std_dev};
use fuelrec_core::synth::{generate, SynthConfig, SynthFleet};
use fuelrec_core::{Far, FeatureRegistry};

fn quiet(n_vehicles: usize, n_days: usize) -> SynthConfig {
    SynthConfig {
        n_vehicles,
        n_days,
        noise_frac: 0.0,
        anomaly_rate: 0.0,
        glitch_rate: 0.0,
        missing_rate: 0.0,
        short_day_rate: 0.0,
        null_target_rate: 0.0,
        ..Default::default()
    }
}

fn ingest(fleet: &SynthFleet, cfg: &SynthConfig, registry: &FeatureRegistry) -> Far {
    let (drafts, _) = aggregate_daily(&fleet.records, registry);
    build_far(drafts, registry, &fleet.vin_table, &cfg.route_thresholds)
}

#[test]
fn noiseless_fleet_ingests_to_ground_truth() {
    let cfg = quiet(20, 30);
    let registry = FeatureRegistry::builtin();
    let fleet = generate(&cfg).unwrap();
    let far = ingest(&fleet, &cfg, &registry);
    assert_eq!(far.len(), fleet.oracle.len());
    let oracle: BTreeMap<_, _> = fleet.oracle.iter().map(|o| ((o.vehicle_id.clone(), o.date), o)).collect();
    for row in &far.rows {
        let o = oracle[&(row.vehicle_id.clone(), row.date)];
        assert_eq!(o.noise, 0.0);
        assert!(!o.anomaly);
        let fuel = row.fuel_consumption.unwrap();
        assert!((fuel - o.clean_fuel).abs() < 1e-9, "{fuel} vs {}", o.clean_fuel);
        let sum = o.base_fuel + o.group_offset + o.contributions.iter().sum::<f64>();
        assert!((o.clean_fuel - sum).abs() < 1e-9);
        assert_eq!(row.vehicle_group, o.vehicle_group);
        assert_eq!(row.route_type, o.route_type);
        for (k, f) in fleet.features.iter().enumerate() {
            if let Some(v) = far.column(f).map(|c| row.values[c]) {
                assert!((v - o.values[k]).abs() < 1e-9, "{f}: {v} vs {}", o.values[k]);
            }
        }
    }
}

#[test]
fn anomaly_count_is_binomial() {
    // 20 fleets of 10000 vehicle-days each; the pooled count is one binomial
    // draw over 200000 days and each fleet stays within a loose band.
    let per_fleet_sd = (10_000.0f64 * 0.05 * 0.95).sqrt();
    let mut total = 0.0;
    for seed in 1..=20 {
        let cfg = SynthConfig {
            seed,
            anomaly_rate: 0.05,
            ..quiet(100, 100)
        };
        let fleet = generate(&cfg).unwrap();
        assert_eq!(fleet.oracle.len(), 10_000);
        let n = fleet.oracle.iter().filter(|o| o.anomaly).count() as f64;
        assert!((n - 500.0).abs() <= 4.5 * per_fleet_sd, "seed {seed}: {n} anomalies");
        for o in fleet.oracle.iter().filter(|o| o.anomaly) {
            assert!(o.excess > 0.0);
            assert!((o.observed_fuel - (o.clean_fuel + o.noise)).abs() < 1e-9);
        }
        total += n;
    }
    let sd = (200_000.0f64 * 0.05 * 0.95).sqrt();
    assert!((total - 10_000.0).abs() <= 3.0 * sd, "{total} anomalies in 200000 days");
}

#[test]
fn same_seed_same_fleet_other_seed_differs() {
    let cfg = quiet(10, 20);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a.records, b.records);
    let c = generate(&SynthConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn low_noise_shapes_track_ground_truth() {
    let cfg = SynthConfig {
        noise_frac: 0.01,
        ..quiet(60, 60)
    };
    let registry = FeatureRegistry::builtin();
    let fleet = generate(&cfg).unwrap();
    let (far, _) = clean_far(&ingest(&fleet, &cfg, &registry), &CleaningConfig::default(), &registry).unwrap();
    let spec = ModelSpec {
        mode: ModelMode::Monotone,
        ..Default::default()
    };
    let model = train_fuel_model(&far, &registry, &spec).unwrap();
    let oracle: BTreeMap<_, _> = fleet.oracle.iter().map(|o| ((o.vehicle_id.clone(), o.date), o)).collect();
    let rows: Vec<_> = far.rows.iter().map(|r| oracle[&(r.vehicle_id.clone(), r.date)]).collect();
    let groups: Vec<&str> = rows.iter().map(|o| o.vehicle_group.as_str()).collect();
    let noise: Vec<f64> = rows.iter().map(|o| o.noise).collect();
    let noise_var = std_dev(&noise).unwrap().powi(2);
    let explanations = model.explain_far(&far).unwrap();
    let columns = model.columns();
    let mut checked = 0;
    for (k, f) in fleet.features.iter().enumerate() {
        let Some(c) = columns.iter().position(|x| x == f) else {
            continue;
        };
        let truth: Vec<f64> = rows.iter().map(|o| o.contributions[k]).collect();
        let snr = std_dev(&truth).unwrap().powi(2) / noise_var;
        if snr < 5.0 {
            continue;
        }
        let learned: Vec<f64> = explanations.iter().map(|e| e.relevance[c]).collect();
        // per-group scaling preserves ranks within a group only
        let rho = grouped_spearman(&learned, &truth, &groups).unwrap();
        assert!(rho >= 0.95, "{f}: spearman {rho} at snr {snr}");
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} features above the signal floor");
}

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fuelrec_core::anomaly::detect_anomalies;
use fuelrec_core::explain::{raw_explanations, select_explanations, ExplainConfig};
use fuelrec_core::gam::{bin_edges, GamConfig};
use fuelrec_core::ingest::{
    aggregate_daily, build_far, clean_far, compute_group_medians, impute_missing, CleaningConfig,
    MedianKeys,
};
use fuelrec_core::metrics::kruskal_wallis;
use fuelrec_core::model::{train_fuel_model, ModelMode, ModelSpec};
use fuelrec_core::synth::{generate, SynthConfig};
use fuelrec_core::{AnomalyConfig, AnomalyLabel, Far, FeatureRegistry};

fn fleet() -> (FeatureRegistry, Far) {
    let cfg = SynthConfig {
        n_vehicles: 60,
        n_days: 120,
        ..Default::default()
    };
    let registry = FeatureRegistry::builtin();
    let f = generate(&cfg).expect("synthetic fleet");
    let (drafts, _) = aggregate_daily(&f.records, &registry);
    let far = build_far(drafts, &registry, &f.vin_table, &cfg.route_thresholds);
    let (far, _) = clean_far(&far, &CleaningConfig::default(), &registry).expect("cleaning");
    let medians = compute_group_medians(&far, None, MedianKeys::Group).expect("medians");
    (registry, impute_missing(&far, &medians).0)
}

fn spec(mode: ModelMode) -> ModelSpec {
    ModelSpec {
        mode,
        gam: GamConfig {
            rounds: 100,
            early_stopping: None,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn benches(c: &mut Criterion) {
    let (registry, far) = fleet();

    let col: Vec<f64> = far.observed(0);
    c.bench_function("bin_edges_256", |b| b.iter(|| bin_edges(black_box(&col), 256)));

    let cfg = AnomalyConfig::default();
    c.bench_function("detect_anomalies", |b| b.iter(|| detect_anomalies(black_box(&far), &cfg).unwrap()));

    let mut g = c.benchmark_group("train_100_rounds");
    g.sample_size(10);
    for mode in ModelMode::ALL {
        let s = spec(mode);
        g.bench_function(mode.as_str(), |b| b.iter(|| train_fuel_model(black_box(&far), &registry, &s).unwrap()));
    }
    g.finish();

    let model = train_fuel_model(&far, &registry, &spec(ModelMode::Monotone)).unwrap();
    let (labels, _) = detect_anomalies(&far, &cfg).unwrap();
    let inliers: Vec<bool> = labels.iter().map(|l| *l == AnomalyLabel::Inlier).collect();
    let medians = compute_group_medians(&far, Some(&inliers), MedianKeys::GroupRoute).unwrap();
    c.bench_function("raw_explanations", |b| {
        b.iter(|| raw_explanations(&model, black_box(&far), &labels).unwrap())
    });
    let raw = raw_explanations(&model, &far, &labels).unwrap();
    let ecfg = ExplainConfig::default();
    c.bench_function("select_explanations", |b| {
        b.iter(|| select_explanations(black_box(&raw), &medians, &registry, &ecfg))
    });

    let groups: Vec<Vec<f64>> = (0..3)
        .map(|j| (0..500).map(|i| ((i * 7919 + j * 31) % 1000) as f64).collect())
        .collect();
    let refs: Vec<&[f64]> = groups.iter().map(Vec::as_slice).collect();
    c.bench_function("kruskal_wallis_3x500", |b| b.iter(|| kruskal_wallis(black_box(&refs)).unwrap()));
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);

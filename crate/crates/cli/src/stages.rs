//! The pipeline commands. Each reads its inputs from the output directory,
//! computes, and commits all of its outputs at once.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};

use chrono::NaiveDate;
use fuelrec_core::anomaly::{detect_anomalies, write_labels_csv};
use fuelrec_core::explain::{raw_explanations, select_explanations, write_explanations_csv};
use fuelrec_core::ingest::{
    aggregate_daily, build_far, clean_far, compute_group_medians, impute_missing, parse_raw, write_raw,
    MedianKeys,
};
use fuelrec_core::metrics::{
    adj_r2, catalog_checks, contrast_table, contrastiveness, mape, mape_by_vehicle, per_below,
    per_below_single, per_mon, r2, representativeness, stability_error, write_contrast_csv, xai_mape,
    ContrastRow, MetricsReport,
};
use fuelrec_core::model::{train_fuel_model, FuelModel, ModelMode};
use fuelrec_core::recommend::{
    day_kms, fleet_manager_view, get_recom, get_summ_recom, write_fleet_csv, write_group_recommendations_csv,
    write_recommendations_csv,
};
use fuelrec_core::split::split_far;
use fuelrec_core::stats::{grouped_spearman, mean, std_dev};
use fuelrec_core::synth::{generate, read_oracle_csv, write_oracle_csv, OracleDay};
use fuelrec_core::{AnomalyLabel, Far};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::workspace::{self as ws, Workspace};

fn modes_or_all(cfg: &PipelineConfig, only: Option<ModelMode>) -> Vec<ModelMode> {
    only.map_or_else(|| cfg.model_modes.clone(), |m| vec![m])
}

/// Generates the synthetic fleet: raw telemetry, oracle, VIN table, catalog.
pub fn synth(cfg: &PipelineConfig) -> CliResult<()> {
    let w = Workspace::new(cfg);
    let scfg = cfg.synth.clone().unwrap_or_default();
    let fleet = generate(&scfg)?;
    log::info!(
        "synthetic fleet: {} vehicle-days, {} raw records, {} injected anomalies",
        fleet.oracle.len(),
        fleet.records.len(),
        fleet.oracle.iter().filter(|d| d.anomaly).count()
    );
    let mut s = w.stage();
    s.add(w.path(ws::RAW), |b| write_raw(&fleet.records, b))?;
    s.add(w.path(ws::ORACLE), |b| write_oracle_csv(&fleet.features, &fleet.oracle, b))?;
    s.add(w.path(ws::VIN_TABLE), |b| fleet.vin_table.write_csv(b))?;
    s.add(w.path(ws::CATALOG), |b| fleet.catalog.write_csv(b))?;
    s.commit()?;
    Ok(())
}

fn report_line(b: &mut Vec<u8>, item: &str, value: impl std::fmt::Display) -> fuelrec_core::Result<()> {
    writeln!(b, "{item},{value}")?;
    Ok(())
}

/// Raw telemetry to the cleaned, imputed FAR with its train/test split.
pub fn ingest(cfg: &PipelineConfig) -> CliResult<()> {
    let w = Workspace::new(cfg);
    let registry = w.registry()?;
    let vin = w.vin_table()?;
    let input = w.input_path()?;
    let file = File::open(&input).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let parsed = parse_raw(BufReader::new(file))?;
    let (drafts, agg) = aggregate_daily(&parsed.records, &registry);
    let far0 = build_far(drafts, &registry, &vin, &cfg.route_thresholds());
    if far0.is_empty() {
        return Err(CliError::Data(format!("{} holds no usable records", input.display())));
    }
    let kms = day_kms(&far0);
    let (clean, clean_report) = clean_far(&far0, &cfg.cleaning(), &registry)?;
    let split = split_far(&clean, &cfg.split())?;
    if split.train.is_empty() {
        return Err(CliError::Data("no training rows after the split".into()));
    }
    let medians = compute_group_medians(&clean.subset(&split.train), None, MedianKeys::Group)?;
    let (far, imputed) = impute_missing(&clean, &medians);
    log::info!(
        "ingest: {} records, {} days, {} after cleaning, {} features, {} imputed values",
        agg.records,
        far0.len(),
        far.len(),
        far.features.len(),
        imputed.imputed_values
    );

    let mut s = w.stage();
    s.add(w.path(ws::FAR), |b| far.write_csv(b))?;
    s.add(w.path(ws::FAR_IMPUTED), |b| far.write_mask_csv(b))?;
    s.add(w.path(ws::DAY_KMS), |b| ws::write_day_kms(&kms, b))?;
    s.add(w.path(ws::SPLIT), |b| ws::write_split(&far, &split, b))?;
    s.add(w.path(ws::MEDIANS_IMPUTE), |b| medians.write_csv(b))?;
    s.add(w.path(ws::INGEST_REPORT), |b| {
        writeln!(b, "item,value")?;
        report_line(b, "raw_records", agg.records)?;
        report_line(b, "malformed_lines", parsed.malformed)?;
        report_line(b, "non_numeric_values", agg.non_numeric)?;
        for (v, n) in &agg.ignored {
            report_line(b, &format!("ignored_variable:{v}"), n)?;
        }
        report_line(b, "vehicle_days", clean_report.input_rows)?;
        report_line(b, "dropped_null_target", clean_report.dropped_null_target)?;
        report_line(b, "dropped_short_days", clean_report.dropped_short_days)?;
        report_line(b, "rows", clean_report.output_rows)?;
        for (f, reason) in &clean_report.excluded {
            report_line(b, &format!("excluded_feature:{f}"), format!("{reason:?}").to_lowercase())?;
        }
        for (a, c, r) in &clean_report.correlated_pairs {
            report_line(b, &format!("correlated:{a}:{c}"), r)?;
        }
        report_line(b, "imputed_values", imputed.imputed_values)?;
        report_line(b, "imputed_global_fallbacks", imputed.global_fallbacks)?;
        report_line(b, "unresolved_missing", imputed.unresolved)?;
        report_line(b, "train_rows", split.train.len())?;
        report_line(b, "test_rows", split.test.len())
    })?;
    s.commit()?;
    Ok(())
}

/// Two-pass box-plot labels, per-key limits and inlier medians.
pub fn detect(cfg: &PipelineConfig) -> CliResult<()> {
    let w = Workspace::new(cfg);
    let far = w.far()?;
    let split = w.split(&far)?;
    let (labels, limits) = detect_anomalies(&far, &cfg.anomaly())?;
    let mut inlier_train = vec![false; far.len()];
    for &i in &split.train {
        inlier_train[i] = labels[i] == AnomalyLabel::Inlier;
    }
    let medians = compute_group_medians(&far, Some(&inlier_train), MedianKeys::GroupRoute)?;
    let count = |l: AnomalyLabel| labels.iter().filter(|x| **x == l).count();
    log::info!(
        "detect: {} outlier_high, {} outlier_low, {} removed_data_quality of {}",
        count(AnomalyLabel::OutlierHigh),
        count(AnomalyLabel::OutlierLow),
        count(AnomalyLabel::RemovedDataQuality),
        far.len()
    );
    let mut s = w.stage();
    s.add(w.path(ws::LABELS), |b| write_labels_csv(&far, &labels, b))?;
    s.add(w.path(ws::LIMITS), |b| limits.write_csv(b))?;
    s.add(w.path(ws::MEDIANS_INLIER), |b| medians.write_csv(b))?;
    s.commit()?;
    Ok(())
}

/// Rows of `idx` that passed the data-quality pass.
fn usable(idx: &[usize], labels: &[AnomalyLabel]) -> Vec<usize> {
    idx.iter()
        .copied()
        .filter(|&i| labels[i] != AnomalyLabel::RemovedDataQuality)
        .collect()
}

/// Predictions and targets of the given rows.
fn predictions(model: &FuelModel, far: &Far, idx: &[usize]) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let sub = far.subset(idx);
    let pred = model.predict_far(&sub)?;
    let real = sub.rows.iter().map(|r| r.fuel()).collect();
    Ok((pred, real))
}

fn performance(report: &mut MetricsReport, mode: &str, dataset: &str, model: &FuelModel, far: &Far, idx: &[usize]) -> CliResult<()> {
    if idx.is_empty() {
        return Ok(());
    }
    let (pred, real) = predictions(model, far, idx)?;
    let p = model.columns().len();
    report.push(mode, dataset, "n_rows", "all", idx.len() as f64);
    report.push(mode, dataset, "mape", "all", mape(&pred, &real)?);
    report.push(mode, dataset, "r2", "all", r2(&pred, &real)?);
    if idx.len() > p + 1 {
        report.push(mode, dataset, "adj_r2", "all", adj_r2(&pred, &real, p)?);
    }
    let vehicles: Vec<&str> = idx.iter().map(|&i| far.rows[i].vehicle_id.as_str()).collect();
    report.push(mode, dataset, "mape_by_vehicle", "all", mape_by_vehicle(&pred, &real, &vehicles)?);
    Ok(())
}

/// Trains each configured mode on the usable training rows.
pub fn train(cfg: &PipelineConfig, only: Option<ModelMode>) -> CliResult<()> {
    let w = Workspace::new(cfg);
    let registry = w.registry()?;
    let far = w.far()?;
    let split = w.split(&far)?;
    let labels = w.labels(&far)?;
    let train_idx = usable(&split.train, &labels);
    let test_idx = usable(&split.test, &labels);
    let train_far = far.subset(&train_idx);
    let mut s = w.stage();
    for mode in modes_or_all(cfg, only) {
        let model = train_fuel_model(&train_far, &registry, &cfg.model_spec(mode))?;
        let mut report = MetricsReport::default();
        performance(&mut report, mode.as_str(), "train", &model, &far, &train_idx)?;
        performance(&mut report, mode.as_str(), "test", &model, &far, &test_idx)?;
        log::info!(
            "train {mode}: test mape {:.4}, adj_r2 {:.4}",
            report.get(mode.as_str(), "test", "mape", "all").unwrap_or(f64::NAN),
            report.get(mode.as_str(), "test", "adj_r2", "all").unwrap_or(f64::NAN)
        );
        s.add(w.path(&ws::model_file(mode)), |b| model.write(b, None))?;
        s.add(w.path(&ws::model_metrics_file(mode)), |b| report.write_csv(b))?;
    }
    s.commit()?;
    Ok(())
}

/// Explanations of every outlier_high day, before and after pruning.
pub fn explain(cfg: &PipelineConfig, only: Option<ModelMode>) -> CliResult<()> {
    let w = Workspace::new(cfg);
    let registry = w.registry()?;
    let far = w.far()?;
    let labels = w.labels(&far)?;
    let medians = w.inlier_medians()?;
    let mut s = w.stage();
    for mode in modes_or_all(cfg, only) {
        let model = w.model(mode, &registry)?;
        let raw = raw_explanations(&model, &far, &labels)?;
        let (kept, trace) = select_explanations(&raw, &medians, &registry, &cfg.explain());
        log::info!("explain {mode}: {} raw rows, {} retained", raw.len(), kept.len());
        s.add(w.path(&ws::mode_file(mode, "explanations_raw.csv")), |b| write_explanations_csv(&raw, b))?;
        s.add(w.path(&ws::mode_file(mode, "explanations.csv")), |b| write_explanations_csv(&kept, b))?;
        s.add(w.path(&ws::mode_file(mode, "rule_trace.csv")), |b| trace.write_csv(b))?;
    }
    s.commit()?;
    Ok(())
}

/// Daily, operator and fleet-manager recommendations.
pub fn recommend(cfg: &PipelineConfig, only: Option<ModelMode>) -> CliResult<()> {
    let w = Workspace::new(cfg);
    let registry = w.registry()?;
    let far = w.far()?;
    let kms = w.day_kms()?;
    let limits = w.limits()?;
    let medians = w.inlier_medians()?;
    let mut s = w.stage();
    for mode in modes_or_all(cfg, only) {
        let model = w.model(mode, &registry)?;
        let expl = w.explanations(mode, "explanations.csv")?;
        let (rows, groups) = get_recom(&expl, &model, &medians, &registry, &limits)?;
        let summary = get_summ_recom(&expl, &far, &kms, &model, &medians, &registry, &limits, &cfg.summary())?;
        let fleet = fleet_manager_view(&far, &kms, &model, &medians, &registry)?;
        log::info!(
            "recommend {mode}: {} daily rows, {} days, {} operator rows",
            rows.len(),
            groups.len(),
            summary.rows.len()
        );
        s.add(w.path(&ws::mode_file(mode, "recommendations.csv")), |b| write_recommendations_csv(&rows, b))?;
        s.add(w.path(&ws::mode_file(mode, "group_recommendations.csv")), |b| {
            write_group_recommendations_csv(&groups, b)
        })?;
        s.add(w.path(&ws::mode_file(mode, "summary.csv")), |b| summary.write_rows_csv(b))?;
        s.add(w.path(&ws::mode_file(mode, "summary_aggregate.csv")), |b| summary.write_aggregates_csv(b))?;
        s.add(w.path(&ws::mode_file(mode, "fleet.csv")), |b| write_fleet_csv(&fleet, b))?;
    }
    s.commit()?;
    Ok(())
}

/// Everything `evaluate` computed, also written to the metrics and contrast files.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub contrast: Vec<ContrastRow>,
}

fn push_mean(report: &mut MetricsReport, mode: &str, dataset: &str, metric: &str, values: &[f64]) {
    if let Some(m) = mean(values) {
        report.push(mode, dataset, metric, "all", m);
    }
}

fn detection_scores(report: &mut MetricsReport, far: &Far, labels: &[AnomalyLabel], oracle: &BTreeMap<(String, NaiveDate), OracleDay>) {
    let (mut tp, mut flagged, mut injected) = (0usize, 0usize, 0usize);
    for (r, l) in far.rows.iter().zip(labels) {
        let Some(o) = oracle.get(&(r.vehicle_id.clone(), r.date)) else {
            continue;
        };
        let hit = *l == AnomalyLabel::OutlierHigh;
        injected += usize::from(o.anomaly);
        flagged += usize::from(hit);
        tp += usize::from(hit && o.anomaly);
    }
    report.push("*", "all", "injected_anomalies", "all", injected as f64);
    report.push("*", "all", "flagged_outlier_high", "all", flagged as f64);
    if injected > 0 {
        report.push("*", "all", "detection_recall", "all", tp as f64 / injected as f64);
    }
    if flagged > 0 {
        report.push("*", "all", "detection_precision", "all", tp as f64 / flagged as f64);
    }
}

/// Spearman correlation of each learned contribution with the true one on
/// the test rows, with the feature's signal-to-noise variance ratio. The
/// correlation is taken within vehicle groups since true effects may be
/// scaled per group, which an additive model cannot express.
fn shape_fidelity(
    report: &mut MetricsReport,
    mode: &str,
    model: &FuelModel,
    far: &Far,
    idx: &[usize],
    oracle_features: &[String],
    oracle: &BTreeMap<(String, NaiveDate), OracleDay>,
) -> CliResult<()> {
    let columns = model.columns();
    let rows: Vec<(usize, &OracleDay)> = idx
        .iter()
        .filter_map(|&i| oracle.get(&(far.rows[i].vehicle_id.clone(), far.rows[i].date)).map(|o| (i, o)))
        .filter(|(_, o)| !o.anomaly && !o.glitch)
        .collect();
    if rows.len() < 3 {
        return Ok(());
    }
    let explanations = rows
        .iter()
        .map(|(i, _)| model.explain_row(far, &far.rows[*i]))
        .collect::<fuelrec_core::Result<Vec<_>>>()?;
    let groups: Vec<&str> = rows.iter().map(|(_, o)| o.vehicle_group.as_str()).collect();
    let noise: Vec<f64> = rows.iter().map(|(_, o)| o.noise).collect();
    let noise_var = std_dev(&noise).unwrap_or(0.0).powi(2);
    for (k, f) in oracle_features.iter().enumerate() {
        let Some(c) = columns.iter().position(|x| x == f) else {
            continue;
        };
        let truth: Vec<f64> = rows.iter().map(|(_, o)| o.contributions[k]).collect();
        let learned: Vec<f64> = explanations.iter().map(|e| e.relevance[c]).collect();
        if let Some(rho) = grouped_spearman(&learned, &truth, &groups) {
            report.push(mode, "test", "shape_spearman", f, rho);
        }
        if noise_var > 0.0 {
            let sv = std_dev(&truth).unwrap_or(0.0).powi(2);
            report.push(mode, "test", "shape_snr", f, sv / noise_var);
        }
    }
    Ok(())
}

/// Model accuracy, explanation-quality metrics, catalog checks, detection
/// scores against an oracle when one is available, and rank tests between
/// modes.
pub fn evaluate(cfg: &PipelineConfig) -> CliResult<Evaluation> {
    let w = Workspace::new(cfg);
    let registry = w.registry()?;
    let far = w.far()?;
    let split = w.split(&far)?;
    let labels = w.labels(&far)?;
    let limits = w.limits()?;
    let medians = w.inlier_medians()?;
    let catalog = w.catalog()?;
    let oracle = match w.oracle_path() {
        Some(p) => {
            let f = File::open(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let (features, days) = read_oracle_csv(BufReader::new(f))?;
            let map: BTreeMap<(String, NaiveDate), OracleDay> =
                days.into_iter().map(|d| ((d.vehicle_id.clone(), d.date), d)).collect();
            Some((features, map))
        }
        None => None,
    };
    let index = far.index();
    let train_idx = usable(&split.train, &labels);
    let test_idx = usable(&split.test, &labels);

    let mut report = MetricsReport::default();
    if let Some((_, o)) = &oracle {
        detection_scores(&mut report, &far, &labels, o);
    }
    let mut samples: BTreeMap<&str, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for mode in &cfg.model_modes {
        let m = mode.as_str();
        let model = w.model(*mode, &registry)?;
        performance(&mut report, m, "train", &model, &far, &train_idx)?;
        performance(&mut report, m, "test", &model, &far, &test_idx)?;
        let (pred, real) = predictions(&model, &far, &test_idx)?;
        samples
            .entry("test_ape")
            .or_default()
            .insert(m.to_string(), pred.iter().zip(&real).map(|(p, r)| (p - r).abs() / r).collect());
        if let Some((features, o)) = &oracle {
            shape_fidelity(&mut report, m, &model, &far, &test_idx, features, o)?;
        }

        let raw = w.explanations(*mode, "explanations_raw.csv")?;
        let kept = w.explanations(*mode, "explanations.csv")?;
        let days = representativeness(&raw, &kept);
        report.push(m, "explained", "n_days", "all", days.len() as f64);
        let col = |f: fn(&fuelrec_core::metrics::DayExplanation) -> f64| days.iter().map(f).collect::<Vec<f64>>();
        push_mean(&mut report, m, "explained", "n_features", &col(|d| d.n_features as f64));
        push_mean(&mut report, m, "explained", "rel_importance", &col(|d| d.rel_importance));
        push_mean(&mut report, m, "explained", "feature_share", &col(|d| d.feature_share));
        let per_vehicle: Vec<f64> = xai_mape(&days).into_values().collect();
        push_mean(&mut report, m, "explained", "xai_mape", &per_vehicle);
        let xai_ape = col(|d| (d.y_explained - d.y_real).abs() / d.y_real);
        samples.entry("xai_ape").or_default().insert(m.to_string(), xai_ape);
        samples.entry("rel_importance").or_default().insert(m.to_string(), col(|d| d.rel_importance));

        let (rec_rows, groups) = get_recom(&kept, &model, &medians, &registry, &limits)?;
        let contrast = contrastiveness(&days, &groups);
        let per_var: Vec<f64> = contrast.iter().map(|c| c.per_var).collect();
        push_mean(&mut report, m, "explained", "per_var", &per_var);
        samples.entry("per_var").or_default().insert(m.to_string(), per_var);
        if !contrast.is_empty() {
            let below = contrast.iter().filter(|c| c.below).count() as f64 / contrast.len() as f64;
            report.push(m, "explained", "per_below", "all", below);
        }
        for (g, v) in per_below(&contrast) {
            report.push(m, "explained", "per_below", &format!("group:{g}"), v);
        }
        for (g, v) in per_below_single(&days, &rec_rows) {
            report.push(m, "explained", "per_below_single", &format!("group:{g}"), v);
        }
        for (f, pm) in per_mon(&raw, &registry, cfg.monotonic_mode) {
            report.push(m, "explained", "per_mon", &f, pm.value);
        }
        if let Some(cat) = &catalog {
            let c = catalog_checks(&contrast, cat, cfg.catalog_offset);
            report.push(m, "explained", "mape_vs_catalog", "all", c.mape_vs_catalog);
            report.push(m, "explained", "pct_below_catalog", "all", c.pct_below_catalog);
            report.push(m, "explained", "catalog_missing", "all", c.n_missing as f64);
        }

        let rows: Vec<usize> = days
            .iter()
            .filter_map(|d| index.get(&(d.vehicle_id.clone(), d.date)).copied())
            .collect();
        if rows.len() >= 2 {
            let x = rows
                .iter()
                .map(|&i| model.layout.encode_row(&far, &far.rows[i]))
                .collect::<fuelrec_core::Result<Vec<_>>>()?;
            let f = col(|d| d.y_explained);
            let targets: Vec<usize> = (0..rows.len()).collect();
            let points = stability_error(&x, &f, &targets)?;
            push_mean(&mut report, m, "explained", "stability_error", &points.iter().map(|p| p.value).collect::<Vec<_>>());
            push_mean(&mut report, m, "explained", "stability_h", &points.iter().map(|p| p.h).collect::<Vec<_>>());
        }
    }

    let mut contrast = Vec::new();
    if cfg.model_modes.len() > 1 {
        for (metric, by_mode) in &samples {
            contrast.extend(contrast_table(metric, by_mode)?);
        }
    }
    let mut s = w.stage();
    s.add(w.path(ws::METRICS), |b| report.write_csv(b))?;
    s.add(w.path(ws::CONTRAST), |b| write_contrast_csv(&contrast, b))?;
    s.commit()?;
    Ok(Evaluation { report, contrast })
}

/// The whole pipeline in order; starts with `synth` when the config has a
/// synthetic-fleet section.
pub fn run_all(cfg: &PipelineConfig) -> CliResult<Evaluation> {
    if cfg.synth.is_some() {
        synth(cfg)?;
    }
    ingest(cfg)?;
    detect(cfg)?;
    train(cfg, None)?;
    explain(cfg, None)?;
    recommend(cfg, None)?;
    evaluate(cfg)
}

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use fuelrec_cli::workspace::Workspace;
use fuelrec_cli::{run_all, PipelineConfig};
use fuelrec_core::anomaly::{boxplot_limits, detect_anomalies, AnomalyConfig};
use fuelrec_core::explain::{filter_monotonic, monotonic_pairs, ExplanationRow, MonotonicMode};
use fuelrec_core::gam::GamModel;
use fuelrec_core::metrics::kruskal_wallis;
use fuelrec_core::model::{FittedModel, FuelModel, ModelMode};
use fuelrec_core::recommend::get_recom;
use fuelrec_core::synth::SynthConfig;
use fuelrec_core::{AnomalyLabel, Far, FarRow, FeatureRegistry, RouteType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn check(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

// ---------- box-plot oracle ----------

fn insertion_sorted(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for &x in v {
        let pos = out.iter().position(|&y| y > x).unwrap_or(out.len());
        out.insert(pos, x);
    }
    out
}

fn oracle_quantile(v: &[f64], p: f64) -> f64 {
    let s = insertion_sorted(v);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= s.len() {
        s[lo]
    } else {
        (1.0 - frac) * s[lo] + frac * s[lo + 1]
    }
}

fn oracle_fences(v: &[f64], k: f64) -> (f64, f64) {
    let q1 = oracle_quantile(v, 0.25);
    let q3 = oracle_quantile(v, 0.75);
    (q1 - k * (q3 - q1), q3 + k * (q3 - q1))
}

/// Two passes over one key: drop values outside the wide data-quality fence,
/// then fence the survivors.
fn oracle_labels(v: &[f64], cfg: &AnomalyConfig) -> (Vec<AnomalyLabel>, (f64, f64)) {
    if v.len() < cfg.min_points_per_key {
        return (vec![AnomalyLabel::Inlier; v.len()], oracle_fences(v, cfg.iqr_factor));
    }
    let (dq_lo, dq_hi) = oracle_fences(v, cfg.data_quality_iqr_factor);
    let kept: Vec<f64> = v.iter().copied().filter(|&x| x >= dq_lo && x <= dq_hi).collect();
    let (lo, hi) = oracle_fences(&kept, cfg.iqr_factor);
    let labels = v
        .iter()
        .map(|&x| {
            if x < dq_lo || x > dq_hi {
                AnomalyLabel::RemovedDataQuality
            } else if x > hi {
                AnomalyLabel::OutlierHigh
            } else if x < lo {
                AnomalyLabel::OutlierLow
            } else {
                AnomalyLabel::Inlier
            }
        })
        .collect();
    (labels, (lo, hi))
}

fn far_of(keys: &[(&str, RouteType, Vec<f64>)]) -> Far {
    let mut rows = Vec::new();
    for (g, r, vals) in keys {
        for (i, &v) in vals.iter().enumerate() {
            rows.push(FarRow {
                vehicle_id: format!("{g}-{r}-{i}"),
                date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Duration::days(i as i64),
                vehicle_group: g.to_string(),
                route_type: *r,
                values: vec![],
                fuel_consumption: Some(v),
                imputed: Default::default(),
            });
        }
    }
    Far { features: vec![], rows }
}

/// Values on a quarter grid so every quantile is exact in any formula, with
/// occasional far outliers and many ties.
fn grid_array(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(1..=50);
    (0..n)
        .map(|_| {
            let base = rng.random_range(0..80) as f64 * 0.25;
            match rng.random_range(0..20) {
                0 => base + 60.0,
                1 => base + 500.0,
                2 => base - 40.0,
                _ => base,
            }
        })
        .collect()
}

fn boxplot_oracle(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = AnomalyConfig::default();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let v = grid_array(&mut rng);
        let lim = boxplot_limits(&v).unwrap();
        let (lo, hi) = oracle_fences(&v, 1.5);
        if lim.lim_inf != lo || lim.lim_sup != hi {
            mismatches += 1;
        }
        let far = far_of(&[("g", RouteType::City, v.clone())]);
        let (labels, table) = detect_anomalies(&far, &cfg).unwrap();
        let (want, (wlo, whi)) = oracle_labels(&v, &cfg);
        let got = table.get("g", RouteType::City).unwrap().limits;
        if labels != want || got.lim_inf != wlo || got.lim_sup != whi {
            mismatches += 1;
        }
    }
    out.check(
        "1a",
        "boxplot_limits and detect_anomalies equal the brute-force two-pass oracle (1000 arrays)",
        mismatches == 0,
        format!("{mismatches} mismatches"),
    );
}

// ---------- monotonicity filter oracle ----------

/// Repeatedly removes every pair whose relevance breaks the order against
/// the pair before it, until nothing changes.
fn oracle_monotonic(pairs: &[(f64, f64)], decreasing: bool) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = Vec::new();
    for &p in pairs {
        if !v.contains(&p) {
            v.push(p);
        }
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    loop {
        let bad: Vec<usize> = (1..v.len())
            .filter(|&i| {
                if decreasing {
                    v[i].1 > v[i - 1].1
                } else {
                    v[i].1 < v[i - 1].1
                }
            })
            .collect();
        if bad.is_empty() {
            return v;
        }
        for &i in bad.iter().rev() {
            v.remove(i);
        }
    }
}

fn expl_row(feature: &str, i: usize, value: f64, relevance: f64) -> ExplanationRow {
    ExplanationRow {
        vehicle_id: format!("v{i}"),
        date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        vehicle_group: "g".into(),
        route_type: RouteType::Hwy,
        feature: feature.into(),
        feature_value: value,
        relevance,
        y_pred: 10.0,
        y_real: 12.0,
        intercept: 5.0,
    }
}

fn monotonic_oracle(out: &mut Outcome) {
    let registry = FeatureRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mismatches = 0;
    let mut not_fixed = 0;
    for k in 0..500 {
        let n = rng.random_range(0..=20);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0..8) as f64, rng.random_range(-4..5) as f64 * 0.5))
            .collect();
        // Alternate a positive-direction and a negative-direction feature.
        let (feature, decreasing) = if k % 2 == 0 { ("harsh_brakes_events", false) } else { ("height", true) };
        let want = oracle_monotonic(&pairs, decreasing);
        if monotonic_pairs(&pairs, decreasing) != want {
            mismatches += 1;
        }
        if monotonic_pairs(&want, decreasing) != want {
            not_fixed += 1;
        }
        let rows: Vec<ExplanationRow> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(v, r))| expl_row(feature, i, v, r))
            .collect();
        let (kept, _) = filter_monotonic(&rows, &registry, MonotonicMode::ByDirection);
        let expected: Vec<&ExplanationRow> = rows
            .iter()
            .filter(|r| want.contains(&(r.feature_value, r.relevance)))
            .collect();
        if kept.iter().collect::<Vec<_>>() != expected {
            mismatches += 1;
        }
        let (again, _) = filter_monotonic(&kept, &registry, MonotonicMode::ByDirection);
        if again != kept {
            not_fixed += 1;
        }
    }
    out.check(
        "1b",
        "filter_monotonic is a fixed point and equals the re-implementation (500 pair sets)",
        mismatches == 0 && not_fixed == 0,
        format!("{mismatches} mismatches, {not_fixed} non-fixed outputs"),
    );
}

// ---------- additivity ----------

/// Shape value by scanning the bin edges directly.
fn scan_shape(edges: &[f64], values: &[f64], x: f64) -> f64 {
    let mut bin = 0;
    for &e in &edges[1..values.len()] {
        if e <= x {
            bin += 1;
        }
    }
    values[bin]
}

fn scan_gam(m: &GamModel, x: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    for (s, &v) in m.shapes.iter().zip(x) {
        sum += scan_shape(&s.bin_edges, &s.bin_values, v);
    }
    (m.intercept, sum)
}

fn random_far(model: &FuelModel, far: &Far, rng: &mut ChaCha8Rng, n: usize) -> Far {
    let ranges: Vec<(f64, f64)> = (0..far.features.len())
        .map(|c| {
            let col = far.observed(c);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.1 * (hi - lo).max(1.0);
            (lo - pad, hi + pad)
        })
        .collect();
    let groups: Vec<String> = model
        .layout
        .one_hot
        .iter()
        .find(|b| b.categorical == "vehicle_group")
        .map(|b| b.levels.clone())
        .unwrap_or_default();
    let rows = (0..n)
        .map(|i| FarRow {
            vehicle_id: format!("r{i}"),
            date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            vehicle_group: groups[rng.random_range(0..groups.len())].clone(),
            route_type: RouteType::ALL[rng.random_range(0..3)],
            values: ranges.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect(),
            fuel_consumption: Some(1.0),
            imputed: Default::default(),
        })
        .collect();
    Far {
        features: far.features.clone(),
        rows,
    }
}

fn additivity(out: &mut Outcome, models: &BTreeMap<ModelMode, FuelModel>, far: &Far) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for model in models.values() {
        let rand_far = random_far(model, far, &mut rng, 10_000);
        let pred = model.predict_far(&rand_far).unwrap();
        let explained = model.explain_far(&rand_far).unwrap();
        for ((row, p), e) in rand_far.rows.iter().zip(&pred).zip(&explained) {
            let x = model.layout.encode_row(&rand_far, row).unwrap();
            let (b0, mut sum) = scan_gam(model.base(), &x);
            let mut intercept = b0;
            if let FittedModel::EbmVar(m) = &model.model {
                if let Some(err) = m.error_models.get(&row.vehicle_group) {
                    let (i1, s1) = scan_gam(err, &x);
                    intercept += i1;
                    sum += s1;
                }
            }
            worst = worst
                .max((p - (intercept + sum)).abs())
                .max((p - (e.intercept + e.relevance.iter().sum::<f64>())).abs());
        }
    }
    out.check(
        "1c",
        "prediction equals intercept plus contributions on 10^4 random rows, all modes",
        worst <= 1e-12,
        format!("max |difference| {worst:.3e} over {} modes", models.len()),
    );
}

// ---------- recommendation identity ----------

fn recommendation_identity(out: &mut Outcome, cfg: &PipelineConfig, models: &BTreeMap<ModelMode, FuelModel>) {
    let w = Workspace::new(cfg);
    let registry = FeatureRegistry::builtin();
    let far = w.far().unwrap();
    let index = far.index();
    let medians = w.inlier_medians().unwrap();
    let limits = w.limits().unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (mode, model) in models {
        let expl = w.explanations(*mode, "explanations.csv").unwrap();
        let y_pred: BTreeMap<(String, NaiveDate), f64> =
            expl.iter().map(|e| ((e.vehicle_id.clone(), e.date), e.y_pred)).collect();
        let (rows, groups) = get_recom(&expl, model, &medians, &registry, &limits).unwrap();
        for g in &groups {
            let key = (g.vehicle_id.clone(), g.date);
            let mut row = far.rows[index[&key]].clone();
            for r in rows.iter().filter(|r| r.vehicle_id == g.vehicle_id && r.date == g.date && r.delta > 0.0) {
                row.values[far.column(&r.feature).unwrap()] = r.reference_value;
            }
            let again = model.explain_row(&far, &row).unwrap().prediction;
            worst = worst.max((again - (y_pred[&key] - g.total_delta)).abs());
            checked += 1;
        }
    }
    out.check(
        "1d",
        "re-prediction on reference-substituted rows equals y_pred minus total delta",
        worst <= 1e-9 && checked > 0,
        format!("max |difference| {worst:.3e} over {checked} vehicle-days"),
    );
}

// ---------- Kruskal-Wallis ----------

fn kruskal(out: &mut Outcome) {
    let kw = kruskal_wallis(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
    out.check(
        "1e",
        "kruskal_wallis([1,2,3],[4,5,6]) = 3.857 +- 0.001",
        (kw.h - 3.857).abs() <= 1e-3,
        format!("H = {:.6}, p = {:.6}", kw.h, kw.p_value),
    );
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rejections = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| normal.sample(&mut rng)).collect()).collect();
        let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        if kruskal_wallis(&refs).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    out.check(
        "1f",
        "Monte Carlo type-I error at alpha 0.05 is 0.05 +- 0.02 (1000 seeds)",
        (rate - 0.05).abs() <= 0.02,
        format!("rejection rate {rate:.3}"),
    );
}

// ---------- synthetic fleet ----------

fn metric(ev: &fuelrec_cli::Evaluation, model: &str, dataset: &str, metric: &str, scope: &str) -> f64 {
    ev.report.get(model, dataset, metric, scope).unwrap_or(f64::NAN)
}

fn fleet_config(out_dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        synth: Some(SynthConfig::default()),
        ..Default::default()
    };
    cfg.paths.output = out_dir.to_path_buf();
    cfg
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn main() {
    let mut out = Outcome { failures: 0 };
    boxplot_oracle(&mut out);
    monotonic_oracle(&mut out);
    kruskal(&mut out);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = fleet_config(&tmp.path().join("run1"));
    let synth = cfg.synth.clone().unwrap();
    let t0 = Instant::now();
    let ev = run_all(&cfg).expect("run-all on the synthetic fleet");
    let secs = t0.elapsed().as_secs_f64();

    let w = Workspace::new(&cfg);
    let registry = FeatureRegistry::builtin();
    let far = w.far().unwrap();
    let models: BTreeMap<ModelMode, FuelModel> =
        ModelMode::ALL.iter().map(|&m| (m, w.model(m, &registry).unwrap())).collect();
    additivity(&mut out, &models, &far);
    recommendation_identity(&mut out, &cfg, &models);

    out.check(
        "2",
        "synthetic fleet is 200 vehicles x 120 days, 4 groups, noise 5% of signal",
        synth.n_vehicles == 200 && synth.n_days == 120 && synth.groups.len() == 4 && synth.noise_frac == 0.05,
        format!(
            "{} vehicles, {} days, {} groups, noise {}",
            synth.n_vehicles,
            synth.n_days,
            synth.groups.len(),
            synth.noise_frac
        ),
    );
    out.check("2", "run-all completes in under 120 s", secs < 120.0, format!("{secs:.1} s"));
    let mut detail = Vec::new();
    let mut ok = true;
    for m in ModelMode::ALL {
        let mape = metric(&ev, m.as_str(), "test", "mape", "all");
        let adj = metric(&ev, m.as_str(), "test", "adj_r2", "all");
        ok &= mape < 0.10 && adj > 0.67;
        detail.push(format!("{m}: mape {mape:.4} adj_r2 {adj:.4}"));
    }
    out.check("2a", "held-out MAPE < 0.10 and adjusted R2 > 0.67, all modes", ok, detail.join("; "));
    let plain = metric(&ev, "plain", "test", "mape", "all");
    let var = metric(&ev, "ebm_var", "test", "mape", "all");
    out.check(
        "2b",
        "ebm_var held-out MAPE <= plain MAPE",
        var <= plain,
        format!("ebm_var {var:.5} vs plain {plain:.5}"),
    );

    let constrained: Vec<&str> = models[&ModelMode::Monotone]
        .base()
        .shapes
        .iter()
        .filter(|s| s.monotone != fuelrec_core::gam::Monotone::None)
        .map(|s| s.feature.as_str())
        .collect();
    let not_one: Vec<String> = constrained
        .iter()
        .filter(|f| {
            let v = ev.report.get("monotone", "explained", "per_mon", f);
            v.is_some_and(|v| v != 1.0)
        })
        .map(|f| f.to_string())
        .collect();
    let measured = constrained
        .iter()
        .filter(|f| ev.report.get("monotone", "explained", "per_mon", f).is_some())
        .count();
    out.check(
        "3a",
        "per_mon = 1.0 for every constrained feature in monotone mode",
        not_one.is_empty() && measured > 0,
        format!("{measured} constrained features measured, off: {not_one:?}"),
    );
    let rain = metric(&ev, "plain", "explained", "per_mon", "duration_raining");
    out.check(
        "3b",
        "per_mon in (0,1) for plain mode on the non-monotone feature duration_raining",
        rain > 0.0 && rain < 1.0,
        format!("{rain:.4}"),
    );
    let info = |name: &str| {
        ModelMode::ALL
            .iter()
            .map(|m| format!("{m} {:.4}", metric(&ev, m.as_str(), "explained", name, "all")))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let below = metric(&ev, "monotone", "explained", "per_below", "all");
    out.check("3c", "per_below >= 0.70 (monotone mode)", below >= 0.70, info("per_below"));
    let per_var = metric(&ev, "monotone", "explained", "per_var", "all");
    out.check(
        "3d",
        "mean per_var within [0.2, 0.5] (monotone mode)",
        (0.2..=0.5).contains(&per_var),
        info("per_var"),
    );
    let cat = metric(&ev, "monotone", "explained", "pct_below_catalog", "all");
    out.check(
        "3e",
        "pct_below_catalog <= 0.05 with catalog = group base fuel (monotone mode)",
        cat <= 0.05,
        info("pct_below_catalog"),
    );
    let recall = metric(&ev, "*", "all", "detection_recall", "all");
    let precision = metric(&ev, "*", "all", "detection_precision", "all");
    out.check(
        "4",
        "detection recall >= 0.8 and precision >= 0.6 on injected anomalies >= 3 IQR",
        recall >= 0.8 && precision >= 0.6,
        format!("recall {recall:.4}, precision {precision:.4}"),
    );

    let cfg2 = fleet_config(&tmp.path().join("run2"));
    run_all(&cfg2).expect("second run-all");
    let a = files_under(&cfg.paths.output);
    let b = files_under(&cfg2.paths.output);
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    let reports_equal = ["metrics.csv", "contrast.csv"].iter().all(|f| a.get(*f).is_some() && a.get(*f) == b.get(*f));
    let names: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    out.check(
        "5",
        "run-all twice gives byte-identical reports",
        reports_equal && differing.is_empty() && names.len() == a.len(),
        format!("{} files compared, differing: {differing:?}", a.len()),
    );

    if out.failures > 0 {
        println!("{} criteria failed", out.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}

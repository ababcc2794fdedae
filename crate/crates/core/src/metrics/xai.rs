use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{monotonic_pairs, ExplanationRow, MonotonicMode};
use crate::far::RouteType;
use crate::gam::DesignLayout;
use crate::recommend::{GroupRecommendation, RecommendationRow};
use crate::registry::{Direction, FeatureRegistry};

/// Explanation coverage of one anomalous vehicle-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayExplanation {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub y_real: f64,
    pub y_pred: f64,
    pub intercept: f64,
    pub n_features: usize,
    /// Intercept plus retained relevance (the post-rules prediction).
    pub y_explained: f64,
    /// `y_explained / y_real`.
    pub rel_importance: f64,
    /// Retained relevance alone over `y_real`.
    pub feature_share: f64,
}

/// One record per vehicle-day of `raw`, counting the rows of `retained`.
pub fn representativeness(raw: &[ExplanationRow], retained: &[ExplanationRow]) -> Vec<DayExplanation> {
    let mut days: BTreeMap<(&str, NaiveDate), DayExplanation> = BTreeMap::new();
    for r in raw {
        days.entry(r.day()).or_insert_with(|| DayExplanation {
            vehicle_id: r.vehicle_id.clone(),
            date: r.date,
            vehicle_group: r.vehicle_group.clone(),
            route_type: r.route_type,
            y_real: r.y_real,
            y_pred: r.y_pred,
            intercept: r.intercept,
            n_features: 0,
            y_explained: r.intercept,
            rel_importance: 0.0,
            feature_share: 0.0,
        });
    }
    let mut sums: BTreeMap<(&str, NaiveDate), f64> = BTreeMap::new();
    for r in retained {
        if let Some(d) = days.get_mut(&r.day()) {
            d.n_features += 1;
            *sums.entry(r.day()).or_default() += r.relevance;
        }
    }
    days.into_iter()
        .map(|(k, mut d)| {
            let s = sums.get(&k).copied().unwrap_or(0.0);
            d.y_explained = d.intercept + s;
            d.rel_importance = d.y_explained / d.y_real;
            d.feature_share = s / d.y_real;
            d
        })
        .collect()
}

/// Per-vehicle MAPE of the post-rules prediction, keyed by vehicle.
pub fn xai_mape(days: &[DayExplanation]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for d in days {
        let e = acc.entry(d.vehicle_id.clone()).or_default();
        e.0 += (d.y_explained - d.y_real).abs() / d.y_real;
        e.1 += 1;
    }
    acc.into_iter().map(|(v, (s, n))| (v, s / n as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub index: usize,
    pub neighbor: usize,
    pub h: f64,
    pub value: f64,
}

/// Standardizes columns to zero mean and unit variance; constant columns
/// become zero.
pub fn standardize(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let d = x.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for r in x {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; d];
    for r in x {
        for c in 0..d {
            sd[c] += (r[c] - mean[c]).powi(2) / n;
        }
    }
    for s in &mut sd {
        *s = s.sqrt();
    }
    x.iter()
        .map(|r| {
            (0..d)
                .map(|c| if sd[c] > 0.0 { (r[c] - mean[c]) / sd[c] } else { 0.0 })
                .collect()
        })
        .collect()
}

/// For each point in `targets`, the ratio |f_i − f_j| / max(h, 1e-9) against
/// its nearest other point j (Euclidean on standardized `x`, exact search,
/// lowest index on ties).
pub fn stability_error(x: &[Vec<f64>], f: &[f64], targets: &[usize]) -> Result<Vec<StabilityPoint>> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("stability needs at least two points".into()));
    }
    if f.len() != x.len() {
        return Err(Error::InvalidArgument("one explanation output per point required".into()));
    }
    let z = standardize(x);
    targets
        .iter()
        .map(|&i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for (j, zj) in z.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d2: f64 = z[i].iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best.0 {
                    best = (d2, j);
                }
            }
            let h = best.0.sqrt();
            let j = best.1;
            Ok(StabilityPoint {
                index: i,
                neighbor: j,
                h,
                value: (f[i] - f[j]).abs() / h.max(1e-9),
            })
        })
        .collect()
}

/// Savings of one anomalous vehicle-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayContrast {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub y_real: f64,
    pub y_updated_all: f64,
    pub per_var: f64,
    pub below: bool,
}

/// Fuel-saved fraction per vehicle-day and whether the combined change brings
/// it under the fence. Days without recommendations save nothing.
pub fn contrastiveness(days: &[DayExplanation], groups: &[GroupRecommendation]) -> Vec<DayContrast> {
    let by_day: BTreeMap<(&str, NaiveDate), &GroupRecommendation> =
        groups.iter().map(|g| ((g.vehicle_id.as_str(), g.date), g)).collect();
    days.iter()
        .map(|d| {
            let g = by_day.get(&(d.vehicle_id.as_str(), d.date));
            let y_updated_all = g.map_or(d.y_real, |g| g.y_updated_all);
            DayContrast {
                vehicle_id: d.vehicle_id.clone(),
                date: d.date,
                vehicle_group: d.vehicle_group.clone(),
                route_type: d.route_type,
                y_real: d.y_real,
                y_updated_all,
                per_var: (d.y_real - y_updated_all) / d.y_real,
                below: g.is_some_and(|g| g.becomes_inlier),
            }
        })
        .collect()
}

/// Share of anomalous days per vehicle group brought under the fence.
pub fn per_below(contrast: &[DayContrast]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for c in contrast {
        let e = acc.entry(c.vehicle_group.clone()).or_default();
        e.0 += usize::from(c.below);
        e.1 += 1;
    }
    acc.into_iter().map(|(g, (b, n))| (g, b as f64 / n as f64)).collect()
}

/// Like [`per_below`] but a day counts when any single-feature change brings
/// it under the fence.
pub fn per_below_single(days: &[DayExplanation], rows: &[RecommendationRow]) -> BTreeMap<String, f64> {
    let hit: BTreeSet<(&str, NaiveDate)> = rows
        .iter()
        .filter(|r| r.becomes_inlier)
        .map(|r| (r.vehicle_id.as_str(), r.date))
        .collect();
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for d in days {
        let e = acc.entry(d.vehicle_group.clone()).or_default();
        e.0 += usize::from(hit.contains(&(d.vehicle_id.as_str(), d.date)));
        e.1 += 1;
    }
    acc.into_iter().map(|(g, (b, n))| (g, b as f64 / n as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerMon {
    pub pairs_before: usize,
    pub pairs_after: usize,
    pub value: f64,
}

/// Fraction of distinct (value, relevance) pairs per feature that survive the
/// monotonicity filter, pooled over (vehicle_group, route_type).
pub fn per_mon(raw: &[ExplanationRow], registry: &FeatureRegistry, mode: MonotonicMode) -> BTreeMap<String, PerMon> {
    let mut groups: BTreeMap<(&str, &str, RouteType), Vec<(f64, f64)>> = BTreeMap::new();
    for r in raw {
        groups
            .entry((&r.feature, &r.vehicle_group, r.route_type))
            .or_default()
            .push((r.feature_value, r.relevance));
    }
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ((f, _, _), mut pairs) in groups {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs.dedup();
        let decreasing = mode == MonotonicMode::ByDirection
            && registry.direction(DesignLayout::source_feature(f)) == Direction::Negative;
        let kept = monotonic_pairs(&pairs, decreasing).len();
        let e = out.entry(f.to_string()).or_default();
        e.0 += pairs.len();
        e.1 += kept;
    }
    out.into_iter()
        .map(|(f, (b, a))| {
            (
                f,
                PerMon {
                    pairs_before: b,
                    pairs_after: a,
                    value: a as f64 / b as f64,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(day: u32, feature: &str, value: f64, relevance: f64) -> ExplanationRow {
        ExplanationRow {
            vehicle_id: "v".into(),
            date: NaiveDate::from_ymd_opt(2024, 1, day).unwrap(),
            vehicle_group: "g".into(),
            route_type: RouteType::City,
            feature: feature.into(),
            feature_value: value,
            relevance,
            y_pred: 9.0,
            y_real: 10.0,
            intercept: 6.0,
        }
    }

    #[test]
    fn coverage_of_retained_features() {
        let raw = vec![row(1, "a", 1.0, 0.9), row(1, "b", 1.0, 0.5), row(2, "a", 1.0, 1.0)];
        let kept = vec![raw[0].clone(), raw[1].clone()];
        let d = representativeness(&raw, &kept);
        assert_eq!(d[0].n_features, 2);
        assert!((d[0].rel_importance - 0.74).abs() < 1e-12);
        assert_eq!(d[1].n_features, 0);
        assert!((d[1].rel_importance - 0.6).abs() < 1e-12);
        let m = xai_mape(&d);
        assert!((m["v"] - (0.26 + 0.4) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn stability_ratio() {
        let x = vec![vec![0.0], vec![1.0], vec![5.0]];
        let f = [1.0, 1.5, 0.0];
        let s = stability_error(&x, &f, &[0]).unwrap();
        assert_eq!(s[0].neighbor, 1);
        let h = standardize(&x)[1][0] - standardize(&x)[0][0];
        assert!((s[0].value - 0.5 / h).abs() < 1e-12);
        let dup = stability_error(&[vec![1.0], vec![1.0]], &[2.0, 2.0], &[0, 1]).unwrap();
        assert!(dup.iter().all(|p| p.value == 0.0));
        assert!(stability_error(&[vec![1.0]], &[2.0], &[0]).is_err());
    }

    #[test]
    fn per_mon_of_one_dip() {
        let raw = vec![row(1, "a", 1.0, 0.5), row(2, "a", 2.0, 0.3), row(3, "a", 3.0, 0.6)];
        let reg = FeatureRegistry::builtin();
        let m = per_mon(&raw, &reg, MonotonicMode::Strict);
        assert_eq!(m["a"].value, 2.0 / 3.0);
        let single = per_mon(&raw[..1], &reg, MonotonicMode::Strict);
        assert_eq!(single["a"].value, 1.0);
    }

    #[test]
    fn per_var_of_a_day() {
        let days = representativeness(&[row(1, "a", 1.0, 0.9)], &[]);
        let g = GroupRecommendation {
            vehicle_id: "v".into(),
            date: days[0].date,
            vehicle_group: "g".into(),
            route_type: RouteType::City,
            y_real: 10.0,
            total_delta: 3.5,
            y_updated_all: 6.5,
            lim_sup: 7.0,
            becomes_inlier: true,
        };
        let c = contrastiveness(&days, &[g]);
        assert!((c[0].per_var - 0.35).abs() < 1e-12);
        assert_eq!(per_below(&c)["g"], 1.0);
        let none = contrastiveness(&days, &[]);
        assert_eq!(none[0].per_var, 0.0);
        assert_eq!(per_below(&none)["g"], 0.0);
    }
}

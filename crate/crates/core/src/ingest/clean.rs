use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::Far;
use crate::registry::{FeatureRegistry, TRIP_KMS};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub min_day_km: f64,
    pub max_abs_correlation: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            min_day_km: 5.0,
            max_abs_correlation: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// No observed values at all.
    NoData,
    ZeroVariance,
    /// Correlated with an earlier feature at or above the threshold.
    Correlated,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_rows: usize,
    pub dropped_null_target: usize,
    pub dropped_short_days: usize,
    pub output_rows: usize,
    /// (first, second, r) for every pair with |r| at or above the threshold.
    pub correlated_pairs: Vec<(String, String, f64)>,
    pub excluded: Vec<(String, ExclusionReason)>,
}

/// Drops unusable rows and features.
///
/// Rows: null target, or `trip_kms <= min_day_km`. Features: all-missing or
/// constant columns, and the lexicographically later member of any pair with
/// |Pearson r| at or above the threshold (pairwise-complete observations).
pub fn clean_far(
    far: &Far,
    cfg: &CleaningConfig,
    _registry: &FeatureRegistry,
) -> Result<(Far, CleaningReport)> {
    let mut report = CleaningReport {
        input_rows: far.len(),
        ..Default::default()
    };
    let kms_col = far.column(TRIP_KMS);
    let keep: Vec<usize> = far
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            if r.fuel_consumption.is_none() {
                report.dropped_null_target += 1;
                return None;
            }
            let kms = kms_col.map_or(f64::NAN, |c| r.values[c]);
            if !(kms > cfg.min_day_km) {
                report.dropped_short_days += 1;
                return None;
            }
            Some(i)
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyAfterCleaning {
            input: report.input_rows,
            null_target: report.dropped_null_target,
            short_days: report.dropped_short_days,
        });
    }
    let rows_kept = far.subset(&keep);

    let mut excluded = vec![None; far.features.len()];
    for (c, slot) in excluded.iter_mut().enumerate() {
        let obs = rows_kept.observed(c);
        if obs.is_empty() {
            *slot = Some(ExclusionReason::NoData);
        } else if stats::std_dev(&obs).unwrap_or(0.0) == 0.0 {
            *slot = Some(ExclusionReason::ZeroVariance);
        }
    }

    let mut order: Vec<usize> = (0..far.features.len()).filter(|&c| excluded[c].is_none()).collect();
    order.sort_by(|&a, &b| far.features[a].cmp(&far.features[b]));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if excluded[a].is_some() || excluded[b].is_some() {
                continue;
            }
            let (xa, xb): (Vec<f64>, Vec<f64>) = rows_kept
                .rows
                .iter()
                .map(|r| (r.values[a], r.values[b]))
                .filter(|(x, y)| !x.is_nan() && !y.is_nan())
                .unzip();
            if let Some(r) = stats::pearson(&xa, &xb) {
                if r.abs() >= cfg.max_abs_correlation {
                    report
                        .correlated_pairs
                        .push((far.features[a].clone(), far.features[b].clone(), r));
                    excluded[b] = Some(ExclusionReason::Correlated);
                }
            }
        }
    }

    let kept_features: Vec<String> = far
        .features
        .iter()
        .zip(&excluded)
        .filter(|(_, e)| e.is_none())
        .map(|(f, _)| f.clone())
        .collect();
    report.excluded = far
        .features
        .iter()
        .zip(&excluded)
        .filter_map(|(f, e)| e.map(|e| (f.clone(), e)))
        .collect();
    let cleaned = rows_kept.select_features(&kept_features);
    report.output_rows = cleaned.len();
    Ok((cleaned, report))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use chrono::NaiveDate;

    use super::*;
    use crate::far::{FarRow, RouteType};

    fn far(rows: Vec<(f64, Option<f64>, Vec<f64>)>, names: &[&str]) -> Far {
        let mut features = vec![TRIP_KMS.to_string()];
        features.extend(names.iter().map(|s| s.to_string()));
        Far {
            features,
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, (kms, fuel, mut v))| {
                    v.insert(0, kms);
                    FarRow {
                        vehicle_id: format!("v{i}"),
                        date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
                        vehicle_group: "g".into(),
                        route_type: RouteType::Combined,
                        values: v,
                        fuel_consumption: fuel,
                        imputed: BTreeSet::new(),
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn drops_short_days_and_null_target() {
        let f = far(
            vec![
                (3.0, Some(6.0), vec![1.0]),
                (50.0, None, vec![2.0]),
                (60.0, Some(7.0), vec![3.0]),
                (70.0, Some(8.0), vec![5.0]),
            ],
            &["x"],
        );
        let (c, rep) = clean_far(&f, &CleaningConfig::default(), &FeatureRegistry::builtin()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(rep.dropped_short_days, 1);
        assert_eq!(rep.dropped_null_target, 1);
    }

    #[test]
    fn duplicated_and_constant_columns_excluded() {
        let f = far(
            vec![
                (10.0, Some(6.0), vec![1.0, 1.0, 4.0, 9.0]),
                (20.0, Some(7.0), vec![2.0, 2.0, 4.0, 1.0]),
                (15.0, Some(8.0), vec![3.0, 3.0, 4.0, 5.0]),
                (40.0, Some(8.0), vec![1.0, 1.0, 4.0, 2.0]),
            ],
            &["a", "b", "k", "z"],
        );
        let (c, rep) = clean_far(&f, &CleaningConfig::default(), &FeatureRegistry::builtin()).unwrap();
        assert!(rep.correlated_pairs.iter().any(|(x, y, r)| x == "a" && y == "b" && (*r - 1.0).abs() < 1e-12));
        assert!(rep.excluded.contains(&("b".to_string(), ExclusionReason::Correlated)));
        assert!(rep.excluded.contains(&("k".to_string(), ExclusionReason::ZeroVariance)));
        assert!(c.column("a").is_some());
        assert!(c.column("b").is_none());
        assert!(c.column("k").is_none());
    }

    #[test]
    fn empty_result_is_fatal() {
        let f = far(vec![(1.0, Some(6.0), vec![1.0])], &["x"]);
        assert!(matches!(
            clean_far(&f, &CleaningConfig::default(), &FeatureRegistry::builtin()),
            Err(Error::EmptyAfterCleaning { .. })
        ));
    }

    #[test]
    fn idempotent() {
        let f = far(
            vec![
                (10.0, Some(6.0), vec![1.0, 2.0, 0.5]),
                (20.0, Some(7.0), vec![2.0, 4.1, 0.1]),
                (15.0, Some(8.0), vec![3.0, 6.0, 0.9]),
                (4.0, Some(8.0), vec![3.0, 6.0, 0.9]),
                (40.0, Some(8.0), vec![1.0, 1.0, 0.2]),
            ],
            &["a", "b", "c"],
        );
        let cfg = CleaningConfig::default();
        let reg = FeatureRegistry::builtin();
        let (once, _) = clean_far(&f, &cfg, &reg).unwrap();
        let (twice, _) = clean_far(&once, &cfg, &reg).unwrap();
        assert_eq!(once, twice);
    }
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::{Far, RouteType};
use crate::registry::FUEL_CONSUMPTION;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianScope {
    All,
    InliersOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianKeys {
    Group,
    GroupRoute,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MedianKey {
    pub vehicle_group: String,
    pub route_type: Option<RouteType>,
}

/// Per-key feature medians (the fuel target is stored under its own name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMedians {
    pub scope: MedianScope,
    pub keys: MedianKeys,
    pub by_key: BTreeMap<MedianKey, BTreeMap<String, f64>>,
    pub global: BTreeMap<String, f64>,
    pub date_range: Option<(NaiveDate, NaiveDate)>,
}

impl GroupMedians {
    pub fn key(&self, vehicle_group: &str, route_type: RouteType) -> MedianKey {
        MedianKey {
            vehicle_group: vehicle_group.to_string(),
            route_type: match self.keys {
                MedianKeys::Group => None,
                MedianKeys::GroupRoute => Some(route_type),
            },
        }
    }

    pub fn get(&self, vehicle_group: &str, route_type: RouteType, feature: &str) -> Option<f64> {
        self.by_key
            .get(&self.key(vehicle_group, route_type))
            .and_then(|m| m.get(feature))
            .copied()
    }

    /// Key median, else the global median. The flag is true on fallback.
    pub fn get_or_global(
        &self,
        vehicle_group: &str,
        route_type: RouteType,
        feature: &str,
    ) -> Option<(f64, bool)> {
        if let Some(v) = self.get(vehicle_group, route_type, feature) {
            return Some((v, false));
        }
        self.global.get(feature).map(|&v| (v, true))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scope", "vehicle_group", "route_type", "feature", "median"])?;
        let scope = match self.scope {
            MedianScope::All => "all",
            MedianScope::InliersOnly => "inliers_only",
        };
        for (k, m) in &self.by_key {
            let route = k.route_type.map_or("*", RouteType::as_str);
            for (f, v) in m {
                w.write_record([scope, &k.vehicle_group, route, f, &v.to_string()])?;
            }
        }
        for (f, v) in &self.global {
            w.write_record([scope, "*", "*", f, &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let mut out = GroupMedians {
            scope: MedianScope::All,
            keys: MedianKeys::Group,
            by_key: BTreeMap::new(),
            global: BTreeMap::new(),
            date_range: None,
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let perr = |m: String| Error::Parse {
                context: "medians file",
                line: i + 2,
                message: m,
            };
            if rec.len() != 5 {
                return Err(perr("expected 5 columns".into()));
            }
            out.scope = match &rec[0] {
                "inliers_only" => MedianScope::InliersOnly,
                _ => MedianScope::All,
            };
            let v: f64 = rec[4].parse().map_err(|e| perr(format!("{e}")))?;
            if &rec[1] == "*" {
                out.global.insert(rec[3].to_string(), v);
                continue;
            }
            let route_type = match &rec[2] {
                "*" => None,
                r => {
                    out.keys = MedianKeys::GroupRoute;
                    Some(r.parse()?)
                }
            };
            out.by_key
                .entry(MedianKey {
                    vehicle_group: rec[1].to_string(),
                    route_type,
                })
                .or_default()
                .insert(rec[3].to_string(), v);
        }
        Ok(out)
    }
}

/// Type-7 medians per key for every feature and the fuel target.
///
/// Imputed values never contribute. With `inlier_mask` the scope is
/// inliers-only and rows with a `false` entry are skipped; keys left without
/// rows are omitted.
pub fn compute_group_medians(
    far: &Far,
    inlier_mask: Option<&[bool]>,
    keys: MedianKeys,
) -> Result<GroupMedians> {
    if far.is_empty() {
        return Err(Error::EmptyInput("median computation over an empty FAR".into()));
    }
    let scope = if inlier_mask.is_some() {
        MedianScope::InliersOnly
    } else {
        MedianScope::All
    };
    let mut out = GroupMedians {
        scope,
        keys,
        by_key: BTreeMap::new(),
        global: BTreeMap::new(),
        date_range: None,
    };
    let mut grouped: BTreeMap<MedianKey, Vec<usize>> = BTreeMap::new();
    let mut all = Vec::new();
    for (i, r) in far.rows.iter().enumerate() {
        if inlier_mask.is_some_and(|m| !m[i]) {
            continue;
        }
        grouped.entry(out.key(&r.vehicle_group, r.route_type)).or_default().push(i);
        all.push(i);
        out.date_range = Some(match out.date_range {
            None => (r.date, r.date),
            Some((a, b)) => (a.min(r.date), b.max(r.date)),
        });
    }
    let medians_of = |rows: &[usize]| -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (c, name) in far.features.iter().enumerate() {
            let vals: Vec<f64> = rows
                .iter()
                .map(|&i| &far.rows[i])
                .filter(|r| !r.imputed.contains(name))
                .map(|r| r.values[c])
                .filter(|v| !v.is_nan())
                .collect();
            if let Some(med) = stats::median(&vals) {
                m.insert(name.clone(), med);
            }
        }
        let fuel: Vec<f64> = rows.iter().filter_map(|&i| far.rows[i].fuel_consumption).collect();
        if let Some(med) = stats::median(&fuel) {
            m.insert(FUEL_CONSUMPTION.to_string(), med);
        }
        m
    };
    for (k, rows) in grouped {
        out.by_key.insert(k, medians_of(&rows));
    }
    out.global = medians_of(&all);
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeReport {
    pub imputed_values: usize,
    pub global_fallbacks: usize,
    pub unresolved: usize,
}

/// Replaces missing feature values with the row's group median (global
/// median as fallback) and records the replaced names. The target is left
/// untouched.
pub fn impute_missing(far: &Far, medians: &GroupMedians) -> (Far, ImputeReport) {
    let mut out = far.clone();
    let mut report = ImputeReport::default();
    for row in &mut out.rows {
        for (c, name) in far.features.iter().enumerate() {
            if !row.values[c].is_nan() {
                continue;
            }
            match medians.get_or_global(&row.vehicle_group, row.route_type, name) {
                Some((v, fallback)) => {
                    if fallback {
                        report.global_fallbacks += 1;
                        log::warn!(
                            "no `{}` median for group {}; using global median",
                            name,
                            row.vehicle_group
                        );
                    }
                    row.values[c] = v;
                    row.imputed.insert(name.clone());
                    report.imputed_values += 1;
                }
                None => report.unresolved += 1,
            }
        }
    }
    (out, report)
}

//! Univariate box-plot fences per (vehicle_group, route_type) and the
//! two-pass labelling of fuel consumption.
//!
//! Pass one removes data-quality failures outside a wide fence; pass two
//! recomputes the quartiles on the survivors and labels outliers against the
//! 1.5·IQR fence. Outliers lie strictly outside the fences.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::{Far, RouteType};
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotLimits {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lim_inf: f64,
    pub lim_sup: f64,
}

impl BoxplotLimits {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lim_inf && v <= self.lim_sup
    }
}

/// Quartiles by linear interpolation and fences at `factor`·IQR.
pub fn fences(values: &[f64], factor: f64) -> Result<BoxplotLimits> {
    if values.is_empty() {
        return Err(Error::EmptyInput("box-plot limits of an empty collection".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25).expect("non-empty");
    let q3 = quantile_sorted(&v, 0.75).expect("non-empty");
    let iqr = q3 - q1;
    Ok(BoxplotLimits {
        q1,
        q3,
        iqr,
        lim_inf: q1 - factor * iqr,
        lim_sup: q3 + factor * iqr,
    })
}

/// Standard 1.5·IQR box-plot limits.
pub fn boxplot_limits(values: &[f64]) -> Result<BoxplotLimits> {
    fences(values, 1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyLabel {
    Inlier,
    OutlierHigh,
    OutlierLow,
    RemovedDataQuality,
}

impl AnomalyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyLabel::Inlier => "inlier",
            AnomalyLabel::OutlierHigh => "outlier_high",
            AnomalyLabel::OutlierLow => "outlier_low",
            AnomalyLabel::RemovedDataQuality => "removed_data_quality",
        }
    }
}

impl fmt::Display for AnomalyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "inlier" => AnomalyLabel::Inlier,
            "outlier_high" => AnomalyLabel::OutlierHigh,
            "outlier_low" => AnomalyLabel::OutlierLow,
            "removed_data_quality" => AnomalyLabel::RemovedDataQuality,
            other => return Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyConfig {
    /// Keys with fewer rows are left unlabelled (all inliers).
    pub min_points_per_key: usize,
    /// Fence factor of the labelling pass.
    pub iqr_factor: f64,
    /// Fence factor of the data-quality pass.
    pub data_quality_iqr_factor: f64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            min_points_per_key: 8,
            iqr_factor: 1.5,
            data_quality_iqr_factor: 6.0,
        }
    }
}

/// Outcome of the two passes over one key's values.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyLabels {
    pub labels: Vec<AnomalyLabel>,
    pub limits: Option<BoxplotLimits>,
    pub n_points: usize,
    pub sufficient: bool,
}

/// Two-pass labelling of a single key.
pub fn label_key(values: &[f64], cfg: &AnomalyConfig) -> Result<KeyLabels> {
    if values.is_empty() {
        return Ok(KeyLabels {
            labels: vec![],
            limits: None,
            n_points: 0,
            sufficient: false,
        });
    }
    if values.len() < cfg.min_points_per_key {
        return Ok(KeyLabels {
            labels: vec![AnomalyLabel::Inlier; values.len()],
            limits: Some(fences(values, cfg.iqr_factor)?),
            n_points: values.len(),
            sufficient: false,
        });
    }
    let quality = fences(values, cfg.data_quality_iqr_factor)?;
    let mut labels: Vec<AnomalyLabel> = values
        .iter()
        .map(|&v| {
            if quality.contains(v) {
                AnomalyLabel::Inlier
            } else {
                AnomalyLabel::RemovedDataQuality
            }
        })
        .collect();
    let survivors: Vec<f64> = values
        .iter()
        .zip(&labels)
        .filter(|(_, l)| **l == AnomalyLabel::Inlier)
        .map(|(v, _)| *v)
        .collect();
    let limits = fences(&survivors, cfg.iqr_factor)?;
    for (l, &v) in labels.iter_mut().zip(values) {
        if *l == AnomalyLabel::RemovedDataQuality {
            continue;
        }
        *l = if v > limits.lim_sup {
            AnomalyLabel::OutlierHigh
        } else if v < limits.lim_inf {
            AnomalyLabel::OutlierLow
        } else {
            AnomalyLabel::Inlier
        };
    }
    Ok(KeyLabels {
        labels,
        limits: Some(limits),
        n_points: survivors.len(),
        sufficient: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEntry {
    pub limits: BoxplotLimits,
    pub n_points: usize,
    pub sufficient: bool,
}

/// Labelling-pass limits per (vehicle_group, route_type).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnomalyLimitTable {
    pub entries: BTreeMap<(String, RouteType), LimitEntry>,
}

impl AnomalyLimitTable {
    pub fn get(&self, vehicle_group: &str, route_type: RouteType) -> Option<&LimitEntry> {
        self.entries.get(&(vehicle_group.to_string(), route_type))
    }

    pub fn lim_sup(&self, vehicle_group: &str, route_type: RouteType) -> Result<f64> {
        self.get(vehicle_group, route_type)
            .map(|e| e.limits.lim_sup)
            .ok_or_else(|| Error::MissingLimit {
                vehicle_group: vehicle_group.to_string(),
                route_type: route_type.to_string(),
            })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "vehicle_group",
            "route_type",
            "q1",
            "q3",
            "lim_inf",
            "lim_sup",
            "n_points",
            "status",
        ])?;
        for ((g, r), e) in &self.entries {
            w.write_record([
                g.clone(),
                r.to_string(),
                e.limits.q1.to_string(),
                e.limits.q3.to_string(),
                e.limits.lim_inf.to_string(),
                e.limits.lim_sup.to_string(),
                e.n_points.to_string(),
                if e.sufficient { "ok" } else { "insufficient" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let mut entries = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let perr = |m: String| Error::Parse {
                context: "limit table",
                line: i + 2,
                message: m,
            };
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| perr("missing column".into()))?
                    .parse()
                    .map_err(|e| perr(format!("{e}")))
            };
            let (q1, q3) = (num(2)?, num(3)?);
            entries.insert(
                (rec[0].to_string(), rec[1].parse()?),
                LimitEntry {
                    limits: BoxplotLimits {
                        q1,
                        q3,
                        iqr: q3 - q1,
                        lim_inf: num(4)?,
                        lim_sup: num(5)?,
                    },
                    n_points: num(6)? as usize,
                    sufficient: rec.get(7) != Some("insufficient"),
                },
            );
        }
        Ok(Self { entries })
    }
}

/// Labels every FAR row and returns the labelling-pass limit table.
pub fn detect_anomalies(
    far: &Far,
    cfg: &AnomalyConfig,
) -> Result<(Vec<AnomalyLabel>, AnomalyLimitTable)> {
    if far.is_empty() {
        return Err(Error::EmptyInput("anomaly detection over an empty FAR".into()));
    }
    let mut keys: BTreeMap<(String, RouteType), Vec<usize>> = BTreeMap::new();
    for (i, r) in far.rows.iter().enumerate() {
        if r.fuel_consumption.is_none() {
            return Err(Error::InvalidArgument(format!(
                "row ({}, {}) has no fuel target",
                r.vehicle_id, r.date
            )));
        }
        keys.entry((r.vehicle_group.clone(), r.route_type)).or_default().push(i);
    }
    let mut labels = vec![AnomalyLabel::Inlier; far.len()];
    let mut table = AnomalyLimitTable::default();
    for (key, rows) in keys {
        let values: Vec<f64> = rows.iter().map(|&i| far.rows[i].fuel()).collect();
        let out = label_key(&values, cfg)?;
        if !out.sufficient {
            log::warn!(
                "key ({}, {}) has {} rows; below the box-plot minimum",
                key.0,
                key.1,
                values.len()
            );
        }
        for (&i, l) in rows.iter().zip(out.labels) {
            labels[i] = l;
        }
        if let Some(limits) = out.limits {
            table.entries.insert(
                key,
                LimitEntry {
                    limits,
                    n_points: out.n_points,
                    sufficient: out.sufficient,
                },
            );
        }
    }
    Ok((labels, table))
}

pub fn write_labels_csv<W: Write>(far: &Far, labels: &[AnomalyLabel], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vehicle_id", "date_tx", "label"])?;
    for (r, l) in far.rows.iter().zip(labels) {
        w.write_record([r.vehicle_id.as_str(), &r.date.to_string(), l.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads labels aligned to `far` rows; rows absent from the file are an error.
pub fn read_labels_csv<R: Read>(far: &Far, reader: R) -> Result<Vec<AnomalyLabel>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut map: BTreeMap<(String, NaiveDate), AnomalyLabel> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| Error::Parse {
            context: "labels file",
            line: i + 2,
            message: e.to_string(),
        })?;
        map.insert((rec[0].to_string(), date), rec[2].parse()?);
    }
    far.rows
        .iter()
        .map(|r| {
            map.get(&(r.vehicle_id.clone(), r.date)).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("no label for ({}, {})", r.vehicle_id, r.date))
            })
        })
        .collect()
}

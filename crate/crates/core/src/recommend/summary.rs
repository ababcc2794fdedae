use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::daily::{get_recom, group_delta};
use super::reference::reference_for;
use super::DayKms;
use crate::anomaly::AnomalyLimitTable;
use crate::error::{Error, Result};
use crate::explain::ExplanationRow;
use crate::far::{Far, FarRow, RouteType};
use crate::ingest::GroupMedians;
use crate::model::FuelModel;
use crate::registry::FeatureRegistry;
use crate::stats::lower_median;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryConfig {
    pub min_days_anomalies: usize,
    pub min_day_km: f64,
    pub min_dev_total_avg_fuel: f64,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            min_days_anomalies: 3,
            min_day_km: 5.0,
            min_dev_total_avg_fuel: 1.0,
        }
    }
}

/// Single-feature recommendation on a (vehicle, route) prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub vehicle_id: String,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub n_days: usize,
    pub feature: String,
    pub prototype_value: f64,
    pub reference_value: f64,
    pub delta: f64,
    pub y_real: f64,
    pub y_updated: f64,
    pub lim_sup: f64,
    pub becomes_inlier: bool,
}

/// All recommended changes of a prototype applied together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryAggregate {
    pub vehicle_id: String,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub n_days: usize,
    pub y_real: f64,
    pub y_pred: f64,
    pub total_delta: f64,
    pub y_updated_all: f64,
    pub lim_sup: f64,
    pub becomes_inlier: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub aggregates: Vec<SummaryAggregate>,
}

/// Vehicle-days of each (vehicle, route) combination that pass the summary
/// filters: enough anomalous days, long enough trips and a large enough
/// combined decrease.
pub fn filter_points(
    explanations: &[ExplanationRow],
    kms: &DayKms,
    model: &FuelModel,
    medians: &GroupMedians,
    registry: &FeatureRegistry,
    limits: &AnomalyLimitTable,
    cfg: &SummaryConfig,
) -> Result<BTreeMap<(String, RouteType), BTreeSet<NaiveDate>>> {
    let mut combos: BTreeMap<(String, RouteType), BTreeSet<NaiveDate>> = BTreeMap::new();
    for e in explanations {
        combos.entry((e.vehicle_id.clone(), e.route_type)).or_default().insert(e.date);
    }
    combos.retain(|_, days| days.len() >= cfg.min_days_anomalies);
    for ((vid, _), days) in combos.iter_mut() {
        days.retain(|d| kms.get(&(vid.clone(), *d)).is_some_and(|&k| k > cfg.min_day_km));
    }
    let kept: Vec<ExplanationRow> = explanations
        .iter()
        .filter(|e| {
            combos
                .get(&(e.vehicle_id.clone(), e.route_type))
                .is_some_and(|d| d.contains(&e.date))
        })
        .cloned()
        .collect();
    let (_, groups) = get_recom(&kept, model, medians, registry, limits)?;
    let decrease: BTreeMap<(String, NaiveDate), f64> = groups
        .into_iter()
        .map(|g| ((g.vehicle_id, g.date), g.total_delta))
        .collect();
    for ((vid, _), days) in combos.iter_mut() {
        days.retain(|d| {
            decrease
                .get(&(vid.clone(), *d))
                .is_some_and(|&t| t >= cfg.min_dev_total_avg_fuel)
        });
    }
    combos.retain(|_, days| !days.is_empty());
    Ok(combos)
}

/// Prototype of a set of vehicle-days: per column the lower median, so every
/// value was observed on some day.
pub fn prototype(far: &Far, rows: &[&FarRow]) -> Result<FarRow> {
    let last = rows
        .iter()
        .max_by_key(|r| r.date)
        .ok_or_else(|| Error::EmptyInput("prototype of no vehicle-days".into()))?;
    let values = (0..far.features.len())
        .map(|c| {
            let col: Vec<f64> = rows.iter().map(|r| r.values[c]).filter(|v| v.is_finite()).collect();
            lower_median(&col).unwrap_or(f64::NAN)
        })
        .collect();
    let fuel: Vec<f64> = rows.iter().filter_map(|r| r.fuel_consumption).collect();
    Ok(FarRow {
        vehicle_id: last.vehicle_id.clone(),
        date: last.date,
        vehicle_group: last.vehicle_group.clone(),
        route_type: last.route_type,
        values,
        fuel_consumption: lower_median(&fuel),
        imputed: Default::default(),
    })
}

/// Per (vehicle, route) prototype recommendations for operators.
#[allow(clippy::too_many_arguments)]
pub fn get_summ_recom(
    explanations: &[ExplanationRow],
    far: &Far,
    kms: &DayKms,
    model: &FuelModel,
    medians: &GroupMedians,
    registry: &FeatureRegistry,
    limits: &AnomalyLimitTable,
    cfg: &SummaryConfig,
) -> Result<Summary> {
    let combos = filter_points(explanations, kms, model, medians, registry, limits, cfg)?;
    let index = far.index();
    let columns = model.columns();
    let mut summary = Summary::default();
    for ((vid, route), days) in combos {
        let rows = days
            .iter()
            .map(|d| {
                index
                    .get(&(vid.clone(), *d))
                    .map(|&i| &far.rows[i])
                    .ok_or_else(|| Error::InvalidArgument(format!("({vid}, {d}) is not in the FAR")))
            })
            .collect::<Result<Vec<_>>>()?;
        let proto = prototype(far, &rows)?;
        let e = model.explain_row(far, &proto)?;
        let lim_sup = limits.lim_sup(&proto.vehicle_group, route)?;
        let y_real = proto.fuel();
        let features: BTreeSet<&str> = explanations
            .iter()
            .filter(|x| x.vehicle_id == vid && x.route_type == route && days.contains(&x.date))
            .filter(|x| registry.is_actionable(&x.feature))
            .map(|x| x.feature.as_str())
            .collect();
        let mut deltas = Vec::new();
        for f in features {
            let c = columns
                .iter()
                .position(|x| x == f)
                .ok_or_else(|| Error::UnknownFeature(f.to_string()))?;
            let r = reference_for(model, medians, registry, &proto.vehicle_group, route, f)?;
            let delta = e.relevance[c] - r.beta;
            deltas.push(delta);
            let y_updated = y_real - delta;
            summary.rows.push(SummaryRow {
                vehicle_id: vid.clone(),
                vehicle_group: proto.vehicle_group.clone(),
                route_type: route,
                n_days: days.len(),
                feature: f.to_string(),
                prototype_value: far.column(f).map_or(f64::NAN, |k| proto.values[k]),
                reference_value: r.value,
                delta,
                y_real,
                y_updated,
                lim_sup,
                becomes_inlier: y_updated <= lim_sup,
            });
        }
        let total_delta = group_delta(deltas);
        summary.aggregates.push(SummaryAggregate {
            vehicle_id: vid.clone(),
            vehicle_group: proto.vehicle_group.clone(),
            route_type: route,
            n_days: days.len(),
            y_real,
            y_pred: e.prediction,
            total_delta,
            y_updated_all: y_real - total_delta,
            lim_sup,
            becomes_inlier: y_real - total_delta <= lim_sup,
        });
    }
    Ok(summary)
}

impl Summary {
    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "vehicle_id",
            "vehicle_group",
            "route_type",
            "n_days",
            "feature",
            "prototype_value",
            "reference_value",
            "delta",
            "y_real",
            "y_updated",
            "lim_sup",
            "becomes_inlier",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.vehicle_id.clone(),
                r.vehicle_group.clone(),
                r.route_type.to_string(),
                r.n_days.to_string(),
                r.feature.clone(),
                r.prototype_value.to_string(),
                r.reference_value.to_string(),
                r.delta.to_string(),
                r.y_real.to_string(),
                r.y_updated.to_string(),
                r.lim_sup.to_string(),
                r.becomes_inlier.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "vehicle_id",
            "vehicle_group",
            "route_type",
            "n_days",
            "y_real",
            "y_pred",
            "total_delta",
            "y_updated_all",
            "lim_sup",
            "becomes_inlier",
        ])?;
        for a in &self.aggregates {
            w.write_record([
                a.vehicle_id.clone(),
                a.vehicle_group.clone(),
                a.route_type.to_string(),
                a.n_days.to_string(),
                a.y_real.to_string(),
                a.y_pred.to_string(),
                a.total_delta.to_string(),
                a.y_updated_all.to_string(),
                a.lim_sup.to_string(),
                a.becomes_inlier.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

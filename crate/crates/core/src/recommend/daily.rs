use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::reference::reference_for;
use crate::anomaly::AnomalyLimitTable;
use crate::error::Result;
use crate::explain::ExplanationRow;
use crate::far::RouteType;
use crate::ingest::GroupMedians;
use crate::model::FuelModel;
use crate::registry::FeatureRegistry;

/// Effect of moving one feature of one vehicle-day to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRow {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub feature: String,
    pub current_value: f64,
    pub reference_value: f64,
    pub relevance: f64,
    pub beta: f64,
    pub delta: f64,
    pub y_real: f64,
    pub y_updated: f64,
    pub lim_sup: f64,
    pub becomes_inlier: bool,
}

/// Effect of moving every recommended feature of a vehicle-day at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecommendation {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub y_real: f64,
    pub total_delta: f64,
    pub y_updated_all: f64,
    pub lim_sup: f64,
    pub becomes_inlier: bool,
}

/// Total decrease of a set of per-feature deltas; increases are left out.
pub fn group_delta(deltas: impl IntoIterator<Item = f64>) -> f64 {
    deltas.into_iter().filter(|d| *d > 0.0).sum()
}

/// One recommendation per retained actionable explanation row plus one group
/// recommendation per vehicle-day that has any.
pub fn get_recom(
    explanations: &[ExplanationRow],
    model: &FuelModel,
    medians: &GroupMedians,
    registry: &FeatureRegistry,
    limits: &AnomalyLimitTable,
) -> Result<(Vec<RecommendationRow>, Vec<GroupRecommendation>)> {
    let mut rows = Vec::new();
    let mut days: BTreeMap<(String, NaiveDate), Vec<usize>> = BTreeMap::new();
    for e in explanations {
        if !registry.is_actionable(&e.feature) {
            continue;
        }
        let lim_sup = limits.lim_sup(&e.vehicle_group, e.route_type)?;
        let r = reference_for(model, medians, registry, &e.vehicle_group, e.route_type, &e.feature)?;
        let y_new = e.y_pred - e.relevance + r.beta;
        let delta = e.y_pred - y_new;
        let y_updated = e.y_real - delta;
        days.entry((e.vehicle_id.clone(), e.date)).or_default().push(rows.len());
        rows.push(RecommendationRow {
            vehicle_id: e.vehicle_id.clone(),
            date: e.date,
            vehicle_group: e.vehicle_group.clone(),
            route_type: e.route_type,
            feature: e.feature.clone(),
            current_value: e.feature_value,
            reference_value: r.value,
            relevance: e.relevance,
            beta: r.beta,
            delta,
            y_real: e.y_real,
            y_updated,
            lim_sup,
            becomes_inlier: y_updated <= lim_sup,
        });
    }
    let groups = days
        .into_values()
        .map(|idx| {
            let first = &rows[idx[0]];
            let total_delta = group_delta(idx.iter().map(|&i| rows[i].delta));
            let y_updated_all = first.y_real - total_delta;
            GroupRecommendation {
                vehicle_id: first.vehicle_id.clone(),
                date: first.date,
                vehicle_group: first.vehicle_group.clone(),
                route_type: first.route_type,
                y_real: first.y_real,
                total_delta,
                y_updated_all,
                lim_sup: first.lim_sup,
                becomes_inlier: y_updated_all <= first.lim_sup,
            }
        })
        .collect();
    Ok((rows, groups))
}

pub fn write_recommendations_csv<W: Write>(rows: &[RecommendationRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "vehicle_id",
        "date_tx",
        "vehicle_group",
        "route_type",
        "feature",
        "current_value",
        "reference_value",
        "delta",
        "y_real",
        "y_updated",
        "lim_sup",
        "becomes_inlier",
    ])?;
    for r in rows {
        w.write_record([
            r.vehicle_id.clone(),
            r.date.to_string(),
            r.vehicle_group.clone(),
            r.route_type.to_string(),
            r.feature.clone(),
            r.current_value.to_string(),
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

pub fn write_group_recommendations_csv<W: Write>(rows: &[GroupRecommendation], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "vehicle_id",
        "date_tx",
        "vehicle_group",
        "route_type",
        "y_real",
        "total_delta",
        "y_updated_all",
        "lim_sup",
        "becomes_inlier",
    ])?;
    for r in rows {
        w.write_record([
            r.vehicle_id.clone(),
            r.date.to_string(),
            r.vehicle_group.clone(),
            r.route_type.to_string(),
            r.y_real.to_string(),
            r.total_delta.to_string(),
            r.y_updated_all.to_string(),
            r.lim_sup.to_string(),
            r.becomes_inlier.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

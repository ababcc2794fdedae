use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::daily::group_delta;
use super::reference::reference_for;
use super::DayKms;
use crate::error::{Error, Result};
use crate::far::Far;
use crate::ingest::GroupMedians;
use crate::model::FuelModel;
use crate::registry::{FeatureGroup, FeatureRegistry};

/// Litres attributable to driving behaviour, per vehicle group or fleet-wide
/// (`*` in the key columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetRow {
    pub vehicle_group: String,
    pub route_type: String,
    pub n_days: usize,
    pub total_fuel_l: f64,
    pub excess_fuel_l: f64,
    pub excess_pct: f64,
    pub baseline_fuel_l: f64,
}

#[derive(Default)]
struct Acc {
    n: usize,
    total: f64,
    excess: f64,
}

impl Acc {
    fn row(&self, vehicle_group: String) -> FleetRow {
        FleetRow {
            vehicle_group,
            route_type: "*".into(),
            n_days: self.n,
            total_fuel_l: self.total,
            excess_fuel_l: self.excess,
            excess_pct: if self.total > 0.0 { 100.0 * self.excess / self.total } else { 0.0 },
            baseline_fuel_l: self.total - self.excess,
        }
    }
}

/// Moves every actionable driving-behaviour feature of every row to its
/// reference and converts the combined decrease to litres with the day's km.
pub fn fleet_manager_view(
    far: &Far,
    kms: &DayKms,
    model: &FuelModel,
    medians: &GroupMedians,
    registry: &FeatureRegistry,
) -> Result<Vec<FleetRow>> {
    let columns = model.columns();
    let driving: Vec<(usize, &String)> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            registry.is_actionable(c)
                && registry.get(c).is_some_and(|s| s.group == FeatureGroup::DrivingBehaviour)
        })
        .collect();
    let mut by_group: BTreeMap<String, Acc> = BTreeMap::new();
    let mut fleet = Acc::default();
    for row in &far.rows {
        let km = *kms.get(&(row.vehicle_id.clone(), row.date)).ok_or_else(|| {
            Error::InvalidArgument(format!("no trip_kms for ({}, {})", row.vehicle_id, row.date))
        })?;
        let e = model.explain_row(far, row)?;
        let mut deltas = Vec::with_capacity(driving.len());
        for &(c, f) in &driving {
            let r = reference_for(model, medians, registry, &row.vehicle_group, row.route_type, f)?;
            deltas.push(e.relevance[c] - r.beta);
        }
        let excess = group_delta(deltas) * km / 100.0;
        let total = row.fuel() * km / 100.0;
        for acc in [by_group.entry(row.vehicle_group.clone()).or_default(), &mut fleet] {
            acc.n += 1;
            acc.total += total;
            acc.excess += excess;
        }
    }
    let mut out: Vec<FleetRow> = by_group.iter().map(|(g, a)| a.row(g.clone())).collect();
    out.push(fleet.row("*".into()));
    Ok(out)
}

pub fn write_fleet_csv<W: Write>(rows: &[FleetRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "vehicle_group",
        "route_type",
        "total_fuel_L",
        "excess_fuel_L",
        "excess_pct",
        "baseline_fuel_L",
        "n_days",
    ])?;
    for r in rows {
        w.write_record([
            r.vehicle_group.clone(),
            r.route_type.clone(),
            r.total_fuel_l.to_string(),
            r.excess_fuel_l.to_string(),
            r.excess_pct.to_string(),
            r.baseline_fuel_l.to_string(),
            r.n_days.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::raw::{RawTelemetryRecord, RawValue};
use super::vin::{decode_vehicle_group, VinTable};
use crate::far::{Far, FarRow, RouteType};
use crate::registry::{FeatureRegistry, PER_TIME_CITY, TOTAL_ODOMETER, TRIP_KMS};

/// Raw variable carrying the litres used during a trip segment.
pub const TRIP_FUEL_USED: &str = "trip_fuel_used";
/// Raw variable: hours driven inside city zones.
pub const CITY_DRIVING_DURATION: &str = "city_driving_duration";
/// Raw variable: total hours driven.
pub const DRIVING_DURATION: &str = "driving_duration";
/// Raw variable with the vehicle identification number as text.
pub const VIN: &str = "vin";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum VariableTarget {
    Feature(String),
    TripFuel,
    CityDuration,
    DrivingDuration,
    Vin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Mean,
    Max,
    Latest,
}

/// Daily aggregation rule for a raw variable id, or `None` if unknown.
///
/// Registry feature names are accepted directly: `mean_*` and `height` are
/// averaged, the odometer takes its maximum, everything else (counts,
/// durations, distances, variations) is summed.
pub fn variable_rule(
    variable_id: &str,
    registry: &FeatureRegistry,
) -> Option<(VariableTarget, Aggregation)> {
    match variable_id {
        TRIP_FUEL_USED => return Some((VariableTarget::TripFuel, Aggregation::Sum)),
        CITY_DRIVING_DURATION => return Some((VariableTarget::CityDuration, Aggregation::Sum)),
        DRIVING_DURATION => return Some((VariableTarget::DrivingDuration, Aggregation::Sum)),
        VIN => return Some((VariableTarget::Vin, Aggregation::Latest)),
        _ => {}
    }
    if !registry.is_explainable(variable_id) {
        return None;
    }
    let agg = if variable_id == TOTAL_ODOMETER {
        Aggregation::Max
    } else if variable_id.starts_with("mean_") || variable_id == "height" || variable_id == PER_TIME_CITY
    {
        Aggregation::Mean
    } else {
        Aggregation::Sum
    };
    Some((VariableTarget::Feature(variable_id.to_string()), agg))
}

/// Aggregated values of one vehicle-day before categorical assignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DraftDay {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
    pub trip_fuel_used: Option<f64>,
    pub city_duration: Option<f64>,
    pub driving_duration: Option<f64>,
    pub vin: Option<(DateTime<FixedOffset>, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub records: usize,
    pub ignored: BTreeMap<String, usize>,
    pub non_numeric: usize,
}

#[derive(Default)]
struct Cell {
    numbers: BTreeMap<VariableTarget, Vec<f64>>,
    vin: Option<(DateTime<FixedOffset>, String)>,
}

fn fold(mut values: Vec<f64>, agg: Aggregation) -> f64 {
    // sorted so the floating-point result does not depend on record order
    values.sort_by(f64::total_cmp);
    match agg {
        Aggregation::Sum => values.iter().sum(),
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Max | Aggregation::Latest => *values.last().expect("non-empty cell"),
    }
}

/// Groups records by (vehicle, UTC calendar date) and aggregates each variable.
pub fn aggregate_daily(
    records: &[RawTelemetryRecord],
    registry: &FeatureRegistry,
) -> (Vec<DraftDay>, AggregationReport) {
    let mut report = AggregationReport {
        records: records.len(),
        ..Default::default()
    };
    let mut cells: BTreeMap<(String, NaiveDate), Cell> = BTreeMap::new();
    let mut aggs: BTreeMap<VariableTarget, Aggregation> = BTreeMap::new();
    for rec in records {
        let Some((target, agg)) = variable_rule(&rec.variable_id, registry) else {
            *report.ignored.entry(rec.variable_id.clone()).or_default() += 1;
            continue;
        };
        let date = rec.time_tx.with_timezone(&Utc).date_naive();
        let cell = cells.entry((rec.vehicle_id.clone(), date)).or_default();
        match (&target, &rec.value) {
            (VariableTarget::Vin, RawValue::Text(t)) => {
                let cand = (rec.time_tx, t.clone());
                if cell.vin.as_ref().is_none_or(|cur| cand > *cur) {
                    cell.vin = Some(cand);
                }
            }
            (VariableTarget::Vin, RawValue::Number(n)) => {
                let cand = (rec.time_tx, n.to_string());
                if cell.vin.as_ref().is_none_or(|cur| cand > *cur) {
                    cell.vin = Some(cand);
                }
            }
            (_, RawValue::Number(v)) => {
                aggs.insert(target.clone(), agg);
                cell.numbers.entry(target).or_default().push(*v);
            }
            (_, RawValue::Text(_)) => report.non_numeric += 1,
        }
    }

    let drafts = cells
        .into_iter()
        .map(|((vehicle_id, date), cell)| {
            let mut day = DraftDay {
                vehicle_id,
                date,
                vin: cell.vin,
                ..Default::default()
            };
            for (target, values) in cell.numbers {
                let v = fold(values, aggs[&target]);
                match target {
                    VariableTarget::Feature(name) => {
                        day.values.insert(name, v);
                    }
                    VariableTarget::TripFuel => day.trip_fuel_used = Some(v),
                    VariableTarget::CityDuration => day.city_duration = Some(v),
                    VariableTarget::DrivingDuration => day.driving_duration = Some(v),
                    VariableTarget::Vin => {}
                }
            }
            day
        })
        .collect();
    (drafts, report)
}

/// Fuel consumption in L/100 km; `None` signals a row to discard.
pub fn compute_fuel(trip_fuel_used: f64, trip_kms: f64) -> Option<f64> {
    if !(trip_kms > 0.0) || !trip_fuel_used.is_finite() || !trip_kms.is_finite() {
        return None;
    }
    Some(trip_fuel_used / trip_kms * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteThresholds {
    pub th_kms: f64,
    pub low_th_time: f64,
    pub high_th_time: f64,
}

impl Default for RouteThresholds {
    fn default() -> Self {
        Self {
            th_kms: 30.0,
            low_th_time: 0.5,
            high_th_time: 0.65,
        }
    }
}

pub fn assign_route_type(per_time_city: f64, trip_kms: f64, th: &RouteThresholds) -> RouteType {
    if per_time_city <= th.low_th_time && trip_kms >= th.th_kms {
        RouteType::Hwy
    } else if per_time_city >= th.high_th_time && trip_kms <= th.th_kms {
        RouteType::City
    } else {
        RouteType::Combined
    }
}

/// Turns aggregated days into FAR rows: one column per explainable registry
/// feature, fuel target, vehicle group from the VIN table, and route type.
///
/// `per_time_city` is city driving hours over total driving hours when both
/// are reported, otherwise the directly reported mean. Days without a
/// `per_time_city` value fall into the `combined` route.
pub fn build_far(
    drafts: Vec<DraftDay>,
    registry: &FeatureRegistry,
    vin_table: &VinTable,
    thresholds: &RouteThresholds,
) -> Far {
    let features: Vec<String> = registry
        .explainable_numeric()
        .into_iter()
        .map(str::to_string)
        .collect();

    let mut vins: BTreeMap<&str, &(DateTime<FixedOffset>, String)> = BTreeMap::new();
    for d in &drafts {
        if let Some(v) = &d.vin {
            let e = vins.entry(d.vehicle_id.as_str()).or_insert(v);
            if v > *e {
                *e = v;
            }
        }
    }
    let groups: BTreeMap<String, String> = vins
        .into_iter()
        .map(|(id, (_, vin))| (id.to_string(), decode_vehicle_group(vin, vin_table)))
        .collect();

    let ptc_col = features.iter().position(|f| f == PER_TIME_CITY);
    let kms_col = features.iter().position(|f| f == TRIP_KMS);
    let rows = drafts
        .iter()
        .map(|d| {
            let mut values: Vec<f64> = features
                .iter()
                .map(|f| d.values.get(f).copied().unwrap_or(f64::NAN))
                .collect();
            if let (Some(c), Some(city), Some(total)) = (ptc_col, d.city_duration, d.driving_duration)
            {
                if total > 0.0 {
                    values[c] = city / total;
                }
            }
            let kms = kms_col.map_or(f64::NAN, |c| values[c]);
            let ptc = ptc_col.map_or(f64::NAN, |c| values[c]);
            let fuel = d.trip_fuel_used.and_then(|f| compute_fuel(f, kms));
            let route_type = if ptc.is_nan() || kms.is_nan() {
                RouteType::Combined
            } else {
                assign_route_type(ptc, kms, thresholds)
            };
            FarRow {
                vehicle_id: d.vehicle_id.clone(),
                date: d.date,
                vehicle_group: groups
                    .get(&d.vehicle_id)
                    .cloned()
                    .unwrap_or_else(|| "unknown".to_string()),
                route_type,
                values,
                fuel_consumption: fuel,
                imputed: BTreeSet::new(),
            }
        })
        .collect();
    let mut far = Far { features, rows };
    far.sort_rows();
    far
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_raw;

    fn aggregate(lines: &str) -> Vec<DraftDay> {
        let txt = format!("time_tx,vehicle_id,variable_id,variable_value\n{lines}");
        let parsed = parse_raw(txt.as_bytes()).unwrap();
        aggregate_daily(&parsed.records, &FeatureRegistry::builtin()).0
    }

    #[test]
    fn sums_trip_fuel() {
        let d = aggregate(
            "2020-10-31 08:00:00+00:00,v1,trip_fuel_used,1.5\n\
             2020-10-31 17:00:00+00:00,v1,trip_fuel_used,1.6\n",
        );
        assert_eq!(d.len(), 1);
        assert!((d[0].trip_fuel_used.unwrap() - 3.1).abs() < 1e-12);
    }

    #[test]
    fn fuel_needs_distance() {
        let d = aggregate("2020-10-31 08:00:00+00:00,v1,trip_fuel_used,3.1\n");
        let far = build_far(d, &FeatureRegistry::builtin(), &VinTable::default(), &Default::default());
        assert_eq!(far.rows[0].fuel_consumption, None);
    }

    #[test]
    fn odometer_takes_max() {
        let d = aggregate(
            "2020-10-31 08:00:00+00:00,v1,total_odometer,100\n\
             2020-10-31 09:00:00+00:00,v1,total_odometer,250\n",
        );
        assert_eq!(d[0].values["total_odometer"], 250.0);
    }

    #[test]
    fn unknown_variable_counted() {
        let txt = "time_tx,vehicle_id,variable_id,variable_value\n\
                   2020-10-31 00:02:34.073000+00:00,b123,EngineSpeed,1200\n";
        let parsed = parse_raw(txt.as_bytes()).unwrap();
        let (d, rep) = aggregate_daily(&parsed.records, &FeatureRegistry::builtin());
        assert!(d.is_empty());
        assert_eq!(rep.ignored["EngineSpeed"], 1);
    }

    #[test]
    fn day_boundary_is_utc() {
        let d = aggregate(
            "2020-10-31 23:30:00-02:00,v1,harsh_brakes_events,1\n\
             2020-11-01 00:30:00+00:00,v1,harsh_brakes_events,1\n",
        );
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].date, NaiveDate::from_ymd_opt(2020, 11, 1).unwrap());
        assert_eq!(d[0].values["harsh_brakes_events"], 2.0);
    }

    #[test]
    fn fuel_formula() {
        assert!((compute_fuel(3.1, 50.0).unwrap() - 6.2).abs() < 1e-12);
        assert_eq!(compute_fuel(8.0, 100.0), Some(8.0));
        assert_eq!(compute_fuel(5.0, 0.0), None);
        assert_eq!(compute_fuel(5.0, -1.0), None);
    }

    #[test]
    fn route_rules() {
        let th = RouteThresholds::default();
        assert_eq!(assign_route_type(0.3, 100.0, &th), RouteType::Hwy);
        assert_eq!(assign_route_type(0.8, 10.0, &th), RouteType::City);
        assert_eq!(assign_route_type(0.6, 50.0, &th), RouteType::Combined);
        // boundaries are inclusive
        assert_eq!(assign_route_type(0.5, 30.0, &th), RouteType::Hwy);
        assert_eq!(assign_route_type(0.65, 30.0, &th), RouteType::City);
    }

    #[test]
    fn build_far_derives_city_share_and_group() {
        let d = aggregate(
            "2020-10-31 08:00:00+00:00,v1,trip_fuel_used,3.1\n\
             2020-10-31 08:00:00+00:00,v1,trip_kms,50\n\
             2020-10-31 08:00:00+00:00,v1,city_driving_duration,0.25\n\
             2020-10-31 08:00:00+00:00,v1,driving_duration,1.0\n\
             2020-10-31 08:00:00+00:00,v1,vin,WVWZZZ1KZ8W000001\n",
        );
        let table = VinTable::new([("WVW".to_string(), "vw_golf_2018".to_string())]);
        let far = build_far(d, &FeatureRegistry::builtin(), &table, &Default::default());
        let r = &far.rows[0];
        assert_eq!(r.vehicle_group, "vw_golf_2018");
        assert_eq!(far.value(0, PER_TIME_CITY), Some(0.25));
        assert_eq!(r.route_type, RouteType::Hwy);
        assert!((r.fuel_consumption.unwrap() - 6.2).abs() < 1e-12);
    }
}

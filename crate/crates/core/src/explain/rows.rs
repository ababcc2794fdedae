use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyLabel;
use crate::error::{Error, Result};
use crate::far::{Far, RouteType};
use crate::model::FuelModel;

/// One feature's relevance for one anomalous vehicle-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRow {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub feature: String,
    pub feature_value: f64,
    pub relevance: f64,
    pub y_pred: f64,
    pub y_real: f64,
    pub intercept: f64,
}

impl ExplanationRow {
    pub fn day(&self) -> (&str, NaiveDate) {
        (&self.vehicle_id, self.date)
    }
}

/// Relevance of every model column for each `outlier_high` row.
pub fn raw_explanations(
    model: &FuelModel,
    far: &Far,
    labels: &[AnomalyLabel],
) -> Result<Vec<ExplanationRow>> {
    if labels.len() != far.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} FAR rows",
            labels.len(),
            far.len()
        )));
    }
    let columns = model.columns();
    let mut out = Vec::new();
    for (row, label) in far.rows.iter().zip(labels) {
        if *label != AnomalyLabel::OutlierHigh {
            continue;
        }
        let x = model.layout.encode_row(far, row)?;
        let e = model.explain_row(far, row)?;
        for ((f, v), r) in columns.iter().zip(x).zip(&e.relevance) {
            out.push(ExplanationRow {
                vehicle_id: row.vehicle_id.clone(),
                date: row.date,
                vehicle_group: row.vehicle_group.clone(),
                route_type: row.route_type,
                feature: f.clone(),
                feature_value: v,
                relevance: *r,
                y_pred: e.prediction,
                y_real: row.fuel(),
                intercept: e.intercept,
            });
        }
    }
    Ok(out)
}

const HEADER: [&str; 10] = [
    "vehicle_id",
    "date_tx",
    "vehicle_group",
    "route_type",
    "feature",
    "feature_value",
    "relevance",
    "y_pred",
    "y_real",
    "intercept",
];

pub fn write_explanations_csv<W: Write>(rows: &[ExplanationRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.vehicle_id.clone(),
            r.date.to_string(),
            r.vehicle_group.clone(),
            r.route_type.to_string(),
            r.feature.clone(),
            r.feature_value.to_string(),
            r.relevance.to_string(),
            r.y_pred.to_string(),
            r.y_real.to_string(),
            r.intercept.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_explanations_csv<R: Read>(reader: R) -> Result<Vec<ExplanationRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().take(9).ne(HEADER.iter().take(9).copied()) {
        return Err(Error::MissingHeader("explanations file"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let perr = |m: String| Error::Parse {
            context: "explanations file",
            line,
            message: m,
        };
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| perr("missing column".into()))?
                .parse::<f64>()
                .map_err(|e| perr(e.to_string()))
        };
        out.push(ExplanationRow {
            vehicle_id: rec[0].to_string(),
            date: NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| perr(e.to_string()))?,
            vehicle_group: rec[2].to_string(),
            route_type: rec[3].parse()?,
            feature: rec[4].to_string(),
            feature_value: num(5)?,
            relevance: num(6)?,
            y_pred: num(7)?,
            y_real: num(8)?,
            intercept: if rec.len() > 9 { num(9)? } else { f64::NAN },
        });
    }
    Ok(out)
}

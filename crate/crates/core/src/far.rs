//! The Fleet Analytics Record: one row per vehicle-day.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteType {
    City,
    Hwy,
    Combined,
}

impl RouteType {
    pub const ALL: [RouteType; 3] = [RouteType::City, RouteType::Combined, RouteType::Hwy];

    pub fn as_str(self) -> &'static str {
        match self {
            RouteType::City => "city",
            RouteType::Hwy => "hwy",
            RouteType::Combined => "combined",
        }
    }
}

impl fmt::Display for RouteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RouteType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "city" => Ok(RouteType::City),
            "hwy" => Ok(RouteType::Hwy),
            "combined" => Ok(RouteType::Combined),
            other => Err(Error::InvalidArgument(format!("unknown route type `{other}`"))),
        }
    }
}

/// One vehicle-day. Missing feature values are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FarRow {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub values: Vec<f64>,
    pub fuel_consumption: Option<f64>,
    pub imputed: BTreeSet<String>,
}

impl FarRow {
    pub fn key(&self) -> (&str, NaiveDate) {
        (&self.vehicle_id, self.date)
    }

    /// Fuel target; rows without one never leave cleaning.
    pub fn fuel(&self) -> f64 {
        self.fuel_consumption.unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Far {
    pub features: Vec<String>,
    pub rows: Vec<FarRow>,
}

const FIXED_COLUMNS: [&str; 5] = [
    "vehicle_id",
    "date_tx",
    "vehicle_group",
    "route_type",
    "fuel_consumption",
];

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

impl Far {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn value(&self, row: usize, feature: &str) -> Option<f64> {
        let c = self.column(feature)?;
        let v = self.rows[row].values[c];
        (!v.is_nan()).then_some(v)
    }

    /// Column values with missing entries skipped.
    pub fn observed(&self, col: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.values[col])
            .filter(|v| !v.is_nan())
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Far {
        Far {
            features: self.features.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_features(&self, keep: &[String]) -> Far {
        let cols: Vec<usize> = keep.iter().filter_map(|k| self.column(k)).collect();
        Far {
            features: cols.iter().map(|&c| self.features[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let mut row = r.clone();
                    row.values = cols.iter().map(|&c| r.values[c]).collect();
                    row.imputed.retain(|f| keep.contains(f));
                    row
                })
                .collect(),
        }
    }

    pub fn sort_rows(&mut self) {
        self.rows
            .sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id).then(a.date.cmp(&b.date)));
    }

    /// Map from (vehicle, date) to row index.
    pub fn index(&self) -> BTreeMap<(String, NaiveDate), usize> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.vehicle_id.clone(), r.date), i))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = FIXED_COLUMNS
            .iter()
            .copied()
            .chain(self.features.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.vehicle_id.clone(),
                r.date.to_string(),
                r.vehicle_group.clone(),
                r.route_type.to_string(),
                r.fuel_consumption.map(|f| f.to_string()).unwrap_or_default(),
            ];
            rec.extend(r.values.iter().map(|&v| fmt_opt(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Companion file: 1 where the value was missing before imputation.
    pub fn write_mask_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = ["vehicle_id", "date_tx"]
            .into_iter()
            .chain(self.features.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.vehicle_id.clone(), r.date.to_string()];
            rec.extend(
                self.features
                    .iter()
                    .map(|f| if r.imputed.contains(f) { "1" } else { "0" }.to_string()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Far> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < FIXED_COLUMNS.len()
            || headers.iter().zip(FIXED_COLUMNS).any(|(h, e)| h != e)
        {
            return Err(Error::MissingHeader("FAR file"));
        }
        let features: Vec<String> = headers.iter().skip(5).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let perr = |message: String| Error::Parse {
                context: "FAR file",
                line,
                message,
            };
            let num = |s: &str| -> Result<f64> {
                if s.is_empty() {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>().map_err(|e| perr(format!("`{s}`: {e}")))
                }
            };
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|e| perr(format!("date `{}`: {e}", &rec[1])))?;
            let fuel = num(&rec[4])?;
            let values = (5..rec.len()).map(|k| num(&rec[k])).collect::<Result<Vec<_>>>()?;
            if values.len() != features.len() {
                return Err(perr("column count does not match header".into()));
            }
            rows.push(FarRow {
                vehicle_id: rec[0].to_string(),
                date,
                vehicle_group: rec[2].to_string(),
                route_type: rec[3].parse()?,
                values,
                fuel_consumption: (!fuel.is_nan()).then_some(fuel),
                imputed: BTreeSet::new(),
            });
        }
        Ok(Far { features, rows })
    }

    /// Applies a mask file written by [`Far::write_mask_csv`].
    pub fn apply_mask_csv<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let index = self.index();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| Error::Parse {
                context: "FAR mask file",
                line: i + 2,
                message: e.to_string(),
            })?;
            if let Some(&row) = index.get(&(rec[0].to_string(), date)) {
                for (k, name) in names.iter().enumerate() {
                    if rec.get(k + 2) == Some("1") {
                        self.rows[row].imputed.insert(name.clone());
                    }
                }
            }
        }
        Ok(())
    }
}

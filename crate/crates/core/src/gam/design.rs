//! Mapping from FAR rows to the model's numeric design matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::{Far, FarRow};
use crate::registry::{ROUTE_TYPE, VEHICLE_GROUP};

/// Indicator columns for one categorical feature, levels in lexical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotBlock {
    pub categorical: String,
    pub levels: Vec<String>,
}

/// Numeric FAR columns followed by one-hot blocks in the given categorical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub numeric: Vec<String>,
    pub one_hot: Vec<OneHotBlock>,
}

pub(crate) fn categorical_value(row: &FarRow, name: &str) -> Result<String> {
    match name {
        VEHICLE_GROUP => Ok(row.vehicle_group.clone()),
        ROUTE_TYPE => Ok(row.route_type.to_string()),
        other => Err(Error::UnknownFeature(other.to_string())),
    }
}

impl DesignLayout {
    /// Categoricals a FAR row carries and the layout can encode.
    pub const CATEGORICALS: [&'static str; 2] = [VEHICLE_GROUP, ROUTE_TYPE];

    pub fn fit(far: &Far, numeric: &[String], categorical: &[&str]) -> Result<Self> {
        for f in numeric {
            if far.column(f).is_none() {
                return Err(Error::MissingFeature(f.clone()));
            }
        }
        let mut one_hot = Vec::new();
        for &cat in categorical {
            let mut levels = far
                .rows
                .iter()
                .map(|r| categorical_value(r, cat))
                .collect::<Result<Vec<_>>>()?;
            levels.sort();
            levels.dedup();
            one_hot.push(OneHotBlock {
                categorical: cat.to_string(),
                levels,
            });
        }
        Ok(Self {
            numeric: numeric.to_vec(),
            one_hot,
        })
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = self.numeric.clone();
        for b in &self.one_hot {
            cols.extend(b.levels.iter().map(|l| format!("{}={}", b.categorical, l)));
        }
        cols
    }

    /// Registry feature a design column derives from.
    pub fn source_feature(column: &str) -> &str {
        column.split_once('=').map_or(column, |(f, _)| f)
    }

    pub fn encode_row(&self, far: &Far, row: &FarRow) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.numeric.len());
        for f in &self.numeric {
            let c = far.column(f).ok_or_else(|| Error::MissingFeature(f.clone()))?;
            let v = row.values[c];
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "`{f}` of ({}, {}); impute before modelling",
                    row.vehicle_id, row.date
                )));
            }
            out.push(v);
        }
        for b in &self.one_hot {
            let v = categorical_value(row, &b.categorical)?;
            out.extend(b.levels.iter().map(|l| if *l == v { 1.0 } else { 0.0 }));
        }
        Ok(out)
    }

    pub fn encode(&self, far: &Far) -> Result<Vec<Vec<f64>>> {
        far.rows.iter().map(|r| self.encode_row(far, r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::far::RouteType;
    use chrono::NaiveDate;

    fn row(g: &str, r: RouteType, v: f64) -> FarRow {
        FarRow {
            vehicle_id: "v".into(),
            date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            vehicle_group: g.into(),
            route_type: r,
            values: vec![v],
            fuel_consumption: Some(6.0),
            imputed: Default::default(),
        }
    }

    #[test]
    fn one_hot_order_and_encoding() {
        let far = Far {
            features: vec!["a".into()],
            rows: vec![row("z", RouteType::Hwy, 1.0), row("b", RouteType::City, 2.0)],
        };
        let l = DesignLayout::fit(&far, &["a".into()], &[VEHICLE_GROUP, ROUTE_TYPE]).unwrap();
        assert_eq!(
            l.columns(),
            vec!["a", "vehicle_group=b", "vehicle_group=z", "route_type=city", "route_type=hwy"]
        );
        assert_eq!(l.encode_row(&far, &far.rows[0]).unwrap(), vec![1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(DesignLayout::source_feature("vehicle_group=b"), "vehicle_group");
        assert_eq!(DesignLayout::source_feature("a"), "a");
    }

    #[test]
    fn missing_value_is_an_error() {
        let far = Far {
            features: vec!["a".into()],
            rows: vec![row("z", RouteType::Hwy, f64::NAN)],
        };
        let l = DesignLayout::fit(&far, &["a".into()], &[]).unwrap();
        assert!(l.encode(&far).is_err());
    }
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::xai::DayContrast;
use crate::error::{Error, Result};
use crate::far::RouteType;

/// Manufacturer fuel reference per (vehicle_group, route_type), L/100 km.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    pub entries: BTreeMap<(String, RouteType), f64>,
}

impl Catalog {
    pub fn get(&self, vehicle_group: &str, route_type: RouteType) -> Option<f64> {
        self.entries.get(&(vehicle_group.to_string(), route_type)).copied()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(["vehicle_group", "route_type", "fuel_l_100km"]) {
            return Err(Error::MissingHeader("catalog file"));
        }
        let mut entries = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let v: f64 = rec[2].parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
                context: "catalog file",
                line: i + 2,
                message: e.to_string(),
            })?;
            entries.insert((rec[0].to_string(), rec[1].parse()?), v);
        }
        Ok(Self { entries })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["vehicle_group", "route_type", "fuel_l_100km"])?;
        for ((g, r), v) in &self.entries {
            w.write_record([g.clone(), r.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogCheck {
    pub mape_vs_catalog: f64,
    pub pct_below_catalog: f64,
    pub n_checked: usize,
    pub n_missing: usize,
}

/// MAPE of the updated fuel against the catalog and the share of days whose
/// updated fuel lies more than `offset` below it.
pub fn catalog_checks(contrast: &[DayContrast], catalog: &Catalog, offset: f64) -> CatalogCheck {
    let mut abs_pct = 0.0;
    let mut below = 0usize;
    let mut n = 0usize;
    let mut missing = 0usize;
    for c in contrast {
        let Some(cat) = catalog.get(&c.vehicle_group, c.route_type) else {
            missing += 1;
            continue;
        };
        n += 1;
        abs_pct += (c.y_updated_all - cat).abs() / cat;
        below += usize::from(c.y_updated_all < cat - offset);
    }
    if missing > 0 {
        log::warn!("{missing} vehicle-days have no catalog reference");
    }
    let frac = |x: f64| if n > 0 { x / n as f64 } else { 0.0 };
    CatalogCheck {
        mape_vs_catalog: frac(abs_pct),
        pct_below_catalog: frac(below as f64),
        n_checked: n,
        n_missing: missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day(y: f64) -> DayContrast {
        DayContrast {
            vehicle_id: "v".into(),
            date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            vehicle_group: "g".into(),
            route_type: RouteType::Hwy,
            y_real: 9.0,
            y_updated_all: y,
            per_var: 0.0,
            below: false,
        }
    }

    #[test]
    fn offset_arithmetic() {
        let cat = Catalog {
            entries: BTreeMap::from([(("g".to_string(), RouteType::Hwy), 6.5)]),
        };
        let c = catalog_checks(&[day(5.0)], &cat, 1.0);
        assert_eq!(c.pct_below_catalog, 1.0);
        let c = catalog_checks(&[day(6.5), day(6.5)], &cat, 1.0);
        assert_eq!((c.mape_vs_catalog, c.pct_below_catalog), (0.0, 0.0));
        let c = catalog_checks(&[day(5.6)], &cat, 1.0);
        assert_eq!(c.pct_below_catalog, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let cat = Catalog {
            entries: BTreeMap::from([(("g".to_string(), RouteType::City), 7.25)]),
        };
        let mut buf = Vec::new();
        cat.write_csv(&mut buf).unwrap();
        assert_eq!(Catalog::read_csv(buf.as_slice()).unwrap(), cat);
    }
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn check_pairs(pred: &[f64], real: &[f64]) -> Result<()> {
    if pred.len() != real.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            pred.len(),
            real.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("metric over no rows".into()));
    }
    Ok(())
}

/// Mean absolute percentage error as a fraction.
pub fn mape(pred: &[f64], real: &[f64]) -> Result<f64> {
    check_pairs(pred, real)?;
    if real.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("MAPE needs positive targets".into()));
    }
    Ok(pred.iter().zip(real).map(|(p, r)| (p - r).abs() / r).sum::<f64>() / pred.len() as f64)
}

/// MAPE per vehicle, then averaged over vehicles.
pub fn mape_by_vehicle(pred: &[f64], real: &[f64], vehicle: &[&str]) -> Result<f64> {
    check_pairs(pred, real)?;
    if vehicle.len() != pred.len() {
        return Err(Error::InvalidArgument("one vehicle id per row required".into()));
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((p, r), v) in pred.iter().zip(real).zip(vehicle) {
        let g = groups.entry(v).or_default();
        g.0.push(*p);
        g.1.push(*r);
    }
    let per: Vec<f64> = groups
        .values()
        .map(|(p, r)| mape(p, r))
        .collect::<Result<_>>()?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

pub fn r2(pred: &[f64], real: &[f64]) -> Result<f64> {
    check_pairs(pred, real)?;
    let m = real.iter().sum::<f64>() / real.len() as f64;
    let ss_tot: f64 = real.iter().map(|r| (r - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument("R² of a constant target".into()));
    }
    let ss_res: f64 = pred.iter().zip(real).map(|(p, r)| (r - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// R² adjusted for `p` predictors.
pub fn adj_r2(pred: &[f64], real: &[f64], p: usize) -> Result<f64> {
    let n = real.len();
    if n <= p + 1 {
        return Err(Error::InvalidArgument(format!("adjusted R² needs n > p + 1 (n {n}, p {p})")));
    }
    let r2 = r2(pred, real)?;
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p - 1) as f64)
}

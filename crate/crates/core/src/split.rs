//! Train/test partition of a FAR.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::Far;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Last dates of every vehicle go to the test side.
    #[default]
    Chronological,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            mode: SplitMode::Chronological,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Row indices of each side, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Last training date, useful to scope medians to the training range.
    pub fn train_dates(&self, far: &Far) -> Option<(NaiveDate, NaiveDate)> {
        let dates = self.train.iter().map(|&i| far.rows[i].date);
        let lo = dates.clone().min()?;
        Some((lo, dates.max()?))
    }
}

pub fn split_far(far: &Far, cfg: &SplitConfig) -> Result<Split> {
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::Config(format!(
            "test_fraction must lie in [0, 1), got {}",
            cfg.test_fraction
        )));
    }
    let mut is_test = vec![false; far.len()];
    match cfg.mode {
        SplitMode::Chronological => {
            let mut by_vehicle: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in far.rows.iter().enumerate() {
                by_vehicle.entry(&r.vehicle_id).or_default().push(i);
            }
            for idx in by_vehicle.values_mut() {
                idx.sort_by_key(|&i| far.rows[i].date);
                let n_test = (idx.len() as f64 * cfg.test_fraction).round() as usize;
                for &i in &idx[idx.len() - n_test..] {
                    is_test[i] = true;
                }
            }
        }
        SplitMode::Random => {
            let mut idx: Vec<usize> = (0..far.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
            let n_test = (far.len() as f64 * cfg.test_fraction).round() as usize;
            for &i in &idx[..n_test] {
                is_test[i] = true;
            }
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..far.len()).partition(|&i| is_test[i]);
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::far::{FarRow, RouteType};

    fn far() -> Far {
        let mut rows = Vec::new();
        for v in ["b", "a"] {
            for d in (1..=20).rev() {
                rows.push(FarRow {
                    vehicle_id: v.to_string(),
                    date: NaiveDate::from_ymd_opt(2023, 3, d).unwrap(),
                    vehicle_group: "g".into(),
                    route_type: RouteType::City,
                    values: vec![],
                    fuel_consumption: Some(1.0),
                    imputed: Default::default(),
                });
            }
        }
        Far { features: vec![], rows }
    }

    #[test]
    fn chronological_takes_last_dates_per_vehicle() {
        let f = far();
        let s = split_far(&f, &SplitConfig::default()).unwrap();
        assert_eq!(s.test.len(), 4);
        for &i in &s.test {
            assert!(f.rows[i].date.format("%d").to_string().as_str() >= "19");
        }
        assert_eq!(s.train.len() + s.test.len(), f.len());
    }

    #[test]
    fn random_is_seeded() {
        let f = far();
        let cfg = SplitConfig {
            mode: SplitMode::Random,
            test_fraction: 0.25,
            seed: 3,
        };
        let a = split_far(&f, &cfg).unwrap();
        assert_eq!(a, split_far(&f, &cfg).unwrap());
        assert_eq!(a.test.len(), 10);
        assert!(split_far(&f, &SplitConfig { test_fraction: 1.0, ..cfg }).is_err());
    }
}

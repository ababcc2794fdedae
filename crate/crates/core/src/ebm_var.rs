//! Base additive model plus per-subgroup models of its residuals.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::{train_gam, Explanation, GamConfig, GamModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmVarModel {
    pub base: GamModel,
    /// Categorical features whose value combination selects an error model.
    pub subgroup_keys: Vec<String>,
    /// Error models keyed by subgroup combination (values joined with `|`).
    pub error_models: BTreeMap<String, GamModel>,
    pub threshold: usize,
}

/// Trains the base on every row, then one residual model per subgroup with at
/// least `threshold` rows. `subgroups[i]` is the combination of row `i`.
pub fn train_ebm_var(
    x: &[Vec<f64>],
    y: &[f64],
    features: &[String],
    subgroups: &[String],
    subgroup_keys: &[String],
    threshold: usize,
    cfg: &GamConfig,
) -> Result<EbmVarModel> {
    if threshold < 2 {
        return Err(Error::Config(format!("th_ebm_var must be ≥ 2, got {threshold}")));
    }
    if subgroups.len() != x.len() {
        return Err(Error::InvalidArgument(format!(
            "{} subgroup labels for {} rows",
            subgroups.len(),
            x.len()
        )));
    }
    let base = train_gam(x, y, features, cfg)?;
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in subgroups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    let mut jobs = Vec::new();
    for (g, rows) in members {
        if rows.len() < threshold {
            log::info!("subgroup `{g}` has {} rows, below {threshold}; base only", rows.len());
            continue;
        }
        let xs: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
        let errs = rows
            .iter()
            .map(|&i| base.predict(&x[i]).map(|p| y[i] - p))
            .collect::<Result<Vec<f64>>>()?;
        jobs.push((g.to_string(), xs, errs));
    }
    let trained: Vec<(String, Result<GamModel>)> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(g, xs, errs)| {
                s.spawn(move || (g.clone(), train_gam(xs, errs, features, cfg)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("error-model training panicked"))
            .collect()
    });
    let mut error_models = BTreeMap::new();
    for (g, m) in trained {
        error_models.insert(g, m?);
    }
    Ok(EbmVarModel {
        base,
        subgroup_keys: subgroup_keys.to_vec(),
        error_models,
        threshold,
    })
}

impl EbmVarModel {
    pub fn subgroups(&self) -> BTreeSet<&str> {
        self.error_models.keys().map(String::as_str).collect()
    }

    /// Base decomposition plus, when the row's subgroup has one, the error
    /// model's decomposition added feature-wise.
    pub fn explain(&self, row: &[f64], subgroup: &str) -> Result<Explanation> {
        let base = self.base.explain(row)?;
        let Some(err) = self.error_models.get(subgroup) else {
            return Ok(base);
        };
        let e = err.explain(row)?;
        let relevance = base.relevance.iter().zip(&e.relevance).map(|(a, b)| a + b).collect();
        Ok(Explanation::from_parts(base.intercept + e.intercept, relevance))
    }

    pub fn predict(&self, row: &[f64], subgroup: &str) -> Result<f64> {
        Ok(self.explain(row, subgroup)?.prediction)
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::shape::ShapeFunction;
use crate::error::{Error, Result};

/// Provenance of a trained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Training rows per bin, keyed by feature.
    pub bin_counts: BTreeMap<String, Vec<u64>>,
    pub learning_rate: f64,
    pub max_bins: usize,
    /// Rounds actually run on the final fit.
    pub rounds: usize,
    pub inner_bags: usize,
    pub n_rows: usize,
    /// SHA-256 of the training matrix and target.
    pub data_hash: String,
}

/// Additive decomposition of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub intercept: f64,
    /// Relevance per feature, aligned with the model's feature order.
    pub relevance: Vec<f64>,
    pub prediction: f64,
}

impl Explanation {
    pub fn from_parts(intercept: f64, relevance: Vec<f64>) -> Self {
        let prediction = intercept + relevance.iter().sum::<f64>();
        Self {
            intercept,
            relevance,
            prediction,
        }
    }
}

/// Intercept plus one shape function per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub intercept: f64,
    pub feature_order: Vec<String>,
    pub shapes: Vec<ShapeFunction>,
    pub meta: TrainingMeta,
}

impl GamModel {
    pub fn from_parts(intercept: f64, shapes: Vec<ShapeFunction>) -> Self {
        Self {
            intercept,
            feature_order: shapes.iter().map(|s| s.feature.clone()).collect(),
            shapes,
            meta: TrainingMeta::default(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.shapes.len()
    }

    pub fn shape(&self, feature: &str) -> Option<&ShapeFunction> {
        self.shapes.iter().find(|s| s.feature == feature)
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.shapes.len() {
            return Err(Error::FeatureCount {
                expected: self.shapes.len(),
                got: row.len(),
            });
        }
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature `{}`", self.feature_order[i])));
        }
        Ok(())
    }

    /// Per-feature relevance of a row aligned with `feature_order`.
    pub fn contributions(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        Ok(self.shapes.iter().zip(row).map(|(s, &x)| s.eval(x)).collect())
    }

    pub fn explain(&self, row: &[f64]) -> Result<Explanation> {
        Ok(Explanation::from_parts(self.intercept, self.contributions(row)?))
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        Ok(self.explain(row)?.prediction)
    }

    pub fn predict_many(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|r| self.predict(r)).collect()
    }

    /// Aligns a by-name row with `feature_order`.
    pub fn align(&self, row: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        self.feature_order
            .iter()
            .map(|f| row.get(f).copied().ok_or_else(|| Error::MissingFeature(f.clone())))
            .collect()
    }

    pub fn predict_named(&self, row: &BTreeMap<String, f64>) -> Result<f64> {
        self.predict(&self.align(row)?)
    }
}

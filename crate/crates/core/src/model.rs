//! Trained fuel models over a FAR and their versioned file format.
//!
//! A model file is optional `#` comment lines followed by one JSON document:
//!
//! ```text
//! # fuelrec 0.1.0 config_hash=...
//! {"schema_version":"1","mode":"plain","registry_hash":"...",
//!  "layout":{"numeric":[...],"one_hot":[{"categorical":"vehicle_group","levels":[...]}]},
//!  "training":{...},
//!  "model":{"kind":"gam","model":{"intercept":..,"feature_order":[..],"shapes":[..],"meta":{..}}}}
//! ```
//!
//! Each shape carries `feature`, `bin_edges`, `bin_values` and `monotone`
//! (`none`, `increasing`, `decreasing`). An `ebm_var` model holds `base`,
//! `subgroup_keys`, `error_models` and `threshold`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ebm_var::{train_ebm_var, EbmVarModel};
use crate::error::{Error, Result};
use crate::far::{Far, FarRow, RouteType};
use crate::gam::{categorical_value, train_gam, DesignLayout, Explanation, GamConfig, GamModel, Monotone, ShapeFunction};
use crate::registry::{FeatureRegistry, ROUTE_TYPE, VEHICLE_GROUP};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    Plain,
    Monotone,
    EbmVar,
}

impl ModelMode {
    pub const ALL: [ModelMode; 3] = [ModelMode::Plain, ModelMode::Monotone, ModelMode::EbmVar];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelMode::Plain => "plain",
            ModelMode::Monotone => "monotone",
            ModelMode::EbmVar => "ebm_var",
        }
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(ModelMode::Plain),
            "monotone" => Ok(ModelMode::Monotone),
            "ebm_var" => Ok(ModelMode::EbmVar),
            other => Err(Error::Config(format!("unknown model mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub mode: ModelMode,
    pub gam: GamConfig,
    pub th_ebm_var: usize,
    pub subgroup_keys: Vec<String>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            mode: ModelMode::Plain,
            gam: GamConfig::default(),
            th_ebm_var: 100,
            subgroup_keys: vec![VEHICLE_GROUP.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Gam(GamModel),
    EbmVar(EbmVarModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub n_rows: usize,
    pub date_from: Option<NaiveDate>,
    pub date_to: Option<NaiveDate>,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelModel {
    pub schema_version: String,
    pub mode: ModelMode,
    pub registry_hash: String,
    pub layout: DesignLayout,
    pub training: TrainingInfo,
    pub model: FittedModel,
}

/// Monotone direction for every design column with a declared direction.
pub fn monotone_map(
    registry: &FeatureRegistry,
    columns: &[String],
) -> std::collections::BTreeMap<String, Monotone> {
    columns
        .iter()
        .filter(|c| registry.get(c).is_some())
        .map(|c| (c.clone(), Monotone::from(registry.direction(c))))
        .filter(|(_, m)| *m != Monotone::None)
        .collect()
}

fn subgroup_of(row: &FarRow, keys: &[String]) -> Result<String> {
    let parts = keys
        .iter()
        .map(|k| categorical_value(row, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join("|"))
}

/// Trains a model on the FAR's rows using its explainable numeric columns
/// plus one-hot encoded categoricals.
pub fn train_fuel_model(far: &Far, registry: &FeatureRegistry, spec: &ModelSpec) -> Result<FuelModel> {
    if far.is_empty() {
        return Err(Error::EmptyInput("training FAR".into()));
    }
    let numeric: Vec<String> = far
        .features
        .iter()
        .filter(|f| registry.is_explainable(f))
        .cloned()
        .collect();
    let categorical: Vec<&str> = registry
        .categorical()
        .into_iter()
        .filter(|c| DesignLayout::CATEGORICALS.contains(c))
        .collect();
    let layout = DesignLayout::fit(far, &numeric, &categorical)?;
    let columns = layout.columns();
    let x = layout.encode(far)?;
    let y = far
        .rows
        .iter()
        .map(|r| {
            r.fuel_consumption.ok_or_else(|| {
                Error::InvalidArgument(format!("row ({}, {}) has no fuel target", r.vehicle_id, r.date))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    // Monotone mode starts from the registry directions; explicit entries in
    // the GAM config override them. The other modes are unconstrained.
    let mut gam_cfg = spec.gam.clone();
    gam_cfg.monotone = if spec.mode == ModelMode::Monotone {
        let mut m = monotone_map(registry, &columns);
        for (k, v) in &spec.gam.monotone {
            if *v == Monotone::None {
                m.remove(k);
            } else {
                m.insert(k.clone(), *v);
            }
        }
        m
    } else {
        Default::default()
    };
    let model = match spec.mode {
        ModelMode::Plain | ModelMode::Monotone => {
            FittedModel::Gam(train_gam(&x, &y, &columns, &gam_cfg)?)
        }
        ModelMode::EbmVar => {
            let groups = far
                .rows
                .iter()
                .map(|r| subgroup_of(r, &spec.subgroup_keys))
                .collect::<Result<Vec<_>>>()?;
            FittedModel::EbmVar(train_ebm_var(
                &x,
                &y,
                &columns,
                &groups,
                &spec.subgroup_keys,
                spec.th_ebm_var,
                &gam_cfg,
            )?)
        }
    };
    Ok(FuelModel {
        schema_version: SCHEMA_VERSION.to_string(),
        mode: spec.mode,
        registry_hash: registry.content_hash(),
        layout,
        training: TrainingInfo {
            n_rows: far.len(),
            date_from: far.rows.iter().map(|r| r.date).min(),
            date_to: far.rows.iter().map(|r| r.date).max(),
            spec: spec.clone(),
        },
        model,
    })
}

impl FuelModel {
    pub fn columns(&self) -> Vec<String> {
        self.layout.columns()
    }

    pub fn base(&self) -> &GamModel {
        match &self.model {
            FittedModel::Gam(m) => m,
            FittedModel::EbmVar(m) => &m.base,
        }
    }

    pub fn explain_row(&self, far: &Far, row: &FarRow) -> Result<Explanation> {
        let x = self.layout.encode_row(far, row)?;
        match &self.model {
            FittedModel::Gam(m) => m.explain(&x),
            FittedModel::EbmVar(m) => m.explain(&x, &subgroup_of(row, &m.subgroup_keys)?),
        }
    }

    pub fn explain_far(&self, far: &Far) -> Result<Vec<Explanation>> {
        far.rows.iter().map(|r| self.explain_row(far, r)).collect()
    }

    pub fn predict_far(&self, far: &Far) -> Result<Vec<f64>> {
        Ok(self.explain_far(far)?.into_iter().map(|e| e.prediction).collect())
    }

    /// Every shape function of the model, error models included.
    pub fn all_shapes(&self) -> Vec<&ShapeFunction> {
        match &self.model {
            FittedModel::Gam(m) => m.shapes.iter().collect(),
            FittedModel::EbmVar(m) => m
                .base
                .shapes
                .iter()
                .chain(m.error_models.values().flat_map(|e| e.shapes.iter()))
                .collect(),
        }
    }

    /// Subgroup combination of a (vehicle_group, route_type) key, when the
    /// model has error models.
    pub fn subgroup_for(&self, vehicle_group: &str, route_type: RouteType) -> Option<String> {
        let FittedModel::EbmVar(m) = &self.model else {
            return None;
        };
        let parts: Vec<String> = m
            .subgroup_keys
            .iter()
            .map(|k| match k.as_str() {
                ROUTE_TYPE => route_type.to_string(),
                _ => vehicle_group.to_string(),
            })
            .collect();
        Some(parts.join("|"))
    }

    /// Relevance the model assigns to `value` of design column `column` for
    /// rows of the given key, error-model shape included.
    pub fn relevance_at(
        &self,
        column: &str,
        value: f64,
        vehicle_group: &str,
        route_type: RouteType,
    ) -> Result<f64> {
        let base = self
            .base()
            .shape(column)
            .ok_or_else(|| Error::UnknownFeature(column.to_string()))?
            .eval(value);
        let extra = match (&self.model, self.subgroup_for(vehicle_group, route_type)) {
            (FittedModel::EbmVar(m), Some(g)) => m
                .error_models
                .get(&g)
                .and_then(|e| e.shape(column))
                .map_or(0.0, |s| s.eval(value)),
            _ => 0.0,
        };
        Ok(base + extra)
    }

    pub fn check_registry(&self, registry: &FeatureRegistry) -> Result<()> {
        let h = registry.content_hash();
        if h != self.registry_hash {
            return Err(Error::ModelFormat(format!(
                "model was trained with registry {} but {} is loaded",
                self.registry_hash, h
            )));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let columns = self.columns();
        let check = |m: &GamModel| -> Result<()> {
            if m.feature_order != columns || m.shapes.len() != columns.len() {
                return Err(Error::ModelFormat("shape list does not match the layout".into()));
            }
            for (s, f) in m.shapes.iter().zip(&columns) {
                if &s.feature != f {
                    return Err(Error::ModelFormat(format!("shape `{}` out of order", s.feature)));
                }
                ShapeFunction::new(s.feature.clone(), s.bin_edges.clone(), s.bin_values.clone(), s.monotone)?;
            }
            if !m.intercept.is_finite() {
                return Err(Error::NonFinite("model intercept".into()));
            }
            Ok(())
        };
        match &self.model {
            FittedModel::Gam(m) => check(m),
            FittedModel::EbmVar(m) => {
                check(&m.base)?;
                m.error_models.values().try_for_each(check)
            }
        }
    }

    pub fn write<W: Write>(&self, mut writer: W, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(writer, "{h}")?;
        }
        serde_json::to_writer(&mut writer, self)
            .map_err(|e| Error::ModelFormat(format!("cannot serialize: {e}")))?;
        writeln!(writer)?;
        Ok(())
    }

    pub fn read<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let body: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let value: serde_json::Value = serde_json::from_str(&body)
            .map_err(|e| Error::ModelFormat(format!("corrupted payload: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_str()) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other.to_string(),
                    expected: SCHEMA_VERSION.to_string(),
                })
            }
            None => return Err(Error::ModelFormat("missing schema_version".into())),
        }
        let model: FuelModel = serde_json::from_value(value)
            .map_err(|e| Error::ModelFormat(format!("corrupted payload: {e}")))?;
        model.validate()?;
        Ok(model)
    }
}

//! Interpretable fuel-consumption analytics: telemetry aggregation, anomaly
//! labelling, additive models with per-feature shape functions, explanation
//! filtering, savings recommendations and explanation-quality metrics.

pub mod anomaly;
pub mod ebm_var;
pub mod error;
pub mod explain;
pub mod far;
pub mod gam;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod recommend;
pub mod registry;
pub mod split;
pub mod stats;
pub mod synth;

pub use anomaly::{AnomalyConfig, AnomalyLabel, AnomalyLimitTable, BoxplotLimits};
pub use error::{Error, Result};
pub use far::{Far, FarRow, RouteType};
pub use registry::{Direction, FeatureGroup, FeatureRegistry, FeatureSpec};

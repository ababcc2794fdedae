//! Additive model with binned per-feature shape functions.

mod binning;
mod design;
mod model;
mod shape;
mod train;

pub use binning::{bin_edges, bin_features, bin_index};
pub use design::{DesignLayout, OneHotBlock};
pub(crate) use design::categorical_value;
pub use model::{Explanation, GamModel, TrainingMeta};
pub use shape::{apply_monotone_constraint, pava_increasing, Monotone, ShapeFunction};
pub use train::{train_gam, EarlyStopping, GamConfig};

//! Model accuracy, explanation-quality metrics, catalog checks and
//! rank-based comparisons between model modes.

mod catalog;
mod contrast;
mod gamma;
mod kruskal;
mod performance;
mod report;
mod xai;

pub use catalog::{catalog_checks, Catalog, CatalogCheck};
pub use contrast::{contrast_table, write_contrast_csv, ContrastRow};
pub use gamma::{chi2_sf, gamma_p, gamma_q, ln_gamma};
pub use kruskal::{kruskal_wallis, KruskalWallis};
pub use performance::{adj_r2, mape, mape_by_vehicle, r2};
pub use report::{MetricRecord, MetricsReport};
pub use xai::{
    contrastiveness, per_below, per_below_single, per_mon, representativeness, stability_error,
    standardize, xai_mape, DayContrast, DayExplanation, PerMon, StabilityPoint,
};

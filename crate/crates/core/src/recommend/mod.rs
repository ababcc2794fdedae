//! Counterfactual fuel savings from moving features to inlier references.

mod daily;
mod fleet;
mod reference;
mod summary;

use std::collections::BTreeMap;

use chrono::NaiveDate;

pub use daily::{
    get_recom, group_delta, write_group_recommendations_csv, write_recommendations_csv,
    GroupRecommendation, RecommendationRow,
};
pub use fleet::{fleet_manager_view, write_fleet_csv, FleetRow};
pub use reference::{reference_coefficients, reference_for, Reference};
pub use summary::{
    filter_points, get_summ_recom, prototype, Summary, SummaryAggregate, SummaryConfig, SummaryRow,
};

use crate::far::Far;
use crate::registry::TRIP_KMS;

/// Trip distance per (vehicle_id, date).
pub type DayKms = BTreeMap<(String, NaiveDate), f64>;

/// Trip distance of every FAR row that has one.
pub fn day_kms(far: &Far) -> DayKms {
    let Some(c) = far.column(TRIP_KMS) else {
        return DayKms::new();
    };
    far.rows
        .iter()
        .filter(|r| r.values[c].is_finite())
        .map(|r| ((r.vehicle_id.clone(), r.date), r.values[c]))
        .collect()
}

//! Raw telematics events to a cleaned, imputed FAR.

mod aggregate;
mod clean;
mod medians;
mod raw;
mod vin;

pub use aggregate::{
    aggregate_daily, assign_route_type, build_far, compute_fuel, variable_rule, Aggregation,
    AggregationReport, DraftDay, RouteThresholds, VariableTarget,
};
pub use clean::{clean_far, CleaningConfig, CleaningReport, ExclusionReason};
pub use medians::{
    compute_group_medians, impute_missing, GroupMedians, ImputeReport, MedianKey, MedianKeys,
    MedianScope,
};
pub use raw::{parse_raw, write_raw, ParsedRaw, RawTelemetryRecord, RawValue};
pub use vin::{decode_vehicle_group, VinTable};

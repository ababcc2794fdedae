use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::RouteType;
use crate::gam::DesignLayout;
use crate::ingest::GroupMedians;
use crate::model::FuelModel;
use crate::registry::FeatureRegistry;

/// Reference point of one feature for one (vehicle_group, route_type).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub value: f64,
    /// Relevance of `value` under the model (β).
    pub beta: f64,
    /// The key had no median and the global inlier median was used.
    pub global_fallback: bool,
}

/// Reference of `feature`: zero for zero-reference features, else the key's
/// inlier median.
pub fn reference_for(
    model: &FuelModel,
    medians: &GroupMedians,
    registry: &FeatureRegistry,
    vehicle_group: &str,
    route_type: RouteType,
    feature: &str,
) -> Result<Reference> {
    let source = DesignLayout::source_feature(feature);
    let (value, global_fallback) = if registry.is_zero_reference(source) {
        (0.0, false)
    } else {
        let (m, fb) = medians
            .get_or_global(vehicle_group, route_type, feature)
            .ok_or_else(|| Error::MissingFeature(format!("{feature} (no inlier median)")))?;
        if fb {
            log::warn!("no inlier median of `{feature}` for ({vehicle_group}, {route_type}); using the global one");
        }
        (m, fb)
    };
    Ok(Reference {
        value,
        beta: model.relevance_at(feature, value, vehicle_group, route_type)?,
        global_fallback,
    })
}

/// β for every median key and every actionable model column.
pub fn reference_coefficients(
    model: &FuelModel,
    medians: &GroupMedians,
    registry: &FeatureRegistry,
) -> Result<BTreeMap<(String, RouteType, String), Reference>> {
    let features: Vec<String> = model
        .columns()
        .into_iter()
        .filter(|c| registry.is_actionable(c))
        .collect();
    let mut out = BTreeMap::new();
    for key in medians.by_key.keys() {
        let routes: Vec<RouteType> = match key.route_type {
            Some(r) => vec![r],
            None => RouteType::ALL.to_vec(),
        };
        for r in routes {
            for f in &features {
                let reference = reference_for(model, medians, registry, &key.vehicle_group, r, f)?;
                out.insert((key.vehicle_group.clone(), r, f.clone()), reference);
            }
        }
    }
    Ok(out)
}

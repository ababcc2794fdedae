//! Feature catalog: names, groups, direction types, zero-reference
//! membership, actionability and units for every FAR column.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Index,
    Categorical,
    VehicleParameters,
    DrivingBehaviour,
    EnvironmentParameters,
    Target,
}

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Index => "index",
            FeatureGroup::Categorical => "categorical",
            FeatureGroup::VehicleParameters => "vehicle_parameters",
            FeatureGroup::DrivingBehaviour => "driving_behaviour",
            FeatureGroup::EnvironmentParameters => "environment_parameters",
            FeatureGroup::Target => "target",
        }
    }

    fn is_numeric_explainable(self) -> bool {
        matches!(
            self,
            FeatureGroup::VehicleParameters
                | FeatureGroup::DrivingBehaviour
                | FeatureGroup::EnvironmentParameters
        )
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "index" => FeatureGroup::Index,
            "categorical" => FeatureGroup::Categorical,
            "vehicle_parameters" => FeatureGroup::VehicleParameters,
            "driving_behaviour" => FeatureGroup::DrivingBehaviour,
            "environment_parameters" => FeatureGroup::EnvironmentParameters,
            "target" => FeatureGroup::Target,
            other => return Err(Error::Registry(format!("unknown group `{other}`"))),
        })
    }
}

/// Expected sign of a feature's effect on fuel consumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Positive => "positive",
            Direction::Negative => "negative",
            Direction::None => "none",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "positive" => Direction::Positive,
            "negative" => Direction::Negative,
            "none" => Direction::None,
            other => return Err(Error::Registry(format!("unknown direction `{other}`"))),
        })
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub group: FeatureGroup,
    pub direction: Direction,
    pub zero_reference: bool,
    pub actionable: bool,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRegistry {
    specs: Vec<FeatureSpec>,
    by_name: HashMap<String, usize>,
}

/// Name of the categorical column holding the make-model group.
pub const VEHICLE_GROUP: &str = "vehicle_group";
/// Name of the categorical column holding the daily route type.
pub const ROUTE_TYPE: &str = "route_type";
pub const TRIP_KMS: &str = "trip_kms";
pub const PER_TIME_CITY: &str = "per_time_city";
pub const TOTAL_ODOMETER: &str = "total_odometer";
pub const FUEL_CONSUMPTION: &str = "fuel_consumption";

impl FeatureRegistry {
    /// Validates and indexes a list of specs.
    pub fn new(specs: Vec<FeatureSpec>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            if s.name.is_empty() {
                return Err(Error::Registry(format!("row {} has an empty name", i + 1)));
            }
            if by_name.insert(s.name.clone(), i).is_some() {
                return Err(Error::Registry(format!("duplicate feature name `{}`", s.name)));
            }
            match s.group {
                FeatureGroup::Index | FeatureGroup::Categorical | FeatureGroup::Target => {
                    if s.direction != Direction::None || s.actionable || s.zero_reference {
                        return Err(Error::Registry(format!(
                            "`{}` ({}) must have direction none, not actionable, no zero reference",
                            s.name,
                            s.group.as_str()
                        )));
                    }
                }
                _ => {}
            }
            if s.zero_reference && s.direction == Direction::None {
                return Err(Error::Registry(format!(
                    "zero-reference feature `{}` needs a positive or negative direction",
                    s.name
                )));
            }
            if s.actionable && !(s.group.is_numeric_explainable() && s.direction != Direction::None)
            {
                return Err(Error::Registry(format!(
                    "actionable feature `{}` is not an explainable numeric feature",
                    s.name
                )));
            }
        }
        let targets = specs.iter().filter(|s| s.group == FeatureGroup::Target).count();
        if targets != 1 {
            return Err(Error::Registry(format!(
                "expected exactly one target feature, found {targets}"
            )));
        }
        Ok(Self { specs, by_name })
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.by_name.get(name).map(|&i| &self.specs[i])
    }

    pub fn direction(&self, name: &str) -> Direction {
        self.get(name).map_or(Direction::None, |s| s.direction)
    }

    pub fn target(&self) -> &FeatureSpec {
        self.specs
            .iter()
            .find(|s| s.group == FeatureGroup::Target)
            .expect("validated registry has a target")
    }

    pub fn categorical(&self) -> Vec<&str> {
        self.names_where(|s| s.group == FeatureGroup::Categorical)
    }

    /// Numeric features the model may use and explanations may mention.
    pub fn explainable_numeric(&self) -> Vec<&str> {
        self.names_where(|s| s.group.is_numeric_explainable() && s.direction != Direction::None)
    }

    pub fn is_explainable(&self, name: &str) -> bool {
        self.get(name)
            .is_some_and(|s| s.group.is_numeric_explainable() && s.direction != Direction::None)
    }

    pub fn actionable(&self) -> Vec<&str> {
        self.names_where(|s| s.actionable)
    }

    pub fn is_actionable(&self, name: &str) -> bool {
        self.get(name).is_some_and(|s| s.actionable)
    }

    pub fn zero_reference(&self) -> Vec<&str> {
        self.names_where(|s| s.zero_reference)
    }

    pub fn is_zero_reference(&self, name: &str) -> bool {
        self.get(name).is_some_and(|s| s.zero_reference)
    }

    fn names_where(&self, pred: impl Fn(&FeatureSpec) -> bool) -> Vec<&str> {
        self.specs.iter().filter(|s| pred(s)).map(|s| s.name.as_str()).collect()
    }

    /// Reads the delimiter-separated registry form.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["name", "group", "direction", "zero_reference", "actionable", "units"];
        if headers.len() < expected.len()
            || headers.iter().zip(expected).any(|(h, e)| h != e)
        {
            return Err(Error::MissingHeader("registry file"));
        }
        let mut specs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |k: usize| -> Result<&str> {
                rec.get(k).ok_or_else(|| Error::Parse {
                    context: "registry file",
                    line,
                    message: format!("missing column `{}`", expected[k]),
                })
            };
            let boolean = |k: usize| -> Result<bool> {
                match field(k)? {
                    "true" => Ok(true),
                    "false" => Ok(false),
                    other => Err(Error::Parse {
                        context: "registry file",
                        line,
                        message: format!("`{}` must be true or false, got `{other}`", expected[k]),
                    }),
                }
            };
            specs.push(FeatureSpec {
                name: field(0)?.to_string(),
                group: field(1)?.parse()?,
                direction: field(2)?.parse()?,
                zero_reference: boolean(3)?,
                actionable: boolean(4)?,
                units: field(5)?.to_string(),
            });
        }
        Self::new(specs)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "group", "direction", "zero_reference", "actionable", "units"])?;
        for s in &self.specs {
            w.write_record([
                s.name.as_str(),
                s.group.as_str(),
                s.direction.as_str(),
                if s.zero_reference { "true" } else { "false" },
                if s.actionable { "true" } else { "false" },
                s.units.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// SHA-256 of the canonical file form, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    /// The built-in fleet feature catalog.
    pub fn builtin() -> Self {
        use Direction::{Negative as N, None as X, Positive as P};
        use FeatureGroup::*;

        // (name, group, direction, zero reference, units)
        #[rustfmt::skip]
        let rows: &[(&str, FeatureGroup, Direction, bool, &str)] = &[
            ("vehicle_id", Index, X, false, "none"),
            ("date_tx", Index, X, false, "date"),
            (VEHICLE_GROUP, Categorical, X, false, "none"),
            ("make", Categorical, X, false, "none"),
            ("model", Categorical, X, false, "none"),
            ("year", Categorical, X, false, "none"),
            ("vin", Categorical, X, false, "none"),
            (ROUTE_TYPE, Categorical, X, false, "none"),
            ("diesel_detected", Categorical, X, false, "none"),
            ("vehicle_class", VehicleParameters, X, false, "none"),
            ("duration_air_conditioner_on", VehicleParameters, P, true, "hours"),
            ("duration_lights_left_on", VehicleParameters, P, true, "minutes"),
            ("duration_abs_on", VehicleParameters, P, true, "hours"),
            ("duration_change_fuel_filter_light_on", VehicleParameters, P, true, "hours"),
            ("number_of_cranking_events_below_10v", VehicleParameters, N, true, "none"),
            ("duration_diesel_particulate_filter_on", VehicleParameters, P, true, "hours"),
            ("duration_pto", VehicleParameters, P, true, "hours"),
            ("harsh_brakes_events", DrivingBehaviour, P, true, "none"),
            ("harsh_turns_events", DrivingBehaviour, P, true, "none"),
            ("jackrabbit_events", DrivingBehaviour, P, true, "none"),
            ("mean_braking_acc", DrivingBehaviour, P, false, "m/s2"),
            ("mean_forward_acc", DrivingBehaviour, P, false, "m/s2"),
            ("mean_up_down_acc", DrivingBehaviour, P, false, "m/s2"),
            ("mean_side_to_side_acc", DrivingBehaviour, P, false, "m/s2"),
            ("mean_speed_city", DrivingBehaviour, P, false, "km/h"),
            ("mean_speed_hwy", DrivingBehaviour, P, false, "km/h"),
            ("rpm_high", DrivingBehaviour, P, true, "none"),
            ("rpm_red", DrivingBehaviour, P, true, "none"),
            ("rpm_orange", DrivingBehaviour, P, true, "none"),
            ("rpm_yellow", DrivingBehaviour, P, true, "none"),
            ("speed_events_over_120_kmh", DrivingBehaviour, P, true, "none"),
            ("speed_events_over_90_kmh", DrivingBehaviour, P, true, "none"),
            ("duration_ecomode_on", DrivingBehaviour, N, false, "hours"),
            ("ignition_events", DrivingBehaviour, P, false, "none"),
            ("duration_speed_control", DrivingBehaviour, N, false, "hours"),
            ("count_neutral", DrivingBehaviour, P, true, "none"),
            ("count_reverse", DrivingBehaviour, P, true, "none"),
            ("duration_extra_passenger", DrivingBehaviour, P, true, "hours"),
            ("height", EnvironmentParameters, N, false, "meters"),
            ("duration_driving_uphill", EnvironmentParameters, P, true, "hours"),
            ("duration_idle_drive", DrivingBehaviour, P, true, "hours"),
            // Listed upstream with units "Hours"; it is a distance.
            (TRIP_KMS, EnvironmentParameters, N, false, "km"),
            (PER_TIME_CITY, EnvironmentParameters, P, false, "none"),
            ("duration_hazard_lights_on", VehicleParameters, P, true, "hours"),
            ("duration_oil_low_light_on", VehicleParameters, P, true, "hours"),
            ("duration_oil_change_light_on", VehicleParameters, P, true, "hours"),
            ("duration_oil_change_due_light_on", VehicleParameters, P, true, "hours"),
            ("mean_engine_oil_temperature", VehicleParameters, P, false, "degC"),
            ("mean_transmission_oil_temperature", VehicleParameters, P, false, "degC"),
            ("variation_engine_oil_life", VehicleParameters, P, false, "none"),
            ("mean_oil_pressure", VehicleParameters, P, false, "Pa"),
            ("mean_engine_cool_temperature", VehicleParameters, P, false, "degC"),
            ("variation_coolant_level", VehicleParameters, P, false, "none"),
            ("duration_water_in_fuel_light_on", VehicleParameters, P, true, "hours"),
            ("duration_engine_hot_light_on", VehicleParameters, P, true, "hours"),
            ("hours_clean_exhaust_filter_light_on", VehicleParameters, P, true, "hours"),
            ("variation_fuel_exhaust_fluid", VehicleParameters, P, true, "none"),
            ("variation_fuel_filter_life", VehicleParameters, P, true, "none"),
            ("distance_mil_on", VehicleParameters, P, true, "meters"),
            (TOTAL_ODOMETER, VehicleParameters, P, false, "meters"),
            ("mean_tyre_pressure_front_left", VehicleParameters, P, false, "Pa"),
            ("mean_tyre_pressure_front_right", VehicleParameters, P, false, "Pa"),
            ("mean_tyre_pressure_rear_left", VehicleParameters, P, false, "Pa"),
            ("mean_tyre_pressure_rear_right", VehicleParameters, P, false, "Pa"),
            ("mean_exterior_temperature", VehicleParameters, N, false, "degC"),
            ("duration_temp_0_to_20", EnvironmentParameters, P, true, "hours"),
            ("duration_temp_minus20_to_0", EnvironmentParameters, P, true, "hours"),
            ("duration_temp_below_minus20", EnvironmentParameters, P, true, "hours"),
            ("duration_raining", EnvironmentParameters, P, true, "hours"),
            (FUEL_CONSUMPTION, Target, X, false, "L/100km"),
        ];

        let specs = rows
            .iter()
            .map(|&(name, group, direction, zero_reference, units)| FeatureSpec {
                name: name.to_string(),
                group,
                direction,
                zero_reference,
                actionable: group.is_numeric_explainable()
                    && direction != X
                    && name != TRIP_KMS
                    && name != TOTAL_ODOMETER,
                units: units.to_string(),
            })
            .collect();
        Self::new(specs).expect("built-in registry is valid")
    }
}

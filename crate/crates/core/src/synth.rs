//! Deterministic synthetic fleet with a known additive fuel function.
//!
//! Each vehicle-day gets feature values drawn per vehicle profile and
//! `fuel = base(group) + offset(group) + Σ s(group, f)·g_f(x_f) + noise`,
//! where `s` is the group's effect scale for driving-behaviour features and 1
//! otherwise. Each injected anomaly inflates one driving feature until the
//! fuel rises by a multiple of the clean IQR of the day's
//! (vehicle_group, route_type). Glitch days multiply the reported fuel.
//!
//! The oracle file has one row per vehicle-day:
//! `vehicle_id,date_tx,vehicle_group,route_type,base_fuel,group_offset,
//! clean_fuel,noise,observed_fuel,anomaly,excess,glitch,short_day,null_target`
//! followed by one `g_<feature>` column per feature with its true
//! contribution (group scale included). Flags are 0/1.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::far::RouteType;
use crate::ingest::{assign_route_type, RawTelemetryRecord, RawValue, RouteThresholds, VinTable};
use crate::metrics::Catalog;
use crate::registry::{PER_TIME_CITY, TRIP_KMS};
use crate::stats::quantile;

/// Ground-truth contribution curve of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Linear { slope: f64 },
    Hinge { knot: f64, slope: f64 },
    Quadratic { knot: f64, coef: f64 },
    ExpDecay { amplitude: f64, scale: f64 },
    Hump { amplitude: f64, scale: f64 },
    Saturating { amplitude: f64, scale: f64 },
}

impl Shape {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Shape::Linear { slope } => slope * x,
            Shape::Hinge { knot, slope } => slope * (x - knot).max(0.0),
            Shape::Quadratic { knot, coef } => coef * (x - knot).max(0.0).powi(2),
            Shape::ExpDecay { amplitude, scale } => amplitude * (-x / scale).exp(),
            Shape::Hump { amplitude, scale } => amplitude * x * (-x / scale).exp(),
            Shape::Saturating { amplitude, scale } => amplitude * (1.0 - (-x / scale).exp()),
        }
    }

    pub fn is_monotone(&self) -> bool {
        !matches!(self, Shape::Hump { .. })
    }

    /// Grows without bound for increasing inputs.
    fn unbounded_increasing(&self) -> bool {
        match *self {
            Shape::Linear { slope } | Shape::Hinge { slope, .. } => slope > 0.0,
            Shape::Quadratic { coef, .. } => coef > 0.0,
            _ => false,
        }
    }
}

/// How a feature's daily values are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Draw {
    /// Vehicle mean from the profile range, daily factor in [0.6, 1.4].
    TripKms,
    /// Vehicle mean from the profile range plus N(0, 0.08), clamped.
    CityShare,
    /// Odometer in metres: vehicle start plus cumulative distance.
    Odometer { start_min: f64, start_max: f64 },
    Poisson { lambda_min: f64, lambda_max: f64 },
    /// Zero with probability `p_zero`, else Gamma(shape, vehicle scale).
    Gamma { shape: f64, scale_min: f64, scale_max: f64, p_zero: f64 },
    /// N(vehicle mean, sd) floored at `min`.
    Normal { mean_min: f64, mean_max: f64, sd: f64, min: f64 },
    /// Annual cosine peaking in mid July plus N(0, sd).
    Seasonal { mean: f64, amplitude: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFeature {
    pub name: String,
    pub draw: Draw,
    pub shape: Shape,
    /// Multiply the contribution by the vehicle group's effect scale.
    pub group_scaled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub vin_prefix: String,
    pub base_fuel: f64,
    pub offset: f64,
    pub effect_scale: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    pub share: f64,
    pub kms_min: f64,
    pub kms_max: f64,
    pub city_min: f64,
    pub city_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_vehicles: usize,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub groups: Vec<GroupSpec>,
    pub profiles: Vec<ProfileSpec>,
    pub features: Vec<SynthFeature>,
    pub route_thresholds: RouteThresholds,
    /// Noise standard deviation as a fraction of the mean clean fuel.
    pub noise_frac: f64,
    pub anomaly_rate: f64,
    /// Injected excess as a multiple of the clean IQR, drawn uniformly.
    pub anomaly_magnitude_min: f64,
    pub anomaly_magnitude_max: f64,
    /// Features inflated on anomalous days, with the relative frequency at
    /// which each is picked; one feature carries a day's whole excess.
    pub anomaly_features: Vec<(String, f64)>,
    pub glitch_rate: f64,
    pub glitch_factor_min: f64,
    pub glitch_factor_max: f64,
    pub missing_rate: f64,
    pub short_day_rate: f64,
    pub null_target_rate: f64,
}

fn feature(name: &str, draw: Draw, shape: Shape, group_scaled: bool) -> SynthFeature {
    SynthFeature {
        name: name.to_string(),
        draw,
        shape,
        group_scaled,
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        use Draw as D;
        use Shape as S;
        let group = |name: &str, prefix: &str, base, offset, scale, share| GroupSpec {
            name: name.to_string(),
            vin_prefix: prefix.to_string(),
            base_fuel: base,
            offset,
            effect_scale: scale,
            share,
        };
        let profile = |name: &str, share, kms_min, kms_max, city_min, city_max| ProfileSpec {
            name: name.to_string(),
            share,
            kms_min,
            kms_max,
            city_min,
            city_max,
        };
        let gamma = |shape, lo, hi, p_zero| D::Gamma {
            shape,
            scale_min: lo,
            scale_max: hi,
            p_zero,
        };
        let poisson = |lo, hi| D::Poisson {
            lambda_min: lo,
            lambda_max: hi,
        };
        Self {
            seed: 7,
            n_vehicles: 200,
            n_days: 120,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 2).unwrap(),
            groups: vec![
                group("van_small", "WV1SM", 5.5, 0.0, 0.7, 0.3),
                group("van_large", "WV2LG", 7.0, 0.6, 1.0, 0.3),
                group("truck_light", "WDBTL", 9.0, 0.0, 1.3, 0.25),
                group("truck_heavy", "WDBTH", 12.0, 1.2, 1.8, 0.15),
            ],
            profiles: vec![
                profile("urban", 0.3, 8.0, 45.0, 0.55, 0.95),
                profile("highway", 0.4, 50.0, 300.0, 0.05, 0.55),
                profile("mixed", 0.3, 20.0, 160.0, 0.25, 0.85),
            ],
            features: vec![
                feature(TRIP_KMS, D::TripKms, S::ExpDecay { amplitude: 1.5, scale: 40.0 }, false),
                feature(PER_TIME_CITY, D::CityShare, S::Linear { slope: 1.8 }, false),
                feature(
                    "total_odometer",
                    D::Odometer { start_min: 2.0e7, start_max: 2.0e8 },
                    S::Linear { slope: 4.0e-9 },
                    false,
                ),
                feature(
                    "height",
                    D::Normal { mean_min: 50.0, mean_max: 900.0, sd: 60.0, min: 0.0 },
                    S::ExpDecay { amplitude: 0.8, scale: 300.0 },
                    false,
                ),
                feature(
                    "mean_exterior_temperature",
                    D::Seasonal { mean: 15.0, amplitude: 9.0, sd: 3.0 },
                    S::ExpDecay { amplitude: 1.0, scale: 15.0 },
                    false,
                ),
                feature("duration_driving_uphill", gamma(2.0, 0.1, 0.4, 0.2), S::Linear { slope: 0.9 }, false),
                feature("duration_raining", gamma(2.0, 0.8, 0.8, 0.65), S::Hump { amplitude: 1.2, scale: 1.5 }, false),
                feature("duration_air_conditioner_on", gamma(2.0, 0.2, 0.8, 0.3), S::Linear { slope: 0.35 }, false),
                feature("harsh_brakes_events", poisson(0.5, 4.0), S::Linear { slope: 0.09 }, true),
                feature("jackrabbit_events", poisson(0.3, 3.0), S::Linear { slope: 0.12 }, true),
                feature("rpm_high", poisson(1.0, 8.0), S::Saturating { amplitude: 0.9, scale: 4.0 }, true),
                feature("duration_idle_drive", gamma(3.0, 0.05, 0.25, 0.0), S::Linear { slope: 1.0 }, true),
                feature(
                    "mean_forward_acc",
                    D::Normal { mean_min: 0.5, mean_max: 1.1, sd: 0.08, min: 0.05 },
                    S::Hinge { knot: 0.3, slope: 2.5 },
                    true,
                ),
                feature(
                    "mean_speed_hwy",
                    D::Normal { mean_min: 85.0, mean_max: 115.0, sd: 5.0, min: 30.0 },
                    S::Quadratic { knot: 80.0, coef: 0.0012 },
                    true,
                ),
                feature(
                    "duration_ecomode_on",
                    gamma(2.0, 0.1, 0.6, 0.1),
                    S::ExpDecay { amplitude: 0.9, scale: 0.7 },
                    true,
                ),
                feature("speed_events_over_120_kmh", poisson(0.0, 1.5), S::Linear { slope: 0.1 }, true),
                feature("count_reverse", poisson(1.0, 6.0), S::Linear { slope: 0.03 }, false),
                feature("duration_extra_passenger", gamma(1.5, 0.2, 1.0, 0.5), S::Linear { slope: 0.25 }, false),
            ],
            route_thresholds: RouteThresholds::default(),
            noise_frac: 0.05,
            anomaly_rate: 0.05,
            anomaly_magnitude_min: 3.0,
            anomaly_magnitude_max: 4.0,
            anomaly_features: vec![
                ("duration_idle_drive".to_string(), 0.6),
                ("mean_forward_acc".to_string(), 0.4),
            ],
            glitch_rate: 0.005,
            glitch_factor_min: 3.0,
            glitch_factor_max: 6.0,
            missing_rate: 0.01,
            short_day_rate: 0.01,
            null_target_rate: 0.005,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, r) in [
            ("anomaly_rate", self.anomaly_rate),
            ("glitch_rate", self.glitch_rate),
            ("missing_rate", self.missing_rate),
            ("short_day_rate", self.short_day_rate),
            ("null_target_rate", self.null_target_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        if !(self.anomaly_magnitude_min > 0.0 && self.anomaly_magnitude_max >= self.anomaly_magnitude_min) {
            return bad("anomaly magnitudes must be positive and ordered".into());
        }
        if !(self.glitch_factor_min > 0.0 && self.glitch_factor_max >= self.glitch_factor_min) {
            return bad("glitch factors must be positive and ordered".into());
        }
        if !(self.noise_frac >= 0.0) {
            return bad("noise_frac must be non-negative".into());
        }
        if self.n_vehicles == 0 || self.n_days == 0 {
            return bad("n_vehicles and n_days must be positive".into());
        }
        if self.groups.is_empty() || self.groups.iter().any(|g| !(g.share > 0.0)) {
            return bad("need at least one group, all with positive share".into());
        }
        if self.profiles.is_empty() || self.profiles.iter().any(|p| !(p.share > 0.0) || p.kms_min > p.kms_max) {
            return bad("need at least one profile, all with positive share and ordered km range".into());
        }
        let mut names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate synthetic feature".into());
        }
        for (name, draw) in [(TRIP_KMS, Draw::TripKms), (PER_TIME_CITY, Draw::CityShare)] {
            if !self.features.iter().any(|f| f.name == name && f.draw == draw) {
                return bad(format!("`{name}` must be present with its dedicated draw"));
            }
        }
        for (name, share) in &self.anomaly_features {
            let Some(f) = self.features.iter().find(|f| &f.name == name) else {
                return bad(format!("anomaly feature `{name}` is not generated"));
            };
            if !f.shape.unbounded_increasing() || !(*share > 0.0) {
                return bad(format!("anomaly feature `{name}` needs an unbounded increasing shape and a positive share"));
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Catalog {
        let mut entries = BTreeMap::new();
        for g in &self.groups {
            for r in RouteType::ALL {
                entries.insert((g.name.clone(), r), g.base_fuel + g.offset);
            }
        }
        Catalog { entries }
    }

    pub fn vin_table(&self) -> VinTable {
        VinTable::new(self.groups.iter().map(|g| (g.vin_prefix.clone(), g.name.clone())))
    }
}

/// Ground truth of one vehicle-day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDay {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub vehicle_group: String,
    pub route_type: RouteType,
    pub base_fuel: f64,
    pub group_offset: f64,
    pub clean_fuel: f64,
    pub noise: f64,
    pub observed_fuel: f64,
    pub anomaly: bool,
    pub excess: f64,
    pub glitch: bool,
    pub short_day: bool,
    pub null_target: bool,
    /// Aligned with the configuration's feature list.
    pub contributions: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFleet {
    pub features: Vec<String>,
    pub records: Vec<RawTelemetryRecord>,
    pub oracle: Vec<OracleDay>,
    pub vin_table: VinTable,
    pub catalog: Catalog,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], share: impl Fn(&T) -> f64) -> &'a T {
    let total: f64 = items.iter().map(&share).sum();
    let mut u = rng.random::<f64>() * total;
    for it in items {
        u -= share(it);
        if u < 0.0 {
            return it;
        }
    }
    items.last().unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Smallest increase of `x` that raises `scale·g(x)` by `target`.
fn inflate(shape: &Shape, scale: f64, x: f64, target: f64) -> f64 {
    let gain = |d: f64| scale * (shape.eval(x + d) - shape.eval(x));
    let mut hi = 1.0;
    while gain(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gain(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Generates raw telemetry, oracle and reference tables.
pub fn generate(cfg: &SynthConfig) -> Result<SynthFleet> {
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let kms_idx = cfg.features.iter().position(|f| f.name == TRIP_KMS).unwrap();
    let ptc_idx = cfg.features.iter().position(|f| f.name == PER_TIME_CITY).unwrap();
    let unit_normal = Normal::new(0.0, 1.0).unwrap();

    let mut days: Vec<OracleDay> = Vec::with_capacity(cfg.n_vehicles * cfg.n_days);
    let mut vehicle_vins = Vec::with_capacity(cfg.n_vehicles);
    for v in 0..cfg.n_vehicles {
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let group = pick(&mut rng, &cfg.groups, |g| g.share).clone();
        let profile = pick(&mut rng, &cfg.profiles, |p| p.share).clone();
        let vehicle_id = format!("veh_{:04}", v + 1);
        vehicle_vins.push(format!("{}{:08}", group.vin_prefix, v + 1));
        let params: Vec<f64> = cfg
            .features
            .iter()
            .map(|f| match f.draw {
                Draw::TripKms => uniform(&mut rng, profile.kms_min, profile.kms_max),
                Draw::CityShare => uniform(&mut rng, profile.city_min, profile.city_max),
                Draw::Odometer { start_min, start_max } => uniform(&mut rng, start_min, start_max),
                Draw::Poisson { lambda_min, lambda_max } => uniform(&mut rng, lambda_min, lambda_max),
                Draw::Gamma { scale_min, scale_max, .. } => uniform(&mut rng, scale_min, scale_max),
                Draw::Normal { mean_min, mean_max, .. } => uniform(&mut rng, mean_min, mean_max),
                Draw::Seasonal { .. } => 0.0,
            })
            .collect();
        let mut odometer: Vec<f64> = params.clone();
        for d in 0..cfg.n_days {
            let date = cfg.start_date + Duration::days(d as i64);
            let short_day = rng.random_bool(cfg.short_day_rate);
            let mut values = vec![0.0; cfg.features.len()];
            let kms = if short_day {
                uniform(&mut rng, 1.0, 5.0)
            } else {
                params[kms_idx] * uniform(&mut rng, 0.6, 1.4)
            };
            for (i, f) in cfg.features.iter().enumerate() {
                let p = params[i];
                values[i] = match f.draw {
                    Draw::TripKms => kms,
                    Draw::CityShare => (p + 0.08 * unit_normal.sample(&mut rng)).clamp(0.01, 0.99),
                    Draw::Odometer { .. } => {
                        odometer[i] += kms * 1000.0;
                        odometer[i]
                    }
                    Draw::Poisson { .. } => {
                        if p > 0.0 {
                            Poisson::new(p).unwrap().sample(&mut rng)
                        } else {
                            0.0
                        }
                    }
                    Draw::Gamma { shape, p_zero, .. } => {
                        if rng.random_bool(p_zero) {
                            0.0
                        } else {
                            Gamma::new(shape, p).unwrap().sample(&mut rng)
                        }
                    }
                    Draw::Normal { sd, min, .. } => (p + sd * unit_normal.sample(&mut rng)).max(min),
                    Draw::Seasonal { mean, amplitude, sd } => {
                        let phase = 2.0 * std::f64::consts::PI * (date.ordinal() as f64 - 196.0) / 365.25;
                        mean + amplitude * phase.cos() + sd * unit_normal.sample(&mut rng)
                    }
                };
            }
            let contributions: Vec<f64> = cfg
                .features
                .iter()
                .zip(&values)
                .map(|(f, &x)| {
                    let s = if f.group_scaled { group.effect_scale } else { 1.0 };
                    s * f.shape.eval(x)
                })
                .collect();
            let clean = group.base_fuel + group.offset + contributions.iter().sum::<f64>();
            let route_type = assign_route_type(values[ptc_idx], values[kms_idx], &cfg.route_thresholds);
            days.push(OracleDay {
                vehicle_id: vehicle_id.clone(),
                date,
                vehicle_group: group.name.clone(),
                route_type,
                base_fuel: group.base_fuel,
                group_offset: group.offset,
                clean_fuel: clean,
                noise: 0.0,
                observed_fuel: clean,
                anomaly: false,
                excess: 0.0,
                glitch: false,
                short_day,
                null_target: false,
                contributions,
                values,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
    let regular: Vec<usize> = (0..days.len()).filter(|&i| !days[i].short_day).collect();
    let mean_clean = regular.iter().map(|&i| days[i].clean_fuel).sum::<f64>() / regular.len().max(1) as f64;
    let noise_sd = cfg.noise_frac * mean_clean;
    for d in &mut days {
        d.noise = noise_sd * unit_normal.sample(&mut rng);
        d.observed_fuel = d.clean_fuel + d.noise;
    }

    let mut by_key: BTreeMap<(String, RouteType), Vec<f64>> = BTreeMap::new();
    for &i in &regular {
        by_key
            .entry((days[i].vehicle_group.clone(), days[i].route_type))
            .or_default()
            .push(days[i].observed_fuel);
    }
    let all: Vec<f64> = regular.iter().map(|&i| days[i].observed_fuel).collect();
    let iqr = |v: &[f64]| quantile(v, 0.75).unwrap_or(0.0) - quantile(v, 0.25).unwrap_or(0.0);
    let global_iqr = iqr(&all);
    let key_iqr: BTreeMap<(String, RouteType), f64> = by_key
        .iter()
        .map(|(k, v)| (k.clone(), if v.len() >= 4 { iqr(v) } else { global_iqr }))
        .collect();

    let anomaly_cols: Vec<(usize, f64)> = cfg
        .anomaly_features
        .iter()
        .map(|(n, s)| (cfg.features.iter().position(|f| &f.name == n).unwrap(), *s))
        .collect();
    let scale_of: BTreeMap<&str, f64> = cfg.groups.iter().map(|g| (g.name.as_str(), g.effect_scale)).collect();
    for &i in &regular {
        if !rng.random_bool(cfg.anomaly_rate) {
            continue;
        }
        let d = &mut days[i];
        let m = uniform(&mut rng, cfg.anomaly_magnitude_min, cfg.anomaly_magnitude_max);
        let excess = m * key_iqr[&(d.vehicle_group.clone(), d.route_type)];
        let (c, _) = *pick(&mut rng, &anomaly_cols, |a| a.1);
        let f = &cfg.features[c];
        let s = if f.group_scaled { scale_of[d.vehicle_group.as_str()] } else { 1.0 };
        d.values[c] += inflate(&f.shape, s, d.values[c], excess);
        d.contributions[c] = s * f.shape.eval(d.values[c]);
        let clean = d.base_fuel + d.group_offset + d.contributions.iter().sum::<f64>();
        d.excess = clean - d.clean_fuel;
        d.clean_fuel = clean;
        d.observed_fuel = clean + d.noise;
        d.anomaly = true;
    }
    for &i in &regular {
        if days[i].anomaly || !rng.random_bool(cfg.glitch_rate) {
            continue;
        }
        let f = uniform(&mut rng, cfg.glitch_factor_min, cfg.glitch_factor_max);
        days[i].glitch = true;
        days[i].observed_fuel *= f;
    }

    let mut records = Vec::with_capacity(days.len() * (cfg.features.len() + 1));
    let mut first_day_seen = vec![false; cfg.n_vehicles];
    for d in &mut days {
        let v: usize = d.vehicle_id[4..].parse::<usize>().unwrap() - 1;
        let t0 = Utc.from_utc_datetime(&d.date.and_hms_opt(6, 0, 0).unwrap()).fixed_offset();
        let mut k = 0i64;
        let mut push = |records: &mut Vec<RawTelemetryRecord>, var: &str, value: RawValue| {
            records.push(RawTelemetryRecord {
                time_tx: t0 + Duration::minutes(k),
                vehicle_id: d.vehicle_id.clone(),
                variable_id: var.to_string(),
                value,
            });
            k += 1;
        };
        if !first_day_seen[v] {
            first_day_seen[v] = true;
            push(&mut records, "vin", RawValue::Text(vehicle_vins[v].clone()));
        }
        for (i, f) in cfg.features.iter().enumerate() {
            let keep = i == kms_idx || i == ptc_idx || !rng.random_bool(cfg.missing_rate);
            if keep {
                push(&mut records, &f.name, RawValue::Number(d.values[i]));
            }
        }
        d.null_target = rng.random_bool(cfg.null_target_rate);
        if !d.null_target {
            let litres = d.observed_fuel * d.values[kms_idx] / 100.0;
            push(&mut records, "trip_fuel_used", RawValue::Number(litres));
        }
    }

    Ok(SynthFleet {
        features: cfg.features.iter().map(|f| f.name.clone()).collect(),
        records,
        oracle: days,
        vin_table: cfg.vin_table(),
        catalog: cfg.catalog(),
    })
}

const ORACLE_HEADER: [&str; 14] = [
    "vehicle_id",
    "date_tx",
    "vehicle_group",
    "route_type",
    "base_fuel",
    "group_offset",
    "clean_fuel",
    "noise",
    "observed_fuel",
    "anomaly",
    "excess",
    "glitch",
    "short_day",
    "null_target",
];

pub fn write_oracle_csv<W: Write>(features: &[String], oracle: &[OracleDay], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ORACLE_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(features.iter().map(|f| format!("g_{f}")));
    w.write_record(&header)?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for d in oracle {
        let mut rec = vec![
            d.vehicle_id.clone(),
            d.date.to_string(),
            d.vehicle_group.clone(),
            d.route_type.to_string(),
            d.base_fuel.to_string(),
            d.group_offset.to_string(),
            d.clean_fuel.to_string(),
            d.noise.to_string(),
            d.observed_fuel.to_string(),
            flag(d.anomaly),
            d.excess.to_string(),
            flag(d.glitch),
            flag(d.short_day),
            flag(d.null_target),
        ];
        rec.extend(d.contributions.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an oracle file; returns the feature names and the days.
pub fn read_oracle_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<OracleDay>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().take(ORACLE_HEADER.len()).ne(ORACLE_HEADER) {
        return Err(Error::MissingHeader("oracle file"));
    }
    let features: Vec<String> = header
        .iter()
        .skip(ORACLE_HEADER.len())
        .map(|h| h.trim_start_matches("g_").to_string())
        .collect();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let perr = |m: String| Error::Parse {
            context: "oracle file",
            line: i + 2,
            message: m,
        };
        let num = |k: usize| -> Result<f64> { rec[k].parse::<f64>().map_err(|e| perr(e.to_string())) };
        let flag = |k: usize| &rec[k] == "1";
        out.push(OracleDay {
            vehicle_id: rec[0].to_string(),
            date: NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| perr(e.to_string()))?,
            vehicle_group: rec[2].to_string(),
            route_type: rec[3].parse()?,
            base_fuel: num(4)?,
            group_offset: num(5)?,
            clean_fuel: num(6)?,
            noise: num(7)?,
            observed_fuel: num(8)?,
            anomaly: flag(9),
            excess: num(10)?,
            glitch: flag(11),
            short_day: flag(12),
            null_target: flag(13),
            contributions: (ORACLE_HEADER.len()..rec.len()).map(num).collect::<Result<_>>()?,
            values: Vec::new(),
        });
    }
    Ok((features, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_vehicles: 6,
            n_days: 10,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.oracle, c.oracle);
    }

    #[test]
    fn inflation_hits_target() {
        let s = Shape::Hinge { knot: 0.3, slope: 2.5 };
        let dx = inflate(&s, 1.3, 0.1, 2.0);
        assert!((1.3 * (s.eval(0.1 + dx) - s.eval(0.1)) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_rates_rejected() {
        let cfg = SynthConfig {
            anomaly_rate: 1.5,
            ..small()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let cfg = SynthConfig {
            anomaly_features: vec![("duration_raining".into(), 1.0)],
            ..small()
        };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn oracle_round_trip() {
        let f = generate(&small()).unwrap();
        let mut buf = Vec::new();
        write_oracle_csv(&f.features, &f.oracle, &mut buf).unwrap();
        let (names, days) = read_oracle_csv(buf.as_slice()).unwrap();
        assert_eq!(names, f.features);
        assert_eq!(days.len(), f.oracle.len());
        assert_eq!(days[3].contributions, f.oracle[3].contributions);
        assert_eq!(days[3].observed_fuel, f.oracle[3].observed_fuel);
    }
}

//! Pipeline configuration: one TOML file, flat threshold keys, environment
//! overrides with the `FUELREC_` prefix (`__` separates nested keys, e.g.
//! `FUELREC_GAM__LEARNING_RATE=0.1`).

use std::path::{Path, PathBuf};

use fuelrec_core::explain::{ExplainConfig, MonotonicMode, RuleConfig};
use fuelrec_core::gam::GamConfig;
use fuelrec_core::ingest::{CleaningConfig, RouteThresholds};
use fuelrec_core::model::{ModelMode, ModelSpec};
use fuelrec_core::recommend::SummaryConfig;
use fuelrec_core::split::{SplitConfig, SplitMode};
use fuelrec_core::synth::SynthConfig;
use fuelrec_core::AnomalyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "FUELREC_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Feature registry CSV; the built-in catalogue when absent.
    pub registry: Option<PathBuf>,
    pub vin_table: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    /// Raw telemetry CSV.
    pub input: Option<PathBuf>,
    /// Synthetic ground truth, enables detection scoring.
    pub oracle: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            registry: None,
            vin_table: None,
            catalog: None,
            input: None,
            oracle: None,
            output: PathBuf::from("fuelrec_out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub th_kms: f64,
    pub low_th_time: f64,
    pub high_th_time: f64,
    pub th_ebm_var: usize,
    pub min_day_km: f64,
    pub min_days_anomalies: usize,
    pub min_dev_total_avg_fuel: f64,
    pub max_abs_correlation: f64,
    /// Modes trained, explained and compared.
    pub model_modes: Vec<ModelMode>,
    pub subgroup_keys: Vec<String>,
    pub seed: u64,
    pub split_mode: SplitMode,
    pub test_fraction: f64,
    pub min_points_per_key: usize,
    pub iqr_factor: f64,
    pub data_quality_iqr_factor: f64,
    pub monotonicity_filter_enabled: bool,
    pub monotonic_mode: MonotonicMode,
    pub filter_first: bool,
    /// Updated fuel this far below the catalog counts as implausible.
    pub catalog_offset: f64,
    pub rules: RuleConfig,
    pub gam: GamConfig,
    pub paths: Paths,
    pub synth: Option<SynthConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let anomaly = AnomalyConfig::default();
        let summary = SummaryConfig::default();
        let route = RouteThresholds::default();
        Self {
            th_kms: route.th_kms,
            low_th_time: route.low_th_time,
            high_th_time: route.high_th_time,
            th_ebm_var: 100,
            min_day_km: summary.min_day_km,
            min_days_anomalies: summary.min_days_anomalies,
            min_dev_total_avg_fuel: summary.min_dev_total_avg_fuel,
            max_abs_correlation: CleaningConfig::default().max_abs_correlation,
            model_modes: ModelMode::ALL.to_vec(),
            subgroup_keys: vec![fuelrec_core::registry::VEHICLE_GROUP.to_string()],
            seed: 0,
            split_mode: SplitMode::Chronological,
            test_fraction: 0.1,
            min_points_per_key: anomaly.min_points_per_key,
            iqr_factor: anomaly.iqr_factor,
            data_quality_iqr_factor: anomaly.data_quality_iqr_factor,
            monotonicity_filter_enabled: true,
            monotonic_mode: MonotonicMode::ByDirection,
            filter_first: false,
            catalog_offset: 1.0,
            rules: RuleConfig::default(),
            gam: GamConfig::default(),
            paths: Paths::default(),
            synth: None,
        }
    }
}

fn env_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_env(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> CliResult<()> {
    for (k, v) in vars {
        let Some(rest) = k.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
        let (last, parents) = path.split_last().expect("split yields one part");
        let mut cur = &mut *table;
        for p in parents {
            let entry = cur
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{k}: `{p}` is not a table")))?;
        }
        cur.insert(last.clone(), env_value(&v));
    }
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text, applies environment overrides and validates.
    pub fn from_toml(text: &str, env: impl IntoIterator<Item = (String, String)>) -> CliResult<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        apply_env(&mut table, env)?;
        let cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory. Without a file the defaults apply.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> CliResult<Self> {
        let Some(path) = path else {
            return Self::from_toml("", env);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, env)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.resolve_against(base);
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.low_th_time <= self.high_th_time) {
            return bad("low_th_time must not exceed high_th_time");
        }
        if !(self.th_kms >= 0.0 && self.min_day_km >= 0.0) {
            return bad("th_kms and min_day_km must be non-negative");
        }
        if self.th_ebm_var < 2 {
            return bad("th_ebm_var must be at least 2");
        }
        if self.model_modes.is_empty() {
            return bad("model_modes must list at least one mode");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1)");
        }
        if !(self.iqr_factor > 0.0 && self.data_quality_iqr_factor >= self.iqr_factor) {
            return bad("data_quality_iqr_factor must be at least iqr_factor > 0");
        }
        if !(0.0..=1.0).contains(&self.max_abs_correlation) {
            return bad("max_abs_correlation must lie in [0, 1]");
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    /// Hash of every setting except file locations, so the same analysis
    /// written to another directory carries the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    pub fn header(&self) -> String {
        format!("# fuelrec {} config_hash={}", env!("CARGO_PKG_VERSION"), self.hash())
    }

    pub fn route_thresholds(&self) -> RouteThresholds {
        RouteThresholds {
            th_kms: self.th_kms,
            low_th_time: self.low_th_time,
            high_th_time: self.high_th_time,
        }
    }

    pub fn cleaning(&self) -> CleaningConfig {
        CleaningConfig {
            min_day_km: self.min_day_km,
            max_abs_correlation: self.max_abs_correlation,
        }
    }

    pub fn split(&self) -> SplitConfig {
        SplitConfig {
            mode: self.split_mode,
            test_fraction: self.test_fraction,
            seed: self.seed,
        }
    }

    pub fn anomaly(&self) -> AnomalyConfig {
        AnomalyConfig {
            min_points_per_key: self.min_points_per_key,
            iqr_factor: self.iqr_factor,
            data_quality_iqr_factor: self.data_quality_iqr_factor,
        }
    }

    pub fn model_spec(&self, mode: ModelMode) -> ModelSpec {
        let mut gam = self.gam.clone();
        gam.seed = self.seed;
        ModelSpec {
            mode,
            gam,
            th_ebm_var: self.th_ebm_var,
            subgroup_keys: self.subgroup_keys.clone(),
        }
    }

    pub fn explain(&self) -> ExplainConfig {
        ExplainConfig {
            rules: self.rules.clone(),
            monotonicity_filter: self.monotonicity_filter_enabled,
            monotonic_mode: self.monotonic_mode,
            filter_first: self.filter_first,
        }
    }

    pub fn summary(&self) -> SummaryConfig {
        SummaryConfig {
            min_days_anomalies: self.min_days_anomalies,
            min_day_km: self.min_day_km,
            min_dev_total_avg_fuel: self.min_dev_total_avg_fuel,
        }
    }
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.registry,
            &mut self.vin_table,
            &mut self.catalog,
            &mut self.input,
            &mut self.oracle,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output);
    }
}

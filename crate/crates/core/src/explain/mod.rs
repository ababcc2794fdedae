//! Per-row explanations of anomalous vehicle-days and their pruning.

mod monotonic;
mod rows;
mod rules;

use serde::{Deserialize, Serialize};

pub use monotonic::{filter_monotonic, monotonic_pairs, MonotonicMode};
pub use rows::{raw_explanations, read_explanations_csv, write_explanations_csv, ExplanationRow};
pub use rules::{apply_business_rules, RuleConfig, RuleId, RuleTrace, TraceEntry};

use crate::ingest::GroupMedians;
use crate::registry::FeatureRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub rules: RuleConfig,
    pub monotonicity_filter: bool,
    pub monotonic_mode: MonotonicMode,
    /// Run the monotonicity filter before the business rules.
    pub filter_first: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            rules: RuleConfig::default(),
            monotonicity_filter: true,
            monotonic_mode: MonotonicMode::ByDirection,
            filter_first: false,
        }
    }
}

/// Business rules and the optional monotonicity filter in the configured order.
pub fn select_explanations(
    raw: &[ExplanationRow],
    inlier_medians: &GroupMedians,
    registry: &FeatureRegistry,
    cfg: &ExplainConfig,
) -> (Vec<ExplanationRow>, RuleTrace) {
    let mut trace = RuleTrace::default();
    if !cfg.monotonicity_filter {
        return apply_business_rules(raw, inlier_medians, registry, &cfg.rules);
    }
    if cfg.filter_first {
        let (f, t) = filter_monotonic(raw, registry, cfg.monotonic_mode);
        trace.extend(t);
        let (r, t) = apply_business_rules(&f, inlier_medians, registry, &cfg.rules);
        trace.extend(t);
        (r, trace)
    } else {
        let (r, t) = apply_business_rules(raw, inlier_medians, registry, &cfg.rules);
        trace.extend(t);
        let (f, t) = filter_monotonic(&r, registry, cfg.monotonic_mode);
        trace.extend(t);
        (f, trace)
    }
}

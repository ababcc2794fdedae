//! Pruning of (value, relevance) pairs that break a feature's direction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rows::ExplanationRow;
use super::rules::{RuleId, RuleTrace, TraceEntry};
use crate::far::RouteType;
use crate::gam::DesignLayout;
use crate::registry::{Direction, FeatureRegistry};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicMode {
    /// Non-decreasing for positive features, non-increasing for negative ones.
    #[default]
    ByDirection,
    /// Non-decreasing for every feature.
    Strict,
}

/// Keeps the pairs that survive repeated passes dropping every pair whose
/// relevance falls below (or, when `decreasing`, rises above) its retained
/// predecessor. Input is deduplicated and sorted by value, then relevance.
pub fn monotonic_pairs(pairs: &[(f64, f64)], decreasing: bool) -> Vec<(f64, f64)> {
    let mut cur = pairs.to_vec();
    cur.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cur.dedup();
    loop {
        let mut next = Vec::with_capacity(cur.len());
        for (i, p) in cur.iter().enumerate() {
            let keep = i == 0 || {
                let d = p.1 - cur[i - 1].1;
                if decreasing {
                    d <= 0.0
                } else {
                    d >= 0.0
                }
            };
            if keep {
                next.push(*p);
            }
        }
        if next.len() == cur.len() {
            return next;
        }
        cur = next;
    }
}

/// Drops explanation rows whose (value, relevance) pair is removed within its
/// (vehicle_group, route_type, feature) group.
pub fn filter_monotonic(
    rows: &[ExplanationRow],
    registry: &FeatureRegistry,
    mode: MonotonicMode,
) -> (Vec<ExplanationRow>, RuleTrace) {
    let mut groups: BTreeMap<(&str, RouteType, &str), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((&r.vehicle_group, r.route_type, &r.feature))
            .or_default()
            .push((r.feature_value, r.relevance));
    }
    let mut kept: BTreeMap<(&str, RouteType, &str), BTreeSet<(u64, u64)>> = BTreeMap::new();
    for (key, pairs) in groups {
        let decreasing = mode == MonotonicMode::ByDirection
            && registry.direction(DesignLayout::source_feature(key.2)) == Direction::Negative;
        let set = monotonic_pairs(&pairs, decreasing)
            .into_iter()
            .map(|(v, r)| (v.to_bits(), r.to_bits()))
            .collect();
        kept.insert(key, set);
    }
    let mut out = Vec::new();
    let mut trace = RuleTrace::default();
    for r in rows {
        let key = (r.vehicle_group.as_str(), r.route_type, r.feature.as_str());
        if kept[&key].contains(&(r.feature_value.to_bits(), r.relevance.to_bits())) {
            out.push(r.clone());
        } else {
            trace.entries.push(TraceEntry {
                vehicle_id: r.vehicle_id.clone(),
                date: r.date,
                feature: Some(r.feature.clone()),
                rule: RuleId::Mono,
                reason: "breaks the value-relevance monotonicity".into(),
            });
        }
    }
    (out, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_the_dip() {
        let out = monotonic_pairs(&[(1.0, 0.5), (2.0, 0.3), (3.0, 0.6)], false);
        assert_eq!(out, vec![(1.0, 0.5), (3.0, 0.6)]);
    }

    #[test]
    fn needs_several_passes() {
        // (2,.4) and (3,.3) both dip; once (2,.4) goes, (3,.3) still sits below (1,.5)
        let out = monotonic_pairs(&[(1.0, 0.5), (2.0, 0.4), (3.0, 0.3), (4.0, 0.9)], false);
        assert_eq!(out, vec![(1.0, 0.5), (4.0, 0.9)]);
    }

    #[test]
    fn fixed_points() {
        let p = vec![(1.0, 0.1), (2.0, 0.1), (3.0, 0.7)];
        assert_eq!(monotonic_pairs(&p, false), p);
        assert_eq!(monotonic_pairs(&[(5.0, -1.0)], false), vec![(5.0, -1.0)]);
        let d = monotonic_pairs(&[(1.0, 0.5), (2.0, 0.6), (3.0, 0.1)], true);
        assert_eq!(d, vec![(1.0, 0.5), (3.0, 0.1)]);
    }
}

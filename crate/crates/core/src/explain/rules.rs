//! Business rules that prune raw explanations.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::rows::ExplanationRow;
use crate::error::{Error, Result};
use crate::gam::DesignLayout;
use crate::ingest::GroupMedians;
use crate::registry::{Direction, FeatureGroup, FeatureRegistry, FUEL_CONSUMPTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "BR1")]
    Br1,
    #[serde(rename = "BR2")]
    Br2,
    #[serde(rename = "BR3")]
    Br3,
    #[serde(rename = "BR4")]
    Br4,
    #[serde(rename = "BR5")]
    Br5,
    #[serde(rename = "MONO")]
    Mono,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Br1 => "BR1",
            RuleId::Br2 => "BR2",
            RuleId::Br3 => "BR3",
            RuleId::Br4 => "BR4",
            RuleId::Br5 => "BR5",
            RuleId::Mono => "MONO",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "BR1" => RuleId::Br1,
            "BR2" => RuleId::Br2,
            "BR3" => RuleId::Br3,
            "BR4" => RuleId::Br4,
            "BR5" => RuleId::Br5,
            "MONO" => RuleId::Mono,
            other => return Err(Error::InvalidArgument(format!("unknown rule `{other}`"))),
        })
    }
}

/// A dropped explanation row, or a whole vehicle-day when `feature` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub feature: Option<String>,
    pub rule: RuleId,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub entries: Vec<TraceEntry>,
}

impl RuleTrace {
    fn drop_row(&mut self, r: &ExplanationRow, rule: RuleId, reason: String) {
        self.entries.push(TraceEntry {
            vehicle_id: r.vehicle_id.clone(),
            date: r.date,
            feature: Some(r.feature.clone()),
            rule,
            reason,
        });
    }

    pub fn count(&self, rule: RuleId) -> usize {
        self.entries.iter().filter(|e| e.rule == rule).count()
    }

    pub fn extend(&mut self, other: RuleTrace) {
        self.entries.extend(other.entries);
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["vehicle_id", "date_tx", "feature", "rule", "reason"])?;
        for e in &self.entries {
            w.write_record([
                e.vehicle_id.as_str(),
                &e.date.to_string(),
                e.feature.as_deref().unwrap_or(""),
                e.rule.as_str(),
                &e.reason,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub br1: bool,
    pub br2: bool,
    pub br3: bool,
    pub br4: bool,
    pub br5: bool,
    /// BR2 drops features whose relevance / y_real falls below this.
    pub min_relative_impact: f64,
    /// BR5 caps the positive relevance sum at this share of y_real.
    pub max_explained_share: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            br1: true,
            br2: true,
            br3: true,
            br4: true,
            br5: true,
            min_relative_impact: 0.01,
            max_explained_share: 0.8,
        }
    }
}

fn is_categorical(registry: &FeatureRegistry, feature: &str) -> bool {
    let src = DesignLayout::source_feature(feature);
    src != feature
        || registry
            .get(src)
            .is_some_and(|s| s.group == FeatureGroup::Categorical)
}

/// Applies BR1, BR3, BR4, BR2 and BR5 in that order. `inlier_medians` should
/// be inlier-only medians per (vehicle_group, route_type).
pub fn apply_business_rules(
    raw: &[ExplanationRow],
    inlier_medians: &GroupMedians,
    registry: &FeatureRegistry,
    cfg: &RuleConfig,
) -> (Vec<ExplanationRow>, RuleTrace) {
    let mut trace = RuleTrace::default();
    let mut days: BTreeMap<(&str, NaiveDate), Vec<&ExplanationRow>> = BTreeMap::new();
    for r in raw {
        days.entry(r.day()).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((vid, date), rows) in days {
        let first = rows[0];
        let mut keep: Vec<&ExplanationRow> = Vec::with_capacity(rows.len());
        for r in rows {
            if cfg.br1 && is_categorical(registry, &r.feature) {
                trace.drop_row(r, RuleId::Br1, "categorical feature is not actionable".into());
            } else {
                keep.push(r);
            }
        }
        if cfg.br3 {
            let med = inlier_medians.get_or_global(&first.vehicle_group, first.route_type, FUEL_CONSUMPTION);
            if let Some((m, _)) = med {
                if first.y_real <= m {
                    trace.entries.push(TraceEntry {
                        vehicle_id: vid.to_string(),
                        date,
                        feature: None,
                        rule: RuleId::Br3,
                        reason: format!("fuel {} not above inlier median {}", first.y_real, m),
                    });
                    for r in keep {
                        trace.drop_row(r, RuleId::Br3, "vehicle-day dropped".into());
                    }
                    continue;
                }
            }
        }
        if cfg.br4 {
            let mut next = Vec::with_capacity(keep.len());
            for r in keep {
                let dir = registry.direction(DesignLayout::source_feature(&r.feature));
                let med = inlier_medians.get_or_global(&r.vehicle_group, r.route_type, &r.feature);
                let pass = match (dir, med) {
                    (Direction::Positive, Some((m, _))) => r.feature_value > m,
                    (Direction::Negative, Some((m, _))) => r.feature_value < m,
                    _ => true,
                };
                if pass {
                    next.push(r);
                } else {
                    let m = med.map_or(f64::NAN, |(m, _)| m);
                    trace.drop_row(
                        r,
                        RuleId::Br4,
                        format!("value {} not beyond inlier median {} ({})", r.feature_value, m, dir.as_str()),
                    );
                }
            }
            keep = next;
        }
        if cfg.br2 {
            let mut next = Vec::with_capacity(keep.len());
            for r in keep {
                let share = r.relevance / r.y_real;
                if share < cfg.min_relative_impact {
                    trace.drop_row(r, RuleId::Br2, format!("relative impact {share:.4} below threshold"));
                } else {
                    next.push(r);
                }
            }
            keep = next;
        }
        if cfg.br5 {
            let cap = cfg.max_explained_share * first.y_real;
            let mut total: f64 = keep.iter().map(|r| r.relevance.max(0.0)).sum();
            if total > cap {
                let mut order: Vec<usize> = (0..keep.len()).collect();
                order.sort_by(|&a, &b| keep[a].relevance.total_cmp(&keep[b].relevance));
                let mut dropped = vec![false; keep.len()];
                for i in order {
                    if total <= cap {
                        break;
                    }
                    if keep[i].relevance <= 0.0 {
                        continue;
                    }
                    total -= keep[i].relevance;
                    dropped[i] = true;
                    trace.drop_row(keep[i], RuleId::Br5, format!("explained total above {cap}"));
                }
                keep = keep.into_iter().zip(dropped).filter(|(_, d)| !d).map(|(r, _)| r).collect();
            }
        }
        out.extend(keep.into_iter().cloned());
    }
    (out, trace)
}

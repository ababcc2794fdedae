use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One value of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub dataset: String,
    pub metric: String,
    /// Feature, vehicle group or `*` for data-set level values.
    pub scope: String,
    pub value: f64,
}

/// Long-format collection of metric values in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<MetricRecord>,
}

impl MetricsReport {
    pub fn push(&mut self, model: &str, dataset: &str, metric: &str, scope: &str, value: f64) {
        self.records.push(MetricRecord {
            model: model.to_string(),
            dataset: dataset.to_string(),
            metric: metric.to_string(),
            scope: scope.to_string(),
            value,
        });
    }

    pub fn get(&self, model: &str, dataset: &str, metric: &str, scope: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.model == model && r.dataset == dataset && r.metric == metric && r.scope == scope)
            .map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "dataset", "metric", "scope", "value"])?;
        for r in &self.records {
            w.write_record([
                r.model.as_str(),
                &r.dataset,
                &r.metric,
                &r.scope,
                &r.value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

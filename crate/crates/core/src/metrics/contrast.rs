use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::kruskal::kruskal_wallis;
use crate::error::Result;

/// Pairwise comparison of one metric between two model modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub metric: String,
    pub method1: String,
    pub method2: String,
    pub mean1: f64,
    pub mean2: f64,
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub p_value: f64,
}

/// Kruskal-Wallis between every pair of methods with samples of one metric.
pub fn contrast_table(metric: &str, samples: &BTreeMap<String, Vec<f64>>) -> Result<Vec<ContrastRow>> {
    let names: Vec<&String> = samples.keys().collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let (sa, sb) = (&samples[*a], &samples[*b]);
            if sa.is_empty() || sb.is_empty() || sa.len() + sb.len() < 3 {
                continue;
            }
            let kw = kruskal_wallis(&[sa, sb])?;
            out.push(ContrastRow {
                metric: metric.to_string(),
                method1: a.to_string(),
                method2: b.to_string(),
                mean1: sa.iter().sum::<f64>() / sa.len() as f64,
                mean2: sb.iter().sum::<f64>() / sb.len() as f64,
                n1: sa.len(),
                n2: sb.len(),
                h: kw.h,
                p_value: kw.p_value,
            });
        }
    }
    Ok(out)
}

pub fn write_contrast_csv<W: Write>(rows: &[ContrastRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "method1", "method2", "mean1", "mean2", "n", "p_value", "n1", "n2", "h"])?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            r.method1.clone(),
            r.method2.clone(),
            r.mean1.to_string(),
            r.mean2.to_string(),
            (r.n1 + r.n2).to_string(),
            r.p_value.to_string(),
            r.n1.to_string(),
            r.n2.to_string(),
            r.h.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

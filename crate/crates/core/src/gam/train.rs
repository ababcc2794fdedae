//! Cyclic gradient boosting of binned shape functions.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::binning::{bin_edges, bin_index};
use super::model::{GamModel, TrainingMeta};
use super::shape::{apply_monotone_constraint, fill_unweighted, Monotone, ShapeFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub validation_fraction: f64,
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        Self {
            validation_fraction: 0.15,
            patience: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GamConfig {
    pub max_bins: usize,
    pub learning_rate: f64,
    pub rounds: usize,
    /// Validation split used to pick the number of rounds; the final model is
    /// refit on every row with that many rounds.
    pub early_stopping: Option<EarlyStopping>,
    /// Number of half-sample bags averaged in each update; 0 disables bagging.
    pub inner_bags: usize,
    /// Stop once the largest bin update of a round falls below this.
    pub tolerance: f64,
    pub monotone: BTreeMap<String, Monotone>,
    pub seed: u64,
}

impl Default for GamConfig {
    fn default() -> Self {
        Self {
            max_bins: 256,
            learning_rate: 0.05,
            rounds: 500,
            early_stopping: Some(EarlyStopping::default()),
            inner_bags: 0,
            tolerance: 0.0,
            monotone: BTreeMap::new(),
            seed: 0,
        }
    }
}

fn validate(x: &[Vec<f64>], y: &[f64], features: &[String], cfg: &GamConfig) -> Result<()> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 rows with one target each (rows {}, targets {})",
            x.len(),
            y.len()
        )));
    }
    for row in x {
        if row.len() != features.len() {
            return Err(Error::FeatureCount {
                expected: features.len(),
                got: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("training feature `{}`", features[c])));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training target".into()));
    }
    if let Some(f) = cfg.monotone.keys().find(|f| !features.contains(f)) {
        return Err(Error::UnknownFeature(f.clone()));
    }
    if cfg.max_bins < 2 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("max_bins must be ≥ 2 and learning_rate > 0".into()));
    }
    Ok(())
}

fn data_hash(x: &[Vec<f64>], y: &[f64]) -> String {
    let mut h = Sha256::new();
    for (row, t) in x.iter().zip(y) {
        for v in row {
            h.update(v.to_le_bytes());
        }
        h.update(t.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Binned view of the training matrix, column-major.
struct Binned {
    edges: Vec<Vec<f64>>,
    bins: Vec<Vec<u32>>,
}

impl Binned {
    fn new(x: &[Vec<f64>], max_bins: usize) -> Self {
        let n_cols = x[0].len();
        let mut edges = Vec::with_capacity(n_cols);
        let mut bins = Vec::with_capacity(n_cols);
        for c in 0..n_cols {
            let col: Vec<f64> = x.iter().map(|r| r[c]).collect();
            let e = bin_edges(&col, max_bins);
            bins.push(col.iter().map(|&v| bin_index(&e, v) as u32).collect());
            edges.push(e);
        }
        Self { edges, bins }
    }

    fn n_bins(&self, c: usize) -> usize {
        self.edges[c].len() - 1
    }
}

struct Fit {
    intercept: f64,
    values: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
    rounds: usize,
    val_rmse: Vec<f64>,
}

/// Boosts on the rows in `fit_rows`, optionally scoring `val_rows` after each
/// round and stopping after `patience` rounds without improvement.
#[allow(clippy::too_many_arguments)]
fn boost(
    binned: &Binned,
    y: &[f64],
    fit_rows: &[usize],
    val_rows: &[usize],
    rounds: usize,
    patience: Option<usize>,
    monotone: &[Monotone],
    cfg: &GamConfig,
) -> Fit {
    let n_cols = binned.edges.len();
    let intercept = fit_rows.iter().map(|&i| y[i]).sum::<f64>() / fit_rows.len() as f64;
    let mut values: Vec<Vec<f64>> = (0..n_cols).map(|c| vec![0.0; binned.n_bins(c)]).collect();
    let mut counts: Vec<Vec<u64>> = (0..n_cols).map(|c| vec![0; binned.n_bins(c)]).collect();
    for c in 0..n_cols {
        for &i in fit_rows {
            counts[c][binned.bins[c][i] as usize] += 1;
        }
    }
    let weights: Vec<Vec<f64>> = counts
        .iter()
        .map(|c| c.iter().map(|&n| n as f64).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bags: Vec<Vec<usize>> = (0..cfg.inner_bags)
        .map(|_| fit_rows.iter().copied().filter(|_| rng.random_bool(0.5)).collect())
        .collect();

    // residuals are indexed by row position in the full matrix
    let mut resid = vec![0.0; y.len()];
    for &i in fit_rows {
        resid[i] = y[i] - intercept;
    }
    let any_monotone = monotone.iter().any(|m| *m != Monotone::None);
    let mut val_rmse = Vec::new();
    let mut best = (f64::INFINITY, 0usize);
    let mut done = 0;

    let mut sums = Vec::new();
    let mut cnt = Vec::new();
    let mut update = Vec::new();
    for round in 0..rounds {
        let mut max_update = 0.0f64;
        for c in 0..n_cols {
            let k = binned.n_bins(c);
            let col = &binned.bins[c];
            update.clear();
            update.resize(k, 0.0);
            let mut mean_update = |rows: &[usize], update: &mut Vec<f64>, scale: f64| {
                sums.clear();
                sums.resize(k, 0.0);
                cnt.clear();
                cnt.resize(k, 0u32);
                for &i in rows {
                    let b = col[i] as usize;
                    sums[b] += resid[i];
                    cnt[b] += 1;
                }
                for b in 0..k {
                    if cnt[b] > 0 {
                        update[b] += scale * cfg.learning_rate * sums[b] / cnt[b] as f64;
                    }
                }
            };
            if bags.is_empty() {
                mean_update(fit_rows, &mut update, 1.0);
            } else {
                let scale = 1.0 / bags.len() as f64;
                for bag in &bags {
                    mean_update(bag, &mut update, scale);
                }
            }
            for b in 0..k {
                values[c][b] += update[b];
                max_update = max_update.max(update[b].abs());
            }
            for &i in fit_rows {
                resid[i] -= update[col[i] as usize];
            }
        }
        if any_monotone {
            for c in 0..n_cols {
                if monotone[c] != Monotone::None {
                    project(&mut values[c], &weights[c], monotone[c]);
                }
            }
            for &i in fit_rows {
                let f: f64 = (0..n_cols).map(|c| values[c][binned.bins[c][i] as usize]).sum();
                resid[i] = y[i] - intercept - f;
            }
        }
        done = round + 1;
        if let Some(patience) = patience {
            let filled: Vec<Vec<f64>> = values
                .iter()
                .zip(&weights)
                .map(|(v, w)| {
                    let mut v = v.clone();
                    fill_unweighted(&mut v, w);
                    v
                })
                .collect();
            let sse: f64 = val_rows
                .iter()
                .map(|&i| {
                    let p = intercept
                        + (0..n_cols)
                            .map(|c| filled[c][binned.bins[c][i] as usize])
                            .sum::<f64>();
                    (y[i] - p).powi(2)
                })
                .sum();
            let rmse = (sse / val_rows.len() as f64).sqrt();
            val_rmse.push(rmse);
            if rmse < best.0 {
                best = (rmse, done);
            } else if done - best.1 >= patience {
                break;
            }
        }
        if max_update < cfg.tolerance {
            break;
        }
    }
    let rounds = if patience.is_some() { best.1.max(1) } else { done };
    for c in 0..n_cols {
        fill_unweighted(&mut values[c], &weights[c]);
    }
    Fit {
        intercept,
        values,
        counts,
        rounds,
        val_rmse,
    }
}

fn project(values: &mut Vec<f64>, weights: &[f64], m: Monotone) {
    let s = ShapeFunction {
        feature: String::new(),
        bin_edges: vec![],
        bin_values: std::mem::take(values),
        monotone: m,
    };
    *values = apply_monotone_constraint(&s, weights).bin_values;
}

/// Trains an additive model with identity link on a row-major matrix.
pub fn train_gam(x: &[Vec<f64>], y: &[f64], features: &[String], cfg: &GamConfig) -> Result<GamModel> {
    validate(x, y, features, cfg)?;
    let binned = Binned::new(x, cfg.max_bins);
    let monotone: Vec<Monotone> = features
        .iter()
        .map(|f| cfg.monotone.get(f).copied().unwrap_or_default())
        .collect();
    let all: Vec<usize> = (0..x.len()).collect();

    let mut rounds = cfg.rounds;
    if let Some(es) = cfg.early_stopping {
        let n_val = (x.len() as f64 * es.validation_fraction).round() as usize;
        if n_val >= 1 && x.len() - n_val >= 2 {
            let mut order = all.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
            let (val, fit) = order.split_at(n_val);
            let mut fit = fit.to_vec();
            fit.sort_unstable();
            let probe = boost(&binned, y, &fit, val, cfg.rounds, Some(es.patience), &monotone, cfg);
            log::debug!(
                "early stopping picked {} of {} rounds (validation rmse {:.5})",
                probe.rounds,
                cfg.rounds,
                probe.val_rmse.get(probe.rounds - 1).copied().unwrap_or(f64::NAN)
            );
            rounds = probe.rounds;
        }
    }
    let fit = boost(&binned, y, &all, &[], rounds, None, &monotone, cfg);

    let mut intercept = fit.intercept;
    let mut shapes = Vec::with_capacity(features.len());
    let mut bin_counts = BTreeMap::new();
    for (c, name) in features.iter().enumerate() {
        let mut values = fit.values[c].clone();
        let counts = &fit.counts[c];
        let total: u64 = counts.iter().sum();
        let offset = values
            .iter()
            .zip(counts)
            .map(|(v, &n)| v * n as f64)
            .sum::<f64>()
            / total as f64;
        for v in &mut values {
            *v -= offset;
        }
        intercept += offset;
        shapes.push(ShapeFunction::new(
            name.clone(),
            binned.edges[c].clone(),
            values,
            monotone[c],
        )?);
        bin_counts.insert(name.clone(), counts.clone());
    }
    Ok(GamModel {
        intercept,
        feature_order: features.to_vec(),
        shapes,
        meta: TrainingMeta {
            bin_counts,
            learning_rate: cfg.learning_rate,
            max_bins: cfg.max_bins,
            rounds: fit.rounds,
            inner_bags: cfg.inner_bags,
            n_rows: x.len(),
            data_hash: data_hash(x, y),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_es() -> GamConfig {
        GamConfig {
            early_stopping: None,
            ..Default::default()
        }
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y = vec![6.5; 50];
        let m = train_gam(&x, &y, &["a".into(), "b".into()], &no_es()).unwrap();
        assert!((m.intercept - 6.5).abs() < 1e-9);
        for s in &m.shapes {
            assert!(s.bin_values.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn rejects_non_finite() {
        let x = vec![vec![1.0], vec![f64::NAN]];
        assert!(matches!(
            train_gam(&x, &[1.0, 2.0], &["a".into()], &no_es()),
            Err(Error::NonFinite(_))
        ));
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train_gam(&x, &[1.0, f64::INFINITY], &["a".into()], &no_es()).is_err());
    }

    #[test]
    fn unknown_monotone_feature() {
        let x = vec![vec![1.0], vec![2.0]];
        let mut cfg = no_es();
        cfg.monotone.insert("zz".into(), Monotone::Increasing);
        assert!(matches!(
            train_gam(&x, &[1.0, 2.0], &["a".into()], &cfg),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn early_stopping_stops_before_budget_on_pure_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random::<f64>()]).collect();
        let y: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let cfg = GamConfig {
            max_bins: 64,
            ..Default::default()
        };
        let m = train_gam(&x, &y, &["a".into()], &cfg).unwrap();
        assert!(m.meta.rounds < 500, "rounds {}", m.meta.rounds);
    }
}

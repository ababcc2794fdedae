//! Per-feature bin edges.

use crate::stats::quantile_sorted;

/// Bin edges for one column: `k + 1` strictly ascending edges for `k` bins.
///
/// A column with at most `max_bins` distinct values gets one bin per value,
/// with inner edges at the midpoints. Otherwise edges sit at the
/// `j / max_bins` quantiles with duplicates collapsed. A constant column gets
/// the single bin `[v - 0.5, v + 0.5]`.
pub fn bin_edges(values: &[f64], max_bins: usize) -> Vec<f64> {
    assert!(max_bins >= 2, "max_bins must be at least 2");
    assert!(!values.is_empty(), "cannot bin an empty column");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() == 1 {
        return vec![distinct[0] - 0.5, distinct[0] + 0.5];
    }
    if distinct.len() <= max_bins {
        let mut edges = Vec::with_capacity(distinct.len() + 1);
        edges.push(distinct[0]);
        for w in distinct.windows(2) {
            edges.push(w[0] + (w[1] - w[0]) / 2.0);
        }
        edges.push(*distinct.last().unwrap());
        return edges;
    }
    let mut edges: Vec<f64> = (0..=max_bins)
        .map(|j| quantile_sorted(&sorted, j as f64 / max_bins as f64).unwrap())
        .collect();
    edges.dedup();
    edges
}

/// Bin edges for every column of a row-major matrix.
pub fn bin_features(x: &[Vec<f64>], max_bins: usize) -> Vec<Vec<f64>> {
    let n_cols = x.first().map_or(0, Vec::len);
    (0..n_cols)
        .map(|c| {
            let col: Vec<f64> = x.iter().map(|r| r[c]).collect();
            bin_edges(&col, max_bins)
        })
        .collect()
}

/// Index of the bin holding `v`; values outside the edges clamp to the end bins.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let k = edges.len() - 1;
    edges[1..k].partition_point(|e| *e <= v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_column_gets_two_bins() {
        let e = bin_edges(&[0.0, 1.0, 1.0, 0.0], 256);
        assert_eq!(e, vec![0.0, 0.5, 1.0]);
        assert_eq!(bin_index(&e, 0.0), 0);
        assert_eq!(bin_index(&e, 1.0), 1);
    }

    #[test]
    fn distinct_values_get_one_bin_each() {
        let e = bin_edges(&[3.0, 1.0, 2.0, 2.0, 3.0], 256);
        assert_eq!(e.len(), 4);
        for (v, b) in [(1.0, 0), (2.0, 1), (3.0, 2)] {
            assert_eq!(bin_index(&e, v), b);
        }
    }

    #[test]
    fn constant_column() {
        let e = bin_edges(&[4.0; 5], 256);
        assert_eq!(e, vec![3.5, 4.5]);
        assert_eq!(bin_index(&e, 4.0), 0);
        assert_eq!(bin_index(&e, 100.0), 0);
    }

    #[test]
    fn clamping() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(bin_index(&e, -5.0), 0);
        assert_eq!(bin_index(&e, 1.5), 1);
        assert_eq!(bin_index(&e, 9.0), 1);
    }

    #[test]
    fn edges_strictly_ascending_with_ties() {
        let mut v = vec![0.0; 500];
        v.extend((0..600).map(|i| i as f64));
        let e = bin_edges(&v, 16);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert!(e.len() <= 17);
    }
}

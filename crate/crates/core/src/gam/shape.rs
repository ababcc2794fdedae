//! Shape functions and the isotonic projection used by the monotone mode.

use serde::{Deserialize, Serialize};

use super::binning::bin_index;
use crate::error::{Error, Result};
use crate::registry::Direction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotone {
    #[default]
    None,
    Increasing,
    Decreasing,
}

impl From<Direction> for Monotone {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Positive => Monotone::Increasing,
            Direction::Negative => Monotone::Decreasing,
            Direction::None => Monotone::None,
        }
    }
}

/// Piecewise-constant additive term of one feature, in target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub feature: String,
    pub bin_edges: Vec<f64>,
    pub bin_values: Vec<f64>,
    pub monotone: Monotone,
}

impl ShapeFunction {
    pub fn new(
        feature: impl Into<String>,
        bin_edges: Vec<f64>,
        bin_values: Vec<f64>,
        monotone: Monotone,
    ) -> Result<Self> {
        let feature = feature.into();
        if bin_edges.len() < 2 || bin_edges.len() != bin_values.len() + 1 {
            return Err(Error::ModelFormat(format!(
                "shape `{feature}`: {} edges for {} values",
                bin_edges.len(),
                bin_values.len()
            )));
        }
        if !bin_edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::ModelFormat(format!(
                "shape `{feature}`: edges not strictly ascending"
            )));
        }
        if bin_edges.iter().chain(&bin_values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("shape `{feature}`")));
        }
        Ok(Self {
            feature,
            bin_edges,
            bin_values,
            monotone,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.bin_values.len()
    }

    pub fn bin(&self, x: f64) -> usize {
        bin_index(&self.bin_edges, x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.bin_values[self.bin(x)]
    }

    pub fn is_monotone(&self) -> bool {
        let v = &self.bin_values;
        match self.monotone {
            Monotone::None => true,
            Monotone::Increasing => v.windows(2).all(|w| w[0] <= w[1]),
            Monotone::Decreasing => v.windows(2).all(|w| w[0] >= w[1]),
        }
    }
}

/// Weighted pool-adjacent-violators fit of a non-decreasing sequence.
///
/// Zero-weight entries do not pull the fit and take the value of the nearest
/// weighted neighbour (left on ties).
pub fn pava_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    let idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    if idx.is_empty() {
        return values.to_vec();
    }
    // blocks of (weighted sum, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(idx.len());
    for &i in &idx {
        blocks.push((values[i] * weights[i], weights[i], 1));
        while blocks.len() > 1 {
            let (s1, w1, _) = blocks[blocks.len() - 1];
            let (s0, w0, _) = blocks[blocks.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            let (s, w, l) = blocks.pop().unwrap();
            let last = blocks.last_mut().unwrap();
            last.0 += s;
            last.1 += w;
            last.2 += l;
        }
    }
    let mut fitted_weighted = Vec::with_capacity(idx.len());
    for (s, w, l) in blocks {
        fitted_weighted.extend(std::iter::repeat_n(s / w, l));
    }
    let mut out = vec![0.0; values.len()];
    for (k, &i) in idx.iter().enumerate() {
        out[i] = fitted_weighted[k];
    }
    fill_unweighted(&mut out, weights);
    out
}

/// Copies the nearest positively weighted value into zero-weight slots.
pub(crate) fn fill_unweighted(values: &mut [f64], weights: &[f64]) {
    let idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    if idx.is_empty() {
        return;
    }
    for i in 0..values.len() {
        if weights[i] > 0.0 {
            continue;
        }
        let p = idx.partition_point(|&j| j < i);
        let nearest = match (p.checked_sub(1).map(|k| idx[k]), idx.get(p).copied()) {
            (Some(l), Some(r)) => {
                if i - l <= r - i {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!(),
        };
        values[i] = values[nearest];
    }
}

/// Weighted isotonic projection of a shape in its declared direction.
pub fn apply_monotone_constraint(shape: &ShapeFunction, weights: &[f64]) -> ShapeFunction {
    assert_eq!(weights.len(), shape.n_bins(), "one weight per bin");
    let bin_values = match shape.monotone {
        Monotone::None => shape.bin_values.clone(),
        Monotone::Increasing => pava_increasing(&shape.bin_values, weights),
        Monotone::Decreasing => {
            let neg: Vec<f64> = shape.bin_values.iter().map(|v| -v).collect();
            pava_increasing(&neg, weights).into_iter().map(|v| -v).collect()
        }
    };
    ShapeFunction {
        bin_values,
        ..shape.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(values: Vec<f64>, m: Monotone) -> ShapeFunction {
        let edges = (0..=values.len()).map(|i| i as f64).collect();
        ShapeFunction::new("x", edges, values, m).unwrap()
    }

    #[test]
    fn monotone_input_unchanged() {
        let s = shape(vec![1.0, 2.0, 3.0], Monotone::Increasing);
        assert_eq!(apply_monotone_constraint(&s, &[1.0; 3]).bin_values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn pools_one_violation() {
        let s = shape(vec![1.0, 3.0, 2.0], Monotone::Increasing);
        assert_eq!(apply_monotone_constraint(&s, &[1.0; 3]).bin_values, vec![1.0, 2.5, 2.5]);
    }

    #[test]
    fn weighted_pool() {
        let s = shape(vec![3.0, 1.0], Monotone::Increasing);
        assert_eq!(apply_monotone_constraint(&s, &[1.0, 3.0]).bin_values, vec![1.5, 1.5]);
    }

    #[test]
    fn decreasing_mirror() {
        let s = shape(vec![1.0, 3.0, 2.0], Monotone::Decreasing);
        assert_eq!(apply_monotone_constraint(&s, &[1.0; 3]).bin_values, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn zero_weights_copy_neighbour() {
        let out = pava_increasing(&[5.0, 1.0, 9.0, 2.0], &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(out, vec![1.0, 1.0, 1.0, 2.0]);
        let out = pava_increasing(&[0.0, 1.0, 7.0, 7.0, 4.0], &[1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(out, vec![0.0, 1.0, 1.0, 4.0, 4.0]);
    }

    #[test]
    fn rejects_unsorted_edges() {
        assert!(ShapeFunction::new("x", vec![0.0, 0.0], vec![1.0], Monotone::None).is_err());
        assert!(ShapeFunction::new("x", vec![0.0, 1.0], vec![], Monotone::None).is_err());
    }

    #[test]
    fn lookup_table() {
        let s = ShapeFunction::new("x", vec![0.0, 1.0, 2.0], vec![-1.0, 1.0], Monotone::None).unwrap();
        assert_eq!(s.eval(1.5), 1.0);
        assert_eq!(s.eval(-5.0), -1.0);
    }
}

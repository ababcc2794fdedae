use super::gamma::chi2_sf;
use crate::error::{Error, Result};
use crate::stats::average_ranks;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    pub h: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Kruskal-Wallis H with tie correction; the p-value is the chi-square upper
/// tail with k − 1 degrees of freedom.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<KruskalWallis> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidArgument("Kruskal-Wallis needs at least two non-empty groups".into()));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len();
    if n < 3 {
        return Err(Error::InvalidArgument("Kruskal-Wallis needs at least 3 values".into()));
    }
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Kruskal-Wallis sample".into()));
    }
    let df = groups.len() - 1;
    let ranks = average_ranks(&pooled);
    let nf = n as f64;
    let mut h = 0.0;
    let mut start = 0;
    for g in groups {
        let r: f64 = ranks[start..start + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        start += g.len();
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);

    let mut sorted = pooled;
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, p_value: 1.0, df });
    }
    let h = (h / correction).max(0.0);
    Ok(KruskalWallis {
        h,
        p_value: chi2_sf(h, df as f64),
        df,
    })
}

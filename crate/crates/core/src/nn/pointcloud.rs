//! Furthest point sampling and inverse-distance k-nearest-neighbor
//! interpolation.

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Greedy furthest point sampling: starts at `seed_index` and repeatedly adds
/// the point farthest from the selected set. Ties go to the lower index.
pub fn fps(points: &[Vec3], k: usize, seed_index: usize) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "fps count {k} outside 1..={}",
            points.len()
        )));
    }
    if seed_index >= points.len() {
        return Err(Error::InvalidArgument(format!("fps seed {seed_index} out of range")));
    }
    let mut selected = Vec::with_capacity(k);
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut current = seed_index;
    for _ in 0..k {
        selected.push(current);
        let c = points[current];
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > best.0 {
                best = (dist[i], i);
            }
        }
        current = best.1;
    }
    Ok(selected)
}

/// Neighbor indices and normalized inverse-distance weights for one query.
/// A query that coincides with a coarse point gets that point with weight 1.
pub fn knn_weights(coarse: &[Vec3], query: &Vec3, k: usize) -> Vec<(usize, f64)> {
    let k = k.min(coarse.len());
    let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, p) in coarse.iter().enumerate() {
        let d = (p - query).norm();
        if nearest.len() < k || d < nearest[k - 1].0 {
            let at = nearest.partition_point(|&(dd, ii)| (dd, ii) <= (d, i));
            nearest.insert(at, (d, i));
            nearest.truncate(k);
        }
    }
    if let Some(&(d, i)) = nearest.first() {
        if d == 0.0 {
            return vec![(i, 1.0)];
        }
    }
    let total: f64 = nearest.iter().map(|(d, _)| 1.0 / d).sum();
    nearest.iter().map(|&(d, i)| (i, (1.0 / d) / total)).collect()
}

/// Interpolates row-major `features` (`coarse.len() × channels`) at every
/// query position from its `k` nearest coarse points.
pub fn knn_interpolate(
    coarse: &[Vec3],
    features: &[f64],
    channels: usize,
    queries: &[Vec3],
    k: usize,
) -> Result<Vec<f64>> {
    if coarse.is_empty() {
        return Err(Error::InvalidArgument(
            "knn_interpolate needs a nonempty coarse set".into(),
        ));
    }
    if features.len() != coarse.len() * channels {
        return Err(Error::Dimension(format!(
            "{} feature values for {} points × {channels} channels",
            features.len(),
            coarse.len()
        )));
    }
    let mut out = vec![0.0; queries.len() * channels];
    for (qi, q) in queries.iter().enumerate() {
        for (i, w) in knn_weights(coarse, q, k) {
            for c in 0..channels {
                out[qi * channels + c] += w * features[i * channels + c];
            }
        }
    }
    Ok(out)
}

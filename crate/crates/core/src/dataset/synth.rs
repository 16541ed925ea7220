//! Gaussian blobs with adjustable overlap, a second task whose difficulty is
//! controlled by a single spread parameter.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Example};
use crate::rng::{self, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Per-coordinate standard deviation around each class mean.
    pub spread: f64,
    pub seed: u64,
}

/// Class means at pairwise distance 1.
///
/// With `classes <= dim` the means are scaled unit vectors `e_c / sqrt(2)`
/// (a regular simplex); otherwise they sit on the main diagonal at unit
/// spacing.
fn class_mean(class: usize, classes: usize, dim: usize) -> Vec<f64> {
    if classes <= dim {
        let mut m = vec![0.0; dim];
        m[class] = std::f64::consts::FRAC_1_SQRT_2;
        m
    } else {
        vec![class as f64 / (dim as f64).sqrt(); dim]
    }
}

/// Generates `classes * per_class` examples, class-major, squashed into
/// `[0, 1]` by one affine map shared by all coordinates.
pub fn synth_blobs(spec: &BlobSpec) -> Result<Dataset, DatasetError> {
    let BlobSpec { classes, dim, per_class, spread, seed } = *spec;
    if classes < 2 || dim == 0 || per_class == 0 {
        return Err(DatasetError::Invalid(format!(
            "blobs need classes >= 2, dim >= 1, per_class >= 1 (got {classes}, {dim}, {per_class})"
        )));
    }
    if !(spread.is_finite() && spread > 0.0) {
        return Err(DatasetError::Invalid(format!("spread must be positive, got {spread}")));
    }

    let mut raw = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let mean = class_mean(class, classes, dim);
        let mut rng = rng::stream(seed, Purpose::Synth, class as u64);
        for _ in 0..per_class {
            let point: Vec<f64> = mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + spread * z
                })
                .collect();
            raw.push((point, class));
        }
    }

    let (lo, hi) = raw
        .iter()
        .flat_map(|(p, _)| p.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    let examples = raw
        .into_iter()
        .enumerate()
        .map(|(id, (point, class))| Example {
            id,
            features: point
                .into_iter()
                .map(|v| if scale > 0.0 { ((v - lo) * scale).clamp(0.0, 1.0) } else { 0.5 })
                .collect(),
            true_label: class,
        })
        .collect();
    let names = (0..classes).map(|c| format!("blob{c}")).collect();
    Dataset::new(examples, names, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(spread: f64) -> BlobSpec {
        BlobSpec { classes: 2, dim: 2, per_class: 50, spread, seed: 7 }
    }

    #[test]
    fn shape_and_range() {
        let ds = synth_blobs(&spec(0.05)).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.class_histogram(), vec![50, 50]);
        assert!(ds.examples().iter().flat_map(|e| &e.features).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = serde_json::to_vec(&synth_blobs(&spec(0.3)).unwrap()).unwrap();
        let b = serde_json::to_vec(&synth_blobs(&spec(0.3)).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = synth_blobs(&BlobSpec { seed: 8, ..spec(0.3) }).unwrap();
        assert_ne!(a, serde_json::to_vec(&c).unwrap());
    }

    // nearest-mean accuracy as a cheap difficulty probe
    fn nearest_centroid_accuracy(ds: &Dataset) -> f64 {
        let k = ds.num_classes();
        let d = ds.feature_dim();
        let mut centroids = vec![vec![0.0; d]; k];
        for e in ds.examples() {
            for (c, v) in centroids[e.true_label].iter_mut().zip(&e.features) {
                *c += v;
            }
        }
        let hist = ds.class_histogram();
        for (c, n) in centroids.iter_mut().zip(&hist) {
            c.iter_mut().for_each(|v| *v /= *n as f64);
        }
        let correct = ds
            .examples()
            .iter()
            .filter(|e| {
                let dist = |c: &Vec<f64>| c.iter().zip(&e.features).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let best = (0..k).min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b]))).unwrap();
                best == e.true_label
            })
            .count();
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn larger_spread_is_harder() {
        let easy = nearest_centroid_accuracy(&synth_blobs(&spec(0.05)).unwrap());
        let hard = nearest_centroid_accuracy(&synth_blobs(&spec(0.8)).unwrap());
        assert_eq!(easy, 1.0);
        assert!(hard < 0.9, "spread 0.8 should overlap, got {hard}");
    }

    #[test]
    fn more_classes_than_dimensions() {
        let ds = synth_blobs(&BlobSpec { classes: 5, dim: 2, per_class: 3, spread: 0.1, seed: 1 }).unwrap();
        assert_eq!(ds.num_classes(), 5);
        assert_eq!(ds.len(), 15);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(synth_blobs(&BlobSpec { classes: 1, ..spec(0.1) }).is_err());
        assert!(synth_blobs(&BlobSpec { per_class: 0, ..spec(0.1) }).is_err());
        assert!(synth_blobs(&spec(0.0)).is_err());
    }
}

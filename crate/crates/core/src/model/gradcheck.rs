//! Central-difference verification of the backpropagated gradient.

use rand::Rng;

use super::{ModelError, ModelParams};
use crate::rng::{self, Purpose};

/// Coordinates checked when a model has more parameters than this.
pub const GRADCHECK_MIN_COORDS: usize = 400;

/// Maximum relative error between the analytic gradient of the
/// cross-entropy at `(features, label)` and the central difference
/// `(f(θ+h) - f(θ-h)) / 2h`, with relative error
/// `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// Small models are checked on every coordinate; larger ones on
/// [`GRADCHECK_MIN_COORDS`] coordinates drawn with a fixed seed.
pub fn grad_check(model: &ModelParams, features: &[f64], label: usize, h: f64) -> Result<f64, ModelError> {
    grad_check_sampled(model, features, label, h, GRADCHECK_MIN_COORDS, 0)
}

/// [`grad_check`] with an explicit coordinate budget and sampling seed.
pub fn grad_check_sampled(
    model: &ModelParams,
    features: &[f64],
    label: usize,
    h: f64,
    max_coords: usize,
    seed: u64,
) -> Result<f64, ModelError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(ModelError::InvalidHyper(format!("step must be > 0, got {h}")));
    }
    let (_, analytic) = model.loss_and_gradient(features, label)?;
    let n = analytic.len();
    let coords: Vec<usize> = if n <= max_coords {
        (0..n).collect()
    } else {
        let mut rng = rng::stream(seed, Purpose::GradCheck, 0);
        (0..max_coords).map(|_| rng.random_range(0..n)).collect()
    };

    max_relative_error(model, features, label, h, &coords, &analytic)
}

fn max_relative_error(
    model: &ModelParams,
    features: &[f64],
    label: usize,
    h: f64,
    coords: &[usize],
    analytic: &[f64],
) -> Result<f64, ModelError> {
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &idx in coords {
        let original = probe.param(idx);
        probe.set_param(idx, original + h);
        let plus = probe.exact_loss(features, label)?;
        probe.set_param(idx, original - h);
        let minus = probe.exact_loss(features, label)?;
        probe.set_param(idx, original);

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

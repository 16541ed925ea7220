use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Architecture, Classifier, ModelError, ProbVector, Sample, TrainHyper, LOSS_PROB_FLOOR};
use crate::rng::{self, Purpose};

/// Dense affine layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn random(inputs: usize, outputs: usize, seed: u64, index: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Init, index);
        let scale = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn clear(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    /// `out = W x + b`, visiting only the listed non-zero inputs.
    fn forward(&self, x: &[f64], active: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut sum = self.bias[o];
            for &i in active {
                sum += row[i] * x[i];
            }
            out.push(sum);
        }
    }

    fn accumulate(&self, grad: &mut Layer, x: &[f64], active: &[usize], delta: &[f64]) {
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for &i in active {
                row[i] += d * x[i];
            }
            grad.bias[o] += d;
        }
    }

    fn sgd_step(&mut self, grad: &Layer, lr: f64, scale: f64, l2: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= lr * (g * scale + l2 * *w);
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g * scale;
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

fn nonzero_indices(x: &[f64], out: &mut Vec<usize>) {
    out.clear();
    out.extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
}

/// Reusable buffers for one forward/backward pass.
#[derive(Default)]
struct Scratch {
    active_in: Vec<usize>,
    hidden: Vec<f64>,
    active_hidden: Vec<usize>,
    logits: Vec<f64>,
    delta_out: Vec<f64>,
    delta_hidden: Vec<f64>,
}

/// Parameters of a softmax-regression or one-hidden-layer MLP classifier.
///
/// Layers are stored input-to-output: `[output]` for softmax regression,
/// `[hidden, output]` for the MLP. The flat parameter order used by
/// checkpoints and gradient checks is each layer's weights then its bias,
/// layer by layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: Architecture,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub init_seed: u64,
    pub layers: Vec<Layer>,
}

impl ModelParams {
    /// Weights are standard normal draws scaled by `1/sqrt(fan_in)`, biases
    /// zero. Deterministic in `rng_seed`.
    pub fn init(arch: Architecture, feature_dim: usize, num_classes: usize, rng_seed: u64) -> Result<Self, ModelError> {
        if feature_dim == 0 || num_classes < 2 {
            return Err(ModelError::InvalidHyper(format!(
                "need feature_dim >= 1 and K >= 2, got {feature_dim} and {num_classes}"
            )));
        }
        let layers = match arch {
            Architecture::Softmax => vec![Layer::random(feature_dim, num_classes, rng_seed, 0)],
            Architecture::Mlp { hidden: 0 } => {
                return Err(ModelError::InvalidHyper("hidden width must be >= 1".into()));
            }
            Architecture::Mlp { hidden } => {
                vec![Layer::random(feature_dim, hidden, rng_seed, 0), Layer::random(hidden, num_classes, rng_seed, 1)]
            }
        };
        Ok(Self { arch, feature_dim, num_classes, init_seed: rng_seed, layers })
    }

    /// A model with every parameter zero; predicts the uniform distribution.
    pub fn zeros(arch: Architecture, feature_dim: usize, num_classes: usize) -> Result<Self, ModelError> {
        let mut model = Self::init(arch, feature_dim, num_classes, 0)?;
        model.layers.iter_mut().for_each(Layer::clear);
        Ok(model)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                return (l, true, index);
            }
            index -= layer.weights.len();
            if index < layer.bias.len() {
                return (l, false, index);
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter at a flat index (see the type docs for the order).
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (l, true, i) => self.layers[l].weights[i],
            (l, false, i) => self.layers[l].bias[i],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (l, true, i) => self.layers[l].weights[i] = value,
            (l, false, i) => self.layers[l].bias[i] = value,
        }
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Layer::is_finite)
    }

    fn check_dim(&self, features: &[f64]) -> Result<(), ModelError> {
        if features.len() != self.feature_dim {
            return Err(ModelError::DimensionMismatch { expected: self.feature_dim, actual: features.len() });
        }
        Ok(())
    }

    fn forward_into(&self, x: &[f64], s: &mut Scratch) {
        nonzero_indices(x, &mut s.active_in);
        match self.layers.as_slice() {
            [out] => out.forward(x, &s.active_in, &mut s.logits),
            [hidden, out] => {
                hidden.forward(x, &s.active_in, &mut s.hidden);
                s.hidden.iter_mut().for_each(|h| *h = h.max(0.0));
                nonzero_indices(&s.hidden, &mut s.active_hidden);
                out.forward(&s.hidden, &s.active_hidden, &mut s.logits);
            }
            _ => unreachable!("architectures have one or two layers"),
        }
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(features)?;
        let mut s = Scratch::default();
        self.forward_into(features, &mut s);
        Ok(s.logits)
    }

    /// Adds the cross-entropy gradient of one sample to `grad` and returns
    /// the sample's clamped loss `-ln(max(p_y, 1e-12))`.
    fn backprop(&self, x: &[f64], label: usize, grad: &mut [Layer], s: &mut Scratch) -> f64 {
        self.forward_into(x, s);
        s.delta_out.clear();
        s.delta_out.extend_from_slice(&s.logits);
        softmax_in_place(&mut s.delta_out);
        let loss = -s.delta_out[label].max(LOSS_PROB_FLOOR).ln();
        s.delta_out[label] -= 1.0;

        match self.layers.as_slice() {
            [out] => out.accumulate(&mut grad[0], x, &s.active_in, &s.delta_out),
            [hidden, out] => {
                out.accumulate(&mut grad[1], &s.hidden, &s.active_hidden, &s.delta_out);
                s.delta_hidden.clear();
                s.delta_hidden.resize(hidden.outputs, 0.0);
                for &j in &s.active_hidden {
                    let mut d = 0.0;
                    for (o, &dout) in s.delta_out.iter().enumerate() {
                        d += out.weights[o * out.inputs + j] * dout;
                    }
                    s.delta_hidden[j] = d;
                }
                hidden.accumulate(&mut grad[0], x, &s.active_in, &s.delta_hidden);
            }
            _ => unreachable!("architectures have one or two layers"),
        }
        loss
    }

    /// Unclamped cross-entropy `logsumexp(z) - z_y` and its exact gradient
    /// for a single sample, as a flat vector in parameter order.
    pub fn loss_and_gradient(&self, features: &[f64], label: usize) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_dim(features)?;
        if label >= self.num_classes {
            return Err(ModelError::LabelOutOfRange { label, classes: self.num_classes });
        }
        let mut grad: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
        let mut s = Scratch::default();
        self.backprop(features, label, &mut grad, &mut s);
        let flat = grad.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect();
        Ok((self.exact_loss(features, label)?, flat))
    }

    /// Unclamped cross-entropy of one sample.
    pub fn exact_loss(&self, features: &[f64], label: usize) -> Result<f64, ModelError> {
        let z = self.logits(features)?;
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        Ok(lse - z[label])
    }

    /// Like [`Classifier::fit_round`] but returns the mean loss of every
    /// epoch.
    pub fn fit_with_history(
        &mut self,
        samples: &[Sample<'_>],
        hyper: &TrainHyper,
        seed: u64,
    ) -> Result<Vec<f64>, ModelError> {
        hyper.validate()?;
        if samples.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        for sample in samples {
            self.check_dim(sample.features)?;
            if sample.label >= self.num_classes {
                return Err(ModelError::LabelOutOfRange { label: sample.label, classes: self.num_classes });
            }
        }

        let mut grad: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
        let mut scratch = Scratch::default();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut history = Vec::with_capacity(hyper.epochs_per_round);
        for epoch in 0..hyper.epochs_per_round {
            order.shuffle(&mut rng::stream(seed, Purpose::Shuffle, epoch as u64));
            let mut loss_sum = 0.0;
            for batch in order.chunks(hyper.minibatch_size) {
                grad.iter_mut().for_each(Layer::clear);
                for &i in batch {
                    loss_sum += self.backprop(samples[i].features, samples[i].label, &mut grad, &mut scratch);
                }
                let scale = 1.0 / batch.len() as f64;
                for (layer, g) in self.layers.iter_mut().zip(&grad) {
                    layer.sgd_step(g, hyper.learning_rate, scale, hyper.l2);
                }
            }
            let mean = loss_sum / samples.len() as f64;
            if !mean.is_finite() {
                return Err(ModelError::NonFiniteLoss);
            }
            history.push(mean);
        }
        if !self.is_finite() {
            return Err(ModelError::NonFiniteLoss);
        }
        Ok(history)
    }
}

impl Classifier for ModelParams {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        ProbVector::from_logits(&self.logits(features)?)
    }

    fn fit_round(&mut self, samples: &[Sample<'_>], hyper: &TrainHyper, seed: u64) -> Result<f64, ModelError> {
        let history = self.fit_with_history(samples, hyper, seed)?;
        Ok(*history.last().expect("epochs_per_round >= 1"))
    }

    fn reinitialize(&mut self) {
        *self = Self::init(self.arch, self.feature_dim, self.num_classes, self.init_seed)
            .expect("architecture was valid at construction");
    }
}

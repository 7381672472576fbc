//! A small trainable feature extractor with a linear classifier head.
//!
//! Forward and backward passes are written out by hand; gradient-check
//! tests compare every analytic gradient against central finite
//! differences.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PourError, Result};
use crate::metrics::FeatureSource;
use crate::synthetic::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `y = act(x)`.
    fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// One affine layer: `h = act(x W^T + b)`, weight is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Extractor layers producing features of dim `p`, plus a `p x C` head
/// with no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub layers: Vec<Layer>,
    pub head: Array2<f64>,
    pub class_count: usize,
}

/// Per-parameter gradients, shaped exactly like the model. The head
/// gradient is `None` for losses that freeze the classifier.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub head: Option<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescent,
    Momentum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub step_size: f64,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn full_batch(steps: usize, step_size: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            steps,
            step_size,
            batch_size: None,
            seed,
            optimizer: Optimizer::GradientDescent,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(PourError::InvalidConfig("steps must be at least 1".into()));
        }
        if self.step_size <= 0.0 {
            return Err(PourError::InvalidConfig("step_size must be positive".into()));
        }
        Ok(())
    }
}

impl ToyModel {
    /// Default extractor shape: input -> hidden tanh -> feature_dim linear,
    /// seeded Gaussian init at scale `1/sqrt(fan_in)`.
    pub fn new_seeded(
        input_dim: usize,
        hidden_dim: usize,
        feature_dim: usize,
        class_count: usize,
        seed: u64,
    ) -> ToyModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |fan_in: usize, fan_out: usize, activation| {
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * scale
            });
            Layer {
                weight,
                bias: Array1::zeros(fan_out),
                activation,
            }
        };
        let layers = vec![
            layer(input_dim, hidden_dim, Activation::Tanh),
            layer(hidden_dim, feature_dim, Activation::Linear),
        ];
        let scale = 1.0 / (feature_dim as f64).sqrt();
        let head = Array2::from_shape_fn((feature_dim, class_count), |_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        });
        ToyModel {
            layers,
            head,
            class_count,
        }
    }

    /// Build a model from explicit layers and head.
    pub fn from_parts(layers: Vec<Layer>, head: Array2<f64>, class_count: usize) -> Result<ToyModel> {
        let mut dim = layers
            .first()
            .map(|l| l.weight.ncols())
            .unwrap_or_else(|| head.nrows());
        for l in &layers {
            if l.weight.ncols() != dim {
                return Err(PourError::DimensionMismatch {
                    expected: dim,
                    got: l.weight.ncols(),
                    context: "layer input",
                });
            }
            if l.bias.len() != l.weight.nrows() {
                return Err(PourError::DimensionMismatch {
                    expected: l.weight.nrows(),
                    got: l.bias.len(),
                    context: "layer bias",
                });
            }
            dim = l.weight.nrows();
        }
        if head.nrows() != dim {
            return Err(PourError::DimensionMismatch {
                expected: dim,
                got: head.nrows(),
                context: "head input",
            });
        }
        if head.ncols() != class_count {
            return Err(PourError::DimensionMismatch {
                expected: class_count,
                got: head.ncols(),
                context: "head columns",
            });
        }
        Ok(ToyModel {
            layers,
            head,
            class_count,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.weight.ncols())
            .unwrap_or_else(|| self.head.nrows())
    }

    pub fn feature_dim(&self) -> usize {
        self.head.nrows()
    }

    fn check_input(&self, inputs: &Array2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(PourError::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.ncols(),
                context: "model input",
            });
        }
        Ok(())
    }

    /// Forward pass keeping every layer output for backprop.
    fn forward_cached(&self, inputs: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.clone());
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let mut out = prev.dot(&layer.weight.t());
            for mut row in out.axis_iter_mut(Axis(0)) {
                row += &layer.bias;
            }
            out.mapv_inplace(|x| layer.activation.apply(x));
            activations.push(out);
        }
        activations
    }

    /// Propagate a loss gradient on the features back to every extractor
    /// parameter. `activations` must come from `forward_cached` on the
    /// same inputs.
    fn backprop_features(
        &self,
        activations: &[Array2<f64>],
        mut delta: Array2<f64>,
    ) -> Vec<(Array2<f64>, Array1<f64>)> {
        let mut grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let output = &activations[idx + 1];
            // gradient through the activation, using the cached output
            ndarray::Zip::from(&mut delta).and(output).for_each(|d, &y| {
                *d *= layer.activation.derivative_from_output(y);
            });
            let prev = &activations[idx];
            let grad_w = delta.t().dot(prev);
            let grad_b = delta.sum_axis(Axis(0));
            grads[idx] = (grad_w, grad_b);
            if idx > 0 {
                delta = delta.dot(&layer.weight);
            }
        }
        grads
    }

    pub fn classify(&self, inputs: &Array2<f64>) -> Result<Vec<usize>> {
        let logits = forward_logits(self, inputs)?;
        Ok(argmax_rows(&logits))
    }
}

impl FeatureSource for ToyModel {
    fn features(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        forward_features(self, inputs)
    }
}

/// Deterministic layerwise affine + activation evaluation.
pub fn forward_features(model: &ToyModel, inputs: &Array2<f64>) -> Result<Array2<f64>> {
    model.check_input(inputs)?;
    Ok(model.forward_cached(inputs).pop().unwrap())
}

/// `logits = features . W`, an `n x C` matrix.
pub fn forward_logits(model: &ToyModel, inputs: &Array2<f64>) -> Result<Array2<f64>> {
    let features = forward_features(model, inputs)?;
    Ok(features.dot(&model.head))
}

/// Row-wise argmax with ties broken to the lowest class index.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Gradients of the mean squared feature error `1/n sum_i ||z_i - t_i||^2`
/// with respect to every extractor parameter. The head is frozen.
pub fn backward_l2_feature_loss(
    model: &ToyModel,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
) -> Result<(f64, Gradients)> {
    model.check_input(inputs)?;
    if targets.ncols() != model.feature_dim() || targets.nrows() != inputs.nrows() {
        return Err(PourError::DimensionMismatch {
            expected: model.feature_dim(),
            got: targets.ncols(),
            context: "l2 feature targets",
        });
    }
    let n = inputs.nrows() as f64;
    let activations = model.forward_cached(inputs);
    let features = activations.last().unwrap();
    let diff = features - targets;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let delta = &diff * (2.0 / n);
    let layers = model.backprop_features(&activations, delta);
    Ok((loss, Gradients { layers, head: None }))
}

/// Mean cross-entropy loss and gradients over extractor and head.
/// Softmax uses max-subtraction for stability.
pub fn backward_cross_entropy(
    model: &ToyModel,
    inputs: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    model.check_input(inputs)?;
    if labels.len() != inputs.nrows() {
        return Err(PourError::LengthMismatch {
            left: labels.len(),
            right: inputs.nrows(),
        });
    }
    let n = inputs.nrows() as f64;
    let activations = model.forward_cached(inputs);
    let features = activations.last().unwrap();
    let logits = features.dot(&model.head);
    let probs = softmax_rows(&logits);
    let mut loss = 0.0;
    let mut delta_logits = probs;
    for (i, &label) in labels.iter().enumerate() {
        loss -= delta_logits[[i, label]].max(1e-300).ln();
        delta_logits[[i, label]] -= 1.0;
    }
    loss /= n;
    delta_logits /= n;
    let grad_head = features.t().dot(&delta_logits);
    let delta_features = delta_logits.dot(&model.head.t());
    let layers = model.backprop_features(&activations, delta_features);
    Ok((
        loss,
        Gradients {
            layers,
            head: Some(grad_head),
        },
    ))
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// In-place gradient step, optionally clipping the global update norm.
/// Returns the applied update norm.
pub(crate) fn apply_update(
    model: &mut ToyModel,
    grads: &Gradients,
    velocity: &mut Option<Gradients>,
    step_size: f64,
    momentum: Option<f64>,
    clip: Option<f64>,
) -> f64 {
    // fold momentum into the gradient buffer first
    let effective: Gradients = if let (Some(beta), Some(vel)) = (momentum, velocity.as_mut()) {
        for ((vw, vb), (gw, gb)) in vel.layers.iter_mut().zip(&grads.layers) {
            *vw *= beta;
            *vw += gw;
            *vb *= beta;
            *vb += gb;
        }
        if let (Some(vh), Some(gh)) = (vel.head.as_mut(), grads.head.as_ref()) {
            *vh *= beta;
            *vh += gh;
        }
        vel.clone()
    } else {
        grads.clone()
    };

    let mut norm_sq = 0.0;
    for (gw, gb) in &effective.layers {
        norm_sq += gw.iter().map(|v| v * v).sum::<f64>();
        norm_sq += gb.iter().map(|v| v * v).sum::<f64>();
    }
    if let Some(gh) = &effective.head {
        norm_sq += gh.iter().map(|v| v * v).sum::<f64>();
    }
    let mut scale = step_size;
    let update_norm = step_size * norm_sq.sqrt();
    if let Some(max_norm) = clip {
        if update_norm > max_norm && update_norm > 0.0 {
            scale *= max_norm / update_norm;
        }
    }
    for (layer, (gw, gb)) in model.layers.iter_mut().zip(&effective.layers) {
        layer.weight.scaled_add(-scale, gw);
        layer.bias.scaled_add(-scale, gb);
    }
    if let Some(gh) = &effective.head {
        model.head.scaled_add(-scale, gh);
    }
    update_norm.min(update_norm.max(0.0))
}

pub(crate) fn zero_like(model: &ToyModel, with_head: bool) -> Gradients {
    Gradients {
        layers: model
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weight.dim()), Array1::zeros(l.bias.len())))
            .collect(),
        head: with_head.then(|| Array2::zeros(model.head.dim())),
    }
}

/// Cross-entropy training over extractor and head, deterministic per
/// (seed, config, data). Aborts on a non-finite loss.
pub fn train_supervised(
    model: &ToyModel,
    data: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<ToyModel> {
    config.validate()?;
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= model.class_count) {
        return Err(PourError::ClassOutOfRange {
            index: bad,
            count: model.class_count,
        });
    }
    let mut trained = model.clone();
    let momentum = matches!(config.optimizer, Optimizer::Momentum).then_some(0.9);
    let mut velocity = momentum.map(|_| zero_like(&trained, true));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n; // force an initial shuffle in minibatch mode

    for step in 0..config.steps {
        let (inputs, labels) = match config.batch_size {
            None => (data.rows.clone(), data.labels.clone()),
            Some(batch) => {
                let batch = batch.min(n);
                if cursor + batch > n {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let idx = &order[cursor..cursor + batch];
                cursor += batch;
                let mut rows = Array2::zeros((batch, data.dim()));
                let mut labels = Vec::with_capacity(batch);
                for (r, &i) in idx.iter().enumerate() {
                    rows.row_mut(r).assign(&data.rows.row(i));
                    labels.push(data.labels[i]);
                }
                (rows, labels)
            }
        };
        let (loss, grads) = backward_cross_entropy(&trained, &inputs, &labels)?;
        if !loss.is_finite() {
            return Err(PourError::NonFiniteLoss { step });
        }
        apply_update(
            &mut trained,
            &grads,
            &mut velocity,
            config.step_size,
            momentum,
            None,
        );
    }
    Ok(trained)
}

/// Nearest-class-mean labels, ties broken to the lowest class index.
pub fn ncm_classify(means: &[Array1<f64>], features: &Array2<f64>) -> Vec<usize> {
    assert!(!means.is_empty(), "ncm_classify needs at least one mean");
    features
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (c, mean) in means.iter().enumerate() {
                let diff = &row.to_owned() - mean;
                let dist = diff.dot(&diff);
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn finite_difference_check(
    model: &ToyModel,
    loss_fn: &dyn Fn(&ToyModel) -> f64,
    analytic: &Gradients,
    h: f64,
    rel_tol: f64,
) {
    let check = |get: &dyn Fn(&mut ToyModel) -> &mut f64, expected: f64| {
        let mut plus = model.clone();
        *get(&mut plus) += h;
        let mut minus = model.clone();
        *get(&mut minus) -= h;
        let numeric = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
        let denom = numeric.abs().max(expected.abs()).max(1e-6);
        assert!(
            (numeric - expected).abs() / denom < rel_tol,
            "gradient mismatch: analytic {expected} vs numeric {numeric}"
        );
    };
    for (li, (gw, gb)) in analytic.layers.iter().enumerate() {
        for ((r, c), &g) in gw.indexed_iter() {
            check(&|m: &mut ToyModel| &mut m.layers[li].weight[[r, c]], g);
        }
        for (i, &g) in gb.indexed_iter() {
            check(&|m: &mut ToyModel| &mut m.layers[li].bias[i], g);
        }
    }
    if let Some(gh) = &analytic.head {
        for ((r, c), &g) in gh.indexed_iter() {
            check(&|m: &mut ToyModel| &mut m.head[[r, c]], g);
        }
    }
}

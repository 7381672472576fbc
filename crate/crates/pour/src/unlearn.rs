//! Class unlearning: closed-form projection (POUR-P), projection-guided
//! distillation (POUR-D), and the random-label / gradient-ascent
//! baselines. All variants operate on the forget set only.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PourError, Result};
use crate::geometry::{projector_from_direction, Projector};
use crate::metrics::FeatureSource;
use crate::model::{
    apply_update, argmax_rows, backward_cross_entropy, backward_l2_feature_loss, forward_features,
    softmax_rows, train_supervised, zero_like, ToyModel, TrainConfig,
};
use crate::synthetic::{empirical_class_mean, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSource {
    /// Use the classifier head column for the forgotten class.
    HeadColumn,
    /// Use the empirical class mean of penultimate features on the
    /// forget set.
    EmpiricalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlearnVariant {
    PourP,
    PourD,
    RandomLabel,
    GradientAscent,
}

impl UnlearnVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnlearnVariant::PourP => "pour_p",
            UnlearnVariant::PourD => "pour_d",
            UnlearnVariant::RandomLabel => "random_label",
            UnlearnVariant::GradientAscent => "gradient_ascent",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnlearnConfig {
    pub forget_class: usize,
    pub direction_source: DirectionSource,
    pub variant: UnlearnVariant,
    pub train: TrainConfig,
    /// Per-step global update-norm clip for gradient ascent.
    pub ascent_clip: f64,
    /// Snapshot the POUR-D student every this many steps (0 = never).
    pub checkpoint_every: usize,
}

impl UnlearnConfig {
    pub fn new(forget_class: usize, variant: UnlearnVariant) -> UnlearnConfig {
        UnlearnConfig {
            forget_class,
            direction_source: DirectionSource::HeadColumn,
            variant,
            // defaults: 500 steps at 0.01, full batch
            train: TrainConfig::full_batch(500, 0.01, 0),
            ascent_clip: 1.0,
            checkpoint_every: 0,
        }
    }
}

/// The original model with a projection stage appended after the
/// extractor. The extractor weights themselves are untouched, so
/// before/after representation comparisons remain possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedModel {
    pub model: ToyModel,
    pub projector: Projector,
    pub forget_class: usize,
}

impl ProjectedModel {
    pub fn logits(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        let features = self.features(inputs)?;
        Ok(features.dot(&self.model.head))
    }

    /// Predicted labels. The forgotten class is never predicted: the
    /// argmax runs over retained classes only, ties broken to the lowest
    /// retained index.
    pub fn classify(&self, inputs: &Array2<f64>) -> Result<Vec<usize>> {
        let logits = self.logits(inputs)?;
        Ok(logits
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = None;
                for (c, &v) in row.iter().enumerate() {
                    if c == self.forget_class {
                        continue;
                    }
                    match best {
                        None => best = Some((c, v)),
                        Some((_, bv)) if v > bv => best = Some((c, v)),
                        _ => {}
                    }
                }
                best.expect("at least one retained class").0
            })
            .collect())
    }
}

impl FeatureSource for ProjectedModel {
    fn features(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        let raw = forward_features(&self.model, inputs)?;
        Ok(self.projector.apply_rows(&raw))
    }
}

/// Closed-form unlearning: append the projector `P = I - w w^T/||w||^2`
/// after the extractor, head unchanged. The direction `w` comes from the
/// head column or from the empirical forget-class feature mean.
pub fn pour_p(
    model: &ToyModel,
    config: &UnlearnConfig,
    forget_features_for_mean: Option<&FeatureMatrix>,
) -> Result<(ProjectedModel, Projector)> {
    if config.forget_class >= model.class_count {
        return Err(PourError::ClassOutOfRange {
            index: config.forget_class,
            count: model.class_count,
        });
    }
    let direction = match config.direction_source {
        DirectionSource::HeadColumn => model.head.column(config.forget_class).to_owned(),
        DirectionSource::EmpiricalMean => {
            let forget = forget_features_for_mean.ok_or(PourError::EmptyForgetSet)?;
            if forget.is_empty() {
                return Err(PourError::EmptyForgetSet);
            }
            let features = forward_features(model, &forget.rows)?;
            let fm = FeatureMatrix::new(
                features,
                vec![config.forget_class; forget.len()],
                model.class_count,
            )?;
            empirical_class_mean(&fm, config.forget_class)?
        }
    };
    let projector = projector_from_direction(direction.view())?;
    Ok((
        ProjectedModel {
            model: model.clone(),
            projector: projector.clone(),
            forget_class: config.forget_class,
        },
        projector,
    ))
}

/// Outcome of a POUR-D run: the trained student, the full-batch loss
/// trajectory, and optional student snapshots for sweep diagnostics.
#[derive(Debug, Clone)]
pub struct PourDResult {
    pub student: ToyModel,
    pub losses: Vec<f64>,
    pub checkpoints: Vec<(usize, ToyModel)>,
}

/// Distillation unlearning: teacher is the frozen projected model
/// `(P . theta, W)`, the student starts from the original extractor and
/// minimizes the mean L2 feature gap on the forget set. The head stays
/// frozen.
pub fn pour_d(
    model: &ToyModel,
    config: &UnlearnConfig,
    forget_set: &FeatureMatrix,
) -> Result<PourDResult> {
    if forget_set.is_empty() {
        return Err(PourError::EmptyForgetSet);
    }
    let (teacher, _) = pour_p(model, config, Some(forget_set))?;
    let targets = teacher.features(&forget_set.rows)?;

    let mut student = model.clone();
    let mut losses = Vec::with_capacity(config.train.steps);
    let mut checkpoints = Vec::new();
    for step in 0..config.train.steps {
        let (loss, grads) = backward_l2_feature_loss(&student, &forget_set.rows, &targets)?;
        if !loss.is_finite() {
            return Err(PourError::NonFiniteLoss { step });
        }
        losses.push(loss);
        if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 {
            checkpoints.push((step, student.clone()));
        }
        apply_update(
            &mut student,
            &grads,
            &mut None,
            config.train.step_size,
            None,
            None,
        );
    }
    if config.checkpoint_every > 0 {
        checkpoints.push((config.train.steps, student.clone()));
    }
    Ok(PourDResult {
        student,
        losses,
        checkpoints,
    })
}

/// Random-label baseline: retrain the full model on the forget set with
/// labels resampled uniformly from the retained classes.
pub fn baseline_random_label(
    model: &ToyModel,
    forget_set: &FeatureMatrix,
    config: &UnlearnConfig,
) -> Result<ToyModel> {
    if forget_set.is_empty() {
        return Err(PourError::EmptyForgetSet);
    }
    let retained: Vec<usize> = (0..model.class_count)
        .filter(|&c| c != config.forget_class)
        .collect();
    if retained.is_empty() {
        return Err(PourError::InvalidConfig(
            "no retained classes to relabel into".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    let relabeled: Vec<usize> = (0..forget_set.len())
        .map(|_| retained[rng.gen_range(0..retained.len())])
        .collect();
    let relabeled_set = FeatureMatrix::new(forget_set.rows.clone(), relabeled, model.class_count)?;
    train_supervised(model, &relabeled_set, &config.train)
}

/// Gradient-ascent baseline: negated cross-entropy on the forget set with
/// a per-step global update-norm clip.
pub fn baseline_gradient_ascent(
    model: &ToyModel,
    forget_set: &FeatureMatrix,
    config: &UnlearnConfig,
) -> Result<ToyModel> {
    if forget_set.is_empty() {
        return Err(PourError::EmptyForgetSet);
    }
    if config.ascent_clip <= 0.0 {
        return Err(PourError::InvalidClip(config.ascent_clip));
    }
    let mut ascended = model.clone();
    let mut velocity = Some(zero_like(&ascended, true));
    for step in 0..config.train.steps {
        let (loss, mut grads) = backward_cross_entropy(&ascended, &forget_set.rows, &forget_set.labels)?;
        if !loss.is_finite() {
            return Err(PourError::NonFiniteLoss { step });
        }
        // ascend: negate the descent direction
        for (gw, gb) in grads.layers.iter_mut() {
            gw.mapv_inplace(|g| -g);
            gb.mapv_inplace(|g| -g);
        }
        if let Some(gh) = grads.head.as_mut() {
            gh.mapv_inplace(|g| -g);
        }
        apply_update(
            &mut ascended,
            &grads,
            &mut velocity,
            config.train.step_size,
            None,
            Some(config.ascent_clip),
        );
    }
    Ok(ascended)
}

/// Evaluate retained-class logits on forgotten-class samples and report
/// the worst-case magnitude and the worst softmax deviation from uniform
/// over retained classes.
pub fn uniformity_check(
    model: &ProjectedModel,
    forget_features: &FeatureMatrix,
) -> Result<(f64, f64)> {
    let logits = model.logits(&forget_features.rows)?;
    let retained: Vec<usize> = (0..model.model.class_count)
        .filter(|&c| c != model.forget_class)
        .collect();
    let uniform = 1.0 / retained.len() as f64;
    let mut max_logit = 0.0f64;
    let mut max_dev = 0.0f64;
    for row in logits.axis_iter(Axis(0)) {
        let retained_logits = Array2::from_shape_fn((1, retained.len()), |(_, j)| row[retained[j]]);
        for &v in retained_logits.iter() {
            max_logit = max_logit.max(v.abs());
        }
        let probs = softmax_rows(&retained_logits);
        for &p in probs.iter() {
            max_dev = max_dev.max((p - uniform).abs());
        }
    }
    Ok((max_logit, max_dev))
}

/// Fraction of forget-set samples a plain model still predicts as the
/// forgotten class.
pub fn forget_prediction_rate(
    model: &ToyModel,
    forget_set: &FeatureMatrix,
    forget_class: usize,
) -> Result<f64> {
    let logits = crate::model::forward_logits(model, &forget_set.rows)?;
    let preds = argmax_rows(&logits);
    Ok(preds.iter().filter(|&&p| p == forget_class).count() as f64 / preds.len() as f64)
}

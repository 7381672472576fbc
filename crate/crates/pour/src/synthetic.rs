//! Synthetic Neural-Collapse feature generation.
//!
//! Samples class-conditional isotropic Gaussians centered on the ETF
//! directions, with balanced labels. Gaussian variates come from
//! `rand_distr::StandardNormal` (ziggurat algorithm) driven by a
//! ChaCha8 counter-based generator, so output is bitwise deterministic
//! per seed on a given platform.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PourError, Result};
use crate::geometry::EtfFrame;

/// An `n x p` matrix of features with per-row class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl FeatureMatrix {
    pub fn new(rows: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<FeatureMatrix> {
        if rows.nrows() != labels.len() {
            return Err(PourError::LengthMismatch {
                left: rows.nrows(),
                right: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(PourError::ClassOutOfRange {
                index: bad,
                count: class_count,
            });
        }
        Ok(FeatureMatrix {
            rows,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }
}

/// Parameters for the NC statistical model: `x | y=i ~ N(v_i, sigma^2 I)`.
#[derive(Debug, Clone)]
pub struct NcGenConfig {
    pub frame: EtfFrame,
    pub sigma: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl NcGenConfig {
    fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(PourError::InvalidConfig("sigma must be nonnegative".into()));
        }
        if self.samples_per_class == 0 {
            return Err(PourError::InvalidConfig(
                "samples_per_class must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Draw `C * samples_per_class` rows, class-major, balanced labels.
pub fn sample_nc_features(config: &NcGenConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let c = config.frame.class_count();
    let d = config.frame.ambient_dim();
    let n = c * config.samples_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut r = 0;
    for class in 0..c {
        let mean = config.frame.direction(class);
        for _ in 0..config.samples_per_class {
            for j in 0..d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                rows[[r, j]] = mean[j] + config.sigma * noise;
            }
            labels.push(class);
            r += 1;
        }
    }
    FeatureMatrix::new(rows, labels, c)
}

/// Arithmetic mean of all rows carrying the given label.
pub fn empirical_class_mean(features: &FeatureMatrix, class_id: usize) -> Result<Array1<f64>> {
    let mut sum = Array1::zeros(features.dim());
    let mut count = 0usize;
    for (row, &label) in features.rows.axis_iter(Axis(0)).zip(&features.labels) {
        if label == class_id {
            sum += &row;
            count += 1;
        }
    }
    if count == 0 {
        return Err(PourError::EmptyClass { class_id });
    }
    Ok(sum / count as f64)
}

/// Split into (forget rows, retained rows), preserving row order within
/// each part. The forget part may be empty (n = 0), which downstream
/// metrics guard on.
pub fn split_forget_retain(
    features: &FeatureMatrix,
    forget_class: usize,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if forget_class >= features.class_count {
        return Err(PourError::ClassOutOfRange {
            index: forget_class,
            count: features.class_count,
        });
    }
    let p = features.dim();
    let mut forget_rows = Vec::new();
    let mut forget_labels = Vec::new();
    let mut retain_rows = Vec::new();
    let mut retain_labels = Vec::new();
    for (row, &label) in features.rows.axis_iter(Axis(0)).zip(&features.labels) {
        if label == forget_class {
            forget_rows.extend(row.iter().copied());
            forget_labels.push(label);
        } else {
            retain_rows.extend(row.iter().copied());
            retain_labels.push(label);
        }
    }
    let forget = FeatureMatrix::new(
        Array2::from_shape_vec((forget_labels.len(), p), forget_rows)
            .expect("row-major reshape cannot fail"),
        forget_labels,
        features.class_count,
    )?;
    let retain = FeatureMatrix::new(
        Array2::from_shape_vec((retain_labels.len(), p), retain_rows)
            .expect("row-major reshape cannot fail"),
        retain_labels,
        features.class_count,
    )?;
    Ok((forget, retain))
}

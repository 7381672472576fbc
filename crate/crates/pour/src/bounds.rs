//! MMD estimation of the representation discrepancy K and Monte-Carlo
//! verification of the three-term decomposition bound on mixtures.
//!
//! The bound splits K(P_z, Q_z) between two feature mixtures
//! `P_z = alpha P_u + (1-alpha) P_nu` and `Q_z = beta Q_u + (1-beta) Q_nu`
//! into a class-separation term, a forgotten-class alignment term, and a
//! retained-class alignment term.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PourError, Result};
use crate::model::forward_features;
use crate::synthetic::FeatureMatrix;
use crate::unlearn::PourDResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-||x - y||^2 / (2 b^2))`; `None` selects the median-heuristic
    /// bandwidth on the pooled sample, fixed per call.
    Gaussian { bandwidth: Option<f64> },
}

/// An isotropic Gaussian component: `N(mean, scale^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub scale: f64,
}

/// Two-component feature mixture with forgotten-class weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub component_u: GaussianComponent,
    pub component_not_u: GaussianComponent,
    pub weight_alpha: f64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight_alpha) {
            return Err(PourError::InvalidConfig(format!(
                "mixture weight {} outside [0, 1]",
                self.weight_alpha
            )));
        }
        if self.component_u.mean.len() != self.component_not_u.mean.len() {
            return Err(PourError::DimensionMismatch {
                expected: self.component_u.mean.len(),
                got: self.component_not_u.mean.len(),
                context: "mixture component means",
            });
        }
        if self.component_u.scale < 0.0 || self.component_not_u.scale < 0.0 {
            return Err(PourError::InvalidConfig(
                "component scale must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.component_u.mean.len()
    }
}

/// Bound verification output. `delta_c` is the P-side class separation
/// used inside the assembly; `delta_c_reference` is the Q-side value,
/// reported alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTriple {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub delta_c: f64,
    pub delta_c_reference: f64,
    pub estimator_std: f64,
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn median_heuristic(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let mut dists = Vec::new();
    let pooled: Vec<ndarray::ArrayView1<f64>> = x
        .axis_iter(Axis(0))
        .chain(y.axis_iter(Axis(0)))
        .collect();
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dists[dists.len() / 2];
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn mean_kernel(x: &Array2<f64>, y: &Array2<f64>, bandwidth: f64) -> f64 {
    let mut total = 0.0;
    for xi in x.axis_iter(Axis(0)) {
        for yj in y.axis_iter(Axis(0)) {
            total += (-sq_dist(xi, yj) / (2.0 * bandwidth * bandwidth)).exp();
        }
    }
    total / (x.nrows() * y.nrows()) as f64
}

/// Biased (V-statistic) MMD estimate, square-rooted and clamped at zero.
/// The linear kernel reduces to the mean-embedding distance
/// `||mean(X) - mean(Y)||`.
pub fn mmd(x: &Array2<f64>, y: &Array2<f64>, kernel: Kernel) -> Result<f64> {
    if x.nrows() < 2 || y.nrows() < 2 {
        return Err(PourError::InvalidConfig(
            "mmd requires at least 2 samples per side".into(),
        ));
    }
    if x.ncols() != y.ncols() {
        return Err(PourError::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
            context: "mmd sample dimension",
        });
    }
    match kernel {
        Kernel::Linear => {
            let mx = x.mean_axis(Axis(0)).unwrap();
            let my = y.mean_axis(Axis(0)).unwrap();
            let diff = &mx - &my;
            Ok(diff.dot(&diff).sqrt())
        }
        Kernel::Gaussian { bandwidth } => {
            let b = match bandwidth {
                Some(b) if b > 0.0 => b,
                Some(b) => return Err(PourError::InvalidBandwidth(b)),
                None => median_heuristic(x, y),
            };
            let mmd_sq = mean_kernel(x, x, b) + mean_kernel(y, y, b) - 2.0 * mean_kernel(x, y, b);
            Ok(mmd_sq.max(0.0).sqrt())
        }
    }
}

fn sample_gaussian(
    component: &GaussianComponent,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let d = component.mean.len();
    Array2::from_shape_fn((n, d), |(_, j)| {
        let g: f64 = StandardNormal.sample(rng);
        component.mean[j] + component.scale * g
    })
}

fn sample_mixture(spec: &MixtureSpec, n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let d = spec.dim();
    let mut rows = Array2::zeros((n, d));
    for i in 0..n {
        let pick: f64 = rng.gen();
        let component = if pick < spec.weight_alpha {
            &spec.component_u
        } else {
            &spec.component_not_u
        };
        for j in 0..d {
            let g: f64 = StandardNormal.sample(rng);
            rows[[i, j]] = component.mean[j] + component.scale * g;
        }
    }
    rows
}

const RESAMPLE_REPS: usize = 10;

/// Estimate the mixture discrepancy and assemble the decomposition bound.
///
/// Five MMD quantities are estimated: the mixture discrepancy itself, the
/// per-component alignments K(P_u, Q_u) and K(P_nu, Q_nu), and the class
/// separation under both conventions (P-side and Q-side). The assembly
/// uses the P-side separation:
///
/// `upper = |alpha - beta| dc + beta A + (1 - beta) B`
/// `lower = |beta A - (1 - beta) B| - |alpha - beta| dc`
///
/// with `A = K(P_u, Q_u)`, `B = K(P_nu, Q_nu)`. The middle estimate and
/// its standard deviation come from 10 independent resamples.
pub fn verify_decomposition_bound(
    p_spec: &MixtureSpec,
    q_spec: &MixtureSpec,
    samples_per_component: usize,
    kernel: Kernel,
    seed: u64,
) -> Result<BoundTriple> {
    p_spec.validate()?;
    q_spec.validate()?;
    if p_spec.dim() != q_spec.dim() {
        return Err(PourError::DimensionMismatch {
            expected: p_spec.dim(),
            got: q_spec.dim(),
            context: "mixture spec dimension",
        });
    }
    if samples_per_component < 100 {
        return Err(PourError::InvalidConfig(
            "samples_per_component must be at least 100".into(),
        ));
    }
    let n = samples_per_component;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let p_u = sample_gaussian(&p_spec.component_u, n, &mut rng);
    let p_nu = sample_gaussian(&p_spec.component_not_u, n, &mut rng);
    let q_u = sample_gaussian(&q_spec.component_u, n, &mut rng);
    let q_nu = sample_gaussian(&q_spec.component_not_u, n, &mut rng);

    let alignment_u = mmd(&p_u, &q_u, kernel)?;
    let alignment_nu = mmd(&p_nu, &q_nu, kernel)?;
    let delta_c = mmd(&p_u, &p_nu, kernel)?;
    let delta_c_reference = mmd(&q_u, &q_nu, kernel)?;

    let mut middles = Vec::with_capacity(RESAMPLE_REPS);
    for rep in 0..RESAMPLE_REPS {
        let mut rep_rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(rep as u64 + 1)));
        let p_z = sample_mixture(p_spec, 2 * n, &mut rep_rng);
        let q_z = sample_mixture(q_spec, 2 * n, &mut rep_rng);
        middles.push(mmd(&p_z, &q_z, kernel)?);
    }
    let middle = middles.iter().sum::<f64>() / middles.len() as f64;
    let var = middles
        .iter()
        .map(|m| (m - middle) * (m - middle))
        .sum::<f64>()
        / (middles.len() - 1) as f64;
    let estimator_std = var.sqrt();

    let alpha = p_spec.weight_alpha;
    let beta = q_spec.weight_alpha;
    let weight_gap = (alpha - beta).abs();
    let upper = weight_gap * delta_c + beta * alignment_u + (1.0 - beta) * alignment_nu;
    let lower = (beta * alignment_u - (1.0 - beta) * alignment_nu).abs() - weight_gap * delta_c;

    Ok(BoundTriple {
        lower,
        middle,
        upper,
        delta_c,
        delta_c_reference,
        estimator_std,
    })
}

/// Track the forgetting coefficient along a POUR-D trajectory.
///
/// For each recorded checkpoint: alpha is the fraction of forget-set
/// samples the student still predicts as the forgotten class, K is the
/// MMD between the student's forget-set features and the reference
/// features. Monotonicity is reported by the caller, not asserted here.
pub fn alpha_sweep(
    pour_run: &PourDResult,
    forget_set: &FeatureMatrix,
    forget_class: usize,
    reference_features: &Array2<f64>,
    kernel: Kernel,
) -> Result<Vec<(usize, f64, f64)>> {
    if forget_set.is_empty() {
        return Err(PourError::EmptyForgetSet);
    }
    let mut out = Vec::with_capacity(pour_run.checkpoints.len());
    for (step, student) in &pour_run.checkpoints {
        let preds = student.classify(&forget_set.rows)?;
        let alpha = preds.iter().filter(|&&p| p == forget_class).count() as f64
            / preds.len() as f64;
        let features = forward_features(student, &forget_set.rows)?;
        let k = mmd(&features, reference_features, kernel)?;
        out.push((*step, alpha, k));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_etf;
    use crate::model::{train_supervised, ToyModel, TrainConfig};
    use crate::synthetic::{sample_nc_features, split_forget_retain, NcGenConfig};
    use crate::unlearn::{pour_d, pour_p, ProjectedModel, UnlearnConfig, UnlearnVariant};
    use crate::metrics::FeatureSource;
    use ndarray::array;

    fn component(mean: Vec<f64>, scale: f64) -> GaussianComponent {
        GaussianComponent { mean, scale }
    }

    fn spec(mu_u: Vec<f64>, mu_nu: Vec<f64>, scale: f64, alpha: f64) -> MixtureSpec {
        MixtureSpec {
            component_u: component(mu_u, scale),
            component_not_u: component(mu_nu, scale),
            weight_alpha: alpha,
        }
    }

    #[test]
    fn mmd_identical_samples_is_zero() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        assert_eq!(mmd(&x, &x, Kernel::Linear).unwrap(), 0.0);
        let g = mmd(&x, &x, Kernel::Gaussian { bandwidth: Some(1.0) }).unwrap();
        assert!(g < 1e-7, "gaussian self-mmd {g}");
    }

    #[test]
    fn linear_mmd_two_point_hand_computation() {
        // X = {(0,0), (2,0)}, Y = {(0,1), (0,3)}
        // mean X = (1,0), mean Y = (0,2), distance = sqrt(5)
        let x = array![[0.0, 0.0], [2.0, 0.0]];
        let y = array![[0.0, 1.0], [0.0, 3.0]];
        let m = mmd(&x, &y, Kernel::Linear).unwrap();
        assert!((m - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mmd_two_point_closed_form() {
        // duplicated single points x, y: MMD = sqrt(2 - 2 exp(-||x-y||^2 / 2b^2))
        let x = array![[1.0, 0.0], [1.0, 0.0]];
        let y = array![[0.0, 2.0], [0.0, 2.0]];
        let b = 1.5;
        let d2: f64 = 1.0 + 4.0;
        let expected = (2.0 - 2.0 * (-d2 / (2.0 * b * b)).exp()).sqrt();
        let m = mmd(&x, &y, Kernel::Gaussian { bandwidth: Some(b) }).unwrap();
        assert!((m - expected).abs() < 1e-12, "{m} vs {expected}");
    }

    #[test]
    fn linear_mmd_equals_mean_distance_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.gen_range(2..30);
            let m = rng.gen_range(2..30);
            let d = rng.gen_range(1..6);
            let x = Array2::from_shape_fn((n, d), |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * 3.0
            });
            let y = Array2::from_shape_fn((m, d), |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * 3.0 + 1.0
            });
            let mx = x.mean_axis(Axis(0)).unwrap();
            let my = y.mean_axis(Axis(0)).unwrap();
            let diff = &mx - &my;
            let oracle = diff.dot(&diff).sqrt();
            let got = mmd(&x, &y, Kernel::Linear).unwrap();
            assert!((got - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn mmd_symmetric_and_nonnegative() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [1.0, 1.0]];
        let y = array![[5.0, 5.0], [4.0, 6.0]];
        for kernel in [
            Kernel::Linear,
            Kernel::Gaussian { bandwidth: Some(2.0) },
            Kernel::Gaussian { bandwidth: None },
        ] {
            let xy = mmd(&x, &y, kernel).unwrap();
            let yx = mmd(&y, &x, kernel).unwrap();
            assert!(xy >= 0.0);
            assert!((xy - yx).abs() < 1e-12);
        }
    }

    #[test]
    fn mmd_rejects_bad_inputs() {
        let x = array![[1.0], [2.0]];
        let one = array![[1.0]];
        assert!(mmd(&one, &x, Kernel::Linear).is_err());
        assert!(matches!(
            mmd(&x, &x, Kernel::Gaussian { bandwidth: Some(-1.0) }),
            Err(PourError::InvalidBandwidth(_))
        ));
        let y3 = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert!(matches!(
            mmd(&x, &y3, Kernel::Linear),
            Err(PourError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn median_heuristic_is_deterministic() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let y = array![[3.0, 3.0], [4.0, 3.0]];
        let a = mmd(&x, &y, Kernel::Gaussian { bandwidth: None }).unwrap();
        let b = mmd(&x, &y, Kernel::Gaussian { bandwidth: None }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_mixtures_straddle_zero() {
        let p = spec(vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], 0.5, 0.3);
        let q = p.clone();
        let triple =
            verify_decomposition_bound(&p, &q, 400, Kernel::Gaussian { bandwidth: None }, 0)
                .unwrap();
        assert!(triple.middle < 3.0 * triple.estimator_std + 0.05, "{triple:?}");
        assert!(triple.lower <= triple.upper);
        assert!(triple.middle >= triple.lower - 3.0 * triple.estimator_std);
        assert!(triple.middle <= triple.upper + 3.0 * triple.estimator_std);
    }

    #[test]
    fn separated_components_saturate_the_bound() {
        // alpha=1, beta=0, mean gap 10, sigma=0.1: the mixture discrepancy
        // is dominated by class separation
        let p = spec(vec![10.0, 0.0], vec![0.0, 0.0], 0.1, 1.0);
        let q = spec(vec![10.0, 0.0], vec![0.0, 0.0], 0.1, 0.0);
        let triple = verify_decomposition_bound(&p, &q, 400, Kernel::Linear, 1).unwrap();
        assert!((triple.upper - triple.delta_c).abs() < 0.1, "{triple:?}");
        assert!((triple.middle - triple.delta_c).abs() < 0.2, "{triple:?}");
        assert!(triple.middle >= triple.lower - 3.0 * triple.estimator_std);
        assert!(triple.middle <= triple.upper + 3.0 * triple.estimator_std);
    }

    #[test]
    fn randomized_configurations_sandwich_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut sandwich_hits = 0;
        let trials = 100;
        for trial in 0..trials {
            let d = rng.gen_range(1..=8usize);
            let mut mean = |scale: f64| -> Vec<f64> {
                (0..d)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g * scale
                    })
                    .collect()
            };
            let mu_u = mean(2.0);
            let mu_nu = mean(2.0);
            let sigma = rng.gen_range(0.05..1.0);
            let alpha = rng.gen_range(0.0..=1.0);
            let beta = rng.gen_range(0.0..=1.0);
            let p = spec(mu_u.clone(), mu_nu.clone(), sigma, alpha);
            let q = spec(mu_u, mu_nu, sigma, beta);
            let triple =
                verify_decomposition_bound(&p, &q, 200, Kernel::Linear, trial as u64).unwrap();
            assert!(triple.lower <= triple.upper, "trial {trial}: {triple:?}");
            let slack = 3.0 * triple.estimator_std;
            if triple.middle >= triple.lower - slack && triple.middle <= triple.upper + slack {
                sandwich_hits += 1;
            }
        }
        assert!(sandwich_hits >= 99, "sandwich held in {sandwich_hits}/{trials}");
    }

    #[test]
    fn both_delta_conventions_reported() {
        let p = spec(vec![3.0, 0.0], vec![0.0, 0.0], 0.2, 0.5);
        let q = spec(vec![1.0, 0.0], vec![0.0, 0.0], 0.2, 0.5);
        let triple = verify_decomposition_bound(&p, &q, 300, Kernel::Linear, 5).unwrap();
        // P-side separation ~3, Q-side ~1
        assert!((triple.delta_c - 3.0).abs() < 0.2, "{triple:?}");
        assert!((triple.delta_c_reference - 1.0).abs() < 0.2, "{triple:?}");
    }

    #[test]
    fn small_sample_count_rejected() {
        let p = spec(vec![0.0], vec![1.0], 0.1, 0.5);
        assert!(verify_decomposition_bound(&p, &p, 50, Kernel::Linear, 0).is_err());
    }

    fn trained_setup() -> (ToyModel, FeatureMatrix, FeatureMatrix, FeatureMatrix) {
        let frame = make_etf(4, 3, 0).unwrap();
        let data = sample_nc_features(&NcGenConfig {
            frame,
            sigma: 0.05,
            samples_per_class: 40,
            seed: 21,
        })
        .unwrap();
        let init = ToyModel::new_seeded(3, 16, 3, 4, 4);
        let trained =
            train_supervised(&init, &data, &TrainConfig::full_batch(1500, 0.5, 0)).unwrap();
        let (d_f, d_r) = split_forget_retain(&data, 1).unwrap();
        (trained, data, d_f, d_r)
    }

    #[test]
    fn alpha_starts_near_one_and_decays() {
        let (trained, _, d_f, _) = trained_setup();
        let mut cfg = UnlearnConfig::new(1, UnlearnVariant::PourD);
        cfg.train.steps = 400;
        cfg.train.step_size = 0.1;
        cfg.checkpoint_every = 50;
        let run = pour_d(&trained, &cfg, &d_f).unwrap();
        let (teacher, _) = pour_p(&trained, &cfg, Some(&d_f)).unwrap();
        let reference = teacher.features(&d_f.rows).unwrap();
        let sweep = alpha_sweep(&run, &d_f, 1, &reference, Kernel::Linear).unwrap();
        let (step0, alpha0, _) = sweep[0];
        assert_eq!(step0, 0);
        assert!(alpha0 > 0.95, "initial alpha {alpha0}");
        let (_, alpha_end, k_end) = *sweep.last().unwrap();
        assert!(alpha_end < 0.05, "final alpha {alpha_end}");
        assert!(k_end < sweep[0].2, "K did not shrink: {sweep:?}");
    }

    #[test]
    fn pour_p_alpha_exactly_zero() {
        let (trained, data, d_f, _) = trained_setup();
        let cfg = UnlearnConfig::new(1, UnlearnVariant::PourP);
        let (projected, _): (ProjectedModel, _) = pour_p(&trained, &cfg, Some(&d_f)).unwrap();
        let preds = projected.classify(&data.rows).unwrap();
        assert!(preds.iter().all(|&p| p != 1));
    }

    #[test]
    fn alpha_sweep_requires_forget_rows() {
        let (trained, _, d_f, _) = trained_setup();
        let mut cfg = UnlearnConfig::new(1, UnlearnVariant::PourD);
        cfg.train.steps = 5;
        cfg.checkpoint_every = 5;
        let run = pour_d(&trained, &cfg, &d_f).unwrap();
        let empty = FeatureMatrix::new(Array2::zeros((0, 3)), vec![], 4).unwrap();
        let reference = Array2::zeros((4, 3));
        assert!(matches!(
            alpha_sweep(&run, &empty, 1, &reference, Kernel::Linear),
            Err(PourError::EmptyForgetSet)
        ));
    }
}

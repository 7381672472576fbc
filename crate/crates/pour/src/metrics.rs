//! Representation and classification metrics: linear CKA, the RUS family,
//! AUS, accuracies, the linear-probe membership attack, and classifier
//! weight-angle diagnostics.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PourError, Result};
use crate::synthetic::FeatureMatrix;

/// Anything that maps raw inputs to penultimate features. Implemented by
/// plain and projected toy models; metric code only sees this surface.
pub trait FeatureSource {
    fn features(&self, inputs: &Array2<f64>) -> Result<Array2<f64>>;
}

/// The CKA/RUS/accuracy bundle for one unlearning run. Entries that need
/// a retrained reference model are `None` when no reference was supplied,
/// mirroring the "--" cells of the result tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cka_f_o: Option<f64>,
    pub cka_r_o: Option<f64>,
    pub cka_f_r: Option<f64>,
    pub cka_r_r: Option<f64>,
    pub rus_o: Option<f64>,
    pub rus_r: Option<f64>,
    pub acc_r: Option<f64>,
    pub acc_f: Option<f64>,
    pub acc_tr: Option<f64>,
    pub acc_tf: Option<f64>,
    pub aus: Option<f64>,
    pub rmia: Option<f64>,
}

/// Column-mean-center each feature dimension across samples.
fn center_columns(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    let means = x.mean_axis(Axis(0)).expect("n >= 1");
    for mut row in out.axis_iter_mut(Axis(0)) {
        row -= &means;
    }
    out
}

/// Linear CKA between two representations of the same `n` samples.
///
/// Both matrices are column-mean-centered, then
/// `CKA = <XX^T, YY^T>_F / (||XX^T||_F ||YY^T||_F)`, computed without
/// forming the n x n Grams via `<XX^T, YY^T>_F = ||X^T Y||_F^2`.
pub fn linear_cka(x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(PourError::LengthMismatch {
            left: x.nrows(),
            right: y.nrows(),
        });
    }
    if x.nrows() < 2 {
        return Err(PourError::InvalidConfig(
            "CKA needs at least 2 samples".into(),
        ));
    }
    let xc = center_columns(x);
    let yc = center_columns(y);
    let cross = xc.t().dot(&yc);
    let numer: f64 = cross.iter().map(|v| v * v).sum();
    let gram_norm = |m: &Array2<f64>| -> f64 {
        let g = m.t().dot(m);
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let nx = gram_norm(&xc);
    let ny = gram_norm(&yc);
    if nx < 1e-12 || ny < 1e-12 {
        return Err(PourError::DegenerateCka);
    }
    Ok(numer / (nx * ny))
}

/// Harmonic mean of the forgetting indicator and retention alignment.
/// `rus(0, 0) = 0` by continuity.
pub fn rus(phi_f: f64, cka_r: f64) -> f64 {
    if phi_f == 0.0 && cka_r == 0.0 {
        return 0.0;
    }
    2.0 * phi_f * cka_r / (phi_f + cka_r)
}

/// Fill the CKA and RUS slots of a report by evaluating the three models
/// on the forget and retain inputs. The retrained-reference slots stay
/// `None` when `model_r` is absent.
pub fn rus_report(
    model_f: &dyn FeatureSource,
    model_o: &dyn FeatureSource,
    model_r: Option<&dyn FeatureSource>,
    d_f: &FeatureMatrix,
    d_r: &FeatureMatrix,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::default();
    let f_on_f = model_f.features(&d_f.rows)?;
    let f_on_r = model_f.features(&d_r.rows)?;
    let o_on_f = model_o.features(&d_f.rows)?;
    let o_on_r = model_o.features(&d_r.rows)?;

    let cka_f_o = linear_cka(&f_on_f, &o_on_f)?;
    let cka_r_o = linear_cka(&f_on_r, &o_on_r)?;
    report.cka_f_o = Some(cka_f_o);
    report.cka_r_o = Some(cka_r_o);
    report.rus_o = Some(rus(1.0 - cka_f_o, cka_r_o));

    if let Some(model_r) = model_r {
        let r_on_f = model_r.features(&d_f.rows)?;
        let r_on_r = model_r.features(&d_r.rows)?;
        let cka_f_r = linear_cka(&f_on_f, &r_on_f)?;
        let cka_r_r = linear_cka(&f_on_r, &r_on_r)?;
        report.cka_f_r = Some(cka_f_r);
        report.cka_r_r = Some(cka_r_r);
        report.rus_r = Some(rus(cka_f_r, cka_r_r));
    }
    Ok(report)
}

/// Adaptive Unlearning Score `(1 - drop_r)/(1 + acc_f)`, with
/// `drop_r = acc_r_original - acc_r_unlearned` left unclamped so a run
/// that improves retained accuracy can score above 1.
pub fn aus(acc_r_unlearned: f64, acc_r_original: f64, acc_f_unlearned: f64) -> f64 {
    let drop_r = acc_r_original - acc_r_unlearned;
    (1.0 - drop_r) / (1.0 + acc_f_unlearned)
}

/// Fraction of exact label matches.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(PourError::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(PourError::InvalidConfig(
            "accuracy needs at least 1 prediction".into(),
        ));
    }
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Membership attack with a linear probe: member rows get label 1,
/// non-member rows label 0, features are standardized per dimension, and
/// each fold trains a logistic classifier by 200 full-batch gradient
/// steps (step 0.1, L2 penalty 1e-3). Returns mean held-out accuracy.
pub fn rmia_linear_probe(
    features_train: &FeatureMatrix,
    features_test: &FeatureMatrix,
    folds: usize,
) -> Result<f64> {
    if features_train.is_empty() || features_test.is_empty() {
        return Err(PourError::EmptyForgetSet);
    }
    if folds < 2 {
        return Err(PourError::InvalidConfig("folds must be at least 2".into()));
    }
    let p = features_train.dim();
    if features_test.dim() != p {
        return Err(PourError::DimensionMismatch {
            expected: p,
            got: features_test.dim(),
            context: "rmia feature dim",
        });
    }
    let n_tr = features_train.len();
    let n_te = features_test.len();
    let n = n_tr + n_te;
    let mut pooled = Array2::zeros((n, p));
    let mut labels = vec![0u8; n];
    for i in 0..n_tr {
        pooled.row_mut(i).assign(&features_train.rows.row(i));
        labels[i] = 1;
    }
    for i in 0..n_te {
        pooled.row_mut(n_tr + i).assign(&features_test.rows.row(i));
    }
    standardize_columns(&mut pooled);

    // deterministic fold assignment: index mod folds, per side so folds
    // stay balanced in both classes
    let fold_of: Vec<usize> = (0..n)
        .map(|i| if i < n_tr { i % folds } else { (i - n_tr) % folds })
        .collect();
    for f in 0..folds {
        if !fold_of.contains(&f) {
            return Err(PourError::EmptyFold { fold: f, folds });
        }
    }

    let mut fold_accs = Vec::with_capacity(folds);
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        if train_idx.is_empty() || test_idx.is_empty() {
            return Err(PourError::EmptyFold { fold: f, folds });
        }
        let (w, b) = fit_logistic(&pooled, &labels, &train_idx);
        let mut hits = 0usize;
        for &i in &test_idx {
            let score: f64 = pooled.row(i).dot(&w) + b;
            let pred = u8::from(score > 0.0);
            if pred == labels[i] {
                hits += 1;
            }
        }
        fold_accs.push(hits as f64 / test_idx.len() as f64);
    }
    fold_accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(fold_accs.iter().sum::<f64>() / folds as f64)
}

fn standardize_columns(x: &mut Array2<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-12);
        col.mapv_inplace(|v| (v - mean) / std);
    }
}

fn fit_logistic(x: &Array2<f64>, labels: &[u8], idx: &[usize]) -> (Array1<f64>, f64) {
    const STEPS: usize = 200;
    const STEP_SIZE: f64 = 0.1;
    const L2: f64 = 1e-3;
    let p = x.ncols();
    let m = idx.len() as f64;
    let mut w = Array1::zeros(p);
    let mut b = 0.0f64;
    for _ in 0..STEPS {
        let mut grad_w = Array1::<f64>::zeros(p);
        let mut grad_b = 0.0f64;
        for &i in idx {
            let row = x.row(i);
            let z: f64 = row.dot(&w) + b;
            let pred = 1.0 / (1.0 + (-z).exp());
            let err = pred - labels[i] as f64;
            grad_w.scaled_add(err, &row);
            grad_b += err;
        }
        grad_w /= m;
        grad_b /= m;
        grad_w.scaled_add(L2, &w);
        w.scaled_add(-STEP_SIZE, &grad_w);
        b -= STEP_SIZE * grad_b;
    }
    (w, b)
}

/// Pairwise angles of classifier head columns in degrees, their mean, and
/// the NC ideal `arccos(-1/(C-1))`.
pub fn weight_angle_stats(head: &Array2<f64>) -> Result<(f64, f64, Vec<f64>)> {
    let c = head.ncols();
    if c < 2 {
        return Err(PourError::InvalidConfig(
            "angle stats need at least 2 columns".into(),
        ));
    }
    let norms: Vec<f64> = (0..c)
        .map(|i| head.column(i).dot(&head.column(i)).sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&n| n < 1e-12) {
        return Err(PourError::ZeroColumn { index: i });
    }
    let mut angles = Vec::with_capacity(c * (c - 1) / 2);
    for i in 0..c {
        for j in (i + 1)..c {
            let cos = head.column(i).dot(&head.column(j)) / (norms[i] * norms[j]);
            angles.push(cos.clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    let mean = angles.iter().sum::<f64>() / angles.len() as f64;
    let ideal = (-1.0 / (c as f64 - 1.0)).acos().to_degrees();
    Ok((mean, ideal, angles))
}

/// Permutation baseline used by the rMIA chance-level tests: shuffles the
/// member/non-member assignment with a seeded rng and reruns the attack,
/// giving an independent estimate of chance accuracy.
pub fn rmia_permutation_baseline(
    features_train: &FeatureMatrix,
    features_test: &FeatureMatrix,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let n_tr = features_train.len();
    let n_te = features_test.len();
    let p = features_train.dim();
    let mut all_rows = Vec::with_capacity(n_tr + n_te);
    for i in 0..n_tr {
        all_rows.push(features_train.rows.row(i).to_owned());
    }
    for i in 0..n_te {
        all_rows.push(features_test.rows.row(i).to_owned());
    }
    let mut order: Vec<usize> = (0..n_tr + n_te).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let build = |idx: &[usize]| -> FeatureMatrix {
        let mut m = Array2::zeros((idx.len(), p));
        for (r, &i) in idx.iter().enumerate() {
            m.row_mut(r).assign(&all_rows[i]);
        }
        FeatureMatrix::new(m, vec![0; idx.len()], 1).unwrap()
    };
    let perm_train = build(&order[..n_tr]);
    let perm_test = build(&order[n_tr..]);
    rmia_linear_probe(&perm_train, &perm_test, folds)
}

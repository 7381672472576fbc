//! Experiment orchestration: generate, train, unlearn, evaluate, report.
//!
//! The unlearning stage is gated to the forget set at the interface
//! level: its function signature only accepts forget rows, and the
//! retain split is wrapped in an access counter whose reading across the
//! stage is recorded in the manifest.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::bounds::{verify_decomposition_bound, BoundTriple, GaussianComponent, Kernel, MixtureSpec};
use crate::config::{ExperimentConfig, ReportFormat};
use crate::error::{PourError, Result};
use crate::geometry::{make_etf, EtfFrame};
use crate::metrics::{
    accuracy, aus, rmia_linear_probe, rus_report, weight_angle_stats, FeatureSource, MetricsReport,
};
use crate::model::{train_supervised, ToyModel};
use crate::synthetic::{sample_nc_features, split_forget_retain, FeatureMatrix, NcGenConfig};
use crate::unlearn::{
    baseline_gradient_ascent, baseline_random_label, pour_d, pour_p, uniformity_check,
    ProjectedModel, UnlearnVariant,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Result of an unlearning stage: either a retrained plain model or the
/// original model with a projection stage.
#[derive(Debug, Clone)]
pub enum UnlearnedModel {
    Plain(ToyModel),
    Projected(ProjectedModel),
}

impl UnlearnedModel {
    pub fn classify(&self, inputs: &Array2<f64>) -> Result<Vec<usize>> {
        match self {
            UnlearnedModel::Plain(model) => model.classify(inputs),
            UnlearnedModel::Projected(model) => model.classify(inputs),
        }
    }

    pub fn head(&self) -> &Array2<f64> {
        match self {
            UnlearnedModel::Plain(model) => &model.head,
            UnlearnedModel::Projected(model) => &model.model.head,
        }
    }
}

impl FeatureSource for UnlearnedModel {
    fn features(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            UnlearnedModel::Plain(model) => model.features(inputs),
            UnlearnedModel::Projected(model) => model.features(inputs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub max_retained_logit: f64,
    pub max_softmax_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSummary {
    pub mean_deg: f64,
    pub ideal_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub variant: String,
    pub seed: u64,
    /// Wall-clock time; excluded from serialized reports so identical
    /// runs stay byte-identical.
    #[serde(skip)]
    pub duration_seconds: f64,
    pub retain_reads_during_unlearn: u64,
    pub metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundTriple>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_trajectory: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniformity: Option<UniformityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_angles: Option<AngleSummary>,
}

/// A read-counting wrapper around the retain split.
struct Monitored<'a> {
    data: &'a FeatureMatrix,
    reads: &'a AtomicU64,
}

impl<'a> Monitored<'a> {
    fn get(&self) -> &'a FeatureMatrix {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.data
    }
}

/// Stage 1: frame plus train and test feature sets.
pub fn generate_stage(
    config: &ExperimentConfig,
) -> Result<(EtfFrame, FeatureMatrix, FeatureMatrix)> {
    let frame = make_etf(config.class_count, config.ambient_dim, config.stage_seed(0))
        .map_err(|e| e.in_stage("generate"))?;
    let train = sample_nc_features(&NcGenConfig {
        frame: frame.clone(),
        sigma: config.sigma,
        samples_per_class: config.samples_per_class,
        seed: config.stage_seed(1),
    })
    .map_err(|e| e.in_stage("generate"))?;
    let test = sample_nc_features(&NcGenConfig {
        frame: frame.clone(),
        sigma: config.sigma,
        samples_per_class: config.test_samples_per_class,
        seed: config.stage_seed(2),
    })
    .map_err(|e| e.in_stage("generate"))?;
    Ok((frame, train, test))
}

/// Stage 2: train the original model on the full training set.
pub fn train_stage(config: &ExperimentConfig, train: &FeatureMatrix) -> Result<ToyModel> {
    let init = ToyModel::new_seeded(
        config.ambient_dim,
        config.model.hidden_dim,
        config.feature_dim(),
        config.class_count,
        config.stage_seed(3),
    );
    train_supervised(&init, train, &config.train.to_train_config(config.stage_seed(4)))
        .map_err(|e| e.in_stage("train"))
}

/// Stage 3: unlearn. Receives the forget split only; the retain split is
/// not a parameter of this function by construction.
pub fn unlearn_stage(
    config: &ExperimentConfig,
    original: &ToyModel,
    forget: &FeatureMatrix,
) -> Result<(UnlearnedModel, Option<Vec<f64>>)> {
    let unlearn_config = config.unlearn.to_unlearn_config(config.stage_seed(5));
    let out = match config.unlearn.variant {
        UnlearnVariant::PourP => {
            let (projected, _) = pour_p(original, &unlearn_config, Some(forget))?;
            (UnlearnedModel::Projected(projected), None)
        }
        UnlearnVariant::PourD => {
            let result = pour_d(original, &unlearn_config, forget)?;
            (UnlearnedModel::Plain(result.student), Some(result.losses))
        }
        UnlearnVariant::RandomLabel => {
            let model = baseline_random_label(original, forget, &unlearn_config)?;
            (UnlearnedModel::Plain(model), None)
        }
        UnlearnVariant::GradientAscent => {
            let model = baseline_gradient_ascent(original, forget, &unlearn_config)?;
            (UnlearnedModel::Plain(model), None)
        }
    };
    Ok(out)
}

/// Optional stage 4: retrained reference, trained from scratch on the
/// retain split only.
pub fn retrain_stage(config: &ExperimentConfig, retain: &FeatureMatrix) -> Result<ToyModel> {
    let init = ToyModel::new_seeded(
        config.ambient_dim,
        config.model.hidden_dim,
        config.feature_dim(),
        config.class_count,
        config.stage_seed(6),
    );
    train_supervised(&init, retain, &config.train.to_train_config(config.stage_seed(7)))
        .map_err(|e| e.in_stage("retrain"))
}

fn fit_component(rows: &Array2<f64>) -> GaussianComponent {
    let mean = rows.mean_axis(Axis(0)).unwrap();
    let n = rows.nrows() as f64;
    let var: f64 = rows
        .axis_iter(Axis(0))
        .map(|row| {
            let diff = &row.to_owned() - &mean;
            diff.dot(&diff)
        })
        .sum::<f64>()
        / (n * rows.ncols() as f64);
    GaussianComponent {
        mean: mean.to_vec(),
        scale: var.sqrt().max(1e-6),
    }
}

fn forget_fraction(preds: &[usize], forget_class: usize) -> f64 {
    preds.iter().filter(|&&p| p == forget_class).count() as f64 / preds.len() as f64
}

/// Fit two-component mixtures to the unlearned and reference feature
/// distributions and verify the decomposition bound on them.
pub fn bound_stage(
    config: &ExperimentConfig,
    unlearned: &UnlearnedModel,
    reference: &dyn FeatureSource,
    reference_preds: &[usize],
    forget: &FeatureMatrix,
    retain: &FeatureMatrix,
) -> Result<Vec<BoundTriple>> {
    let u_forget = unlearned.features(&forget.rows)?;
    let u_retain = unlearned.features(&retain.rows)?;
    let r_forget = reference.features(&forget.rows)?;
    let r_retain = reference.features(&retain.rows)?;

    let alpha = forget_fraction(&unlearned.classify(&forget.rows)?, config.unlearn.forget_class);
    let beta = forget_fraction(reference_preds, config.unlearn.forget_class);

    let p_spec = MixtureSpec {
        component_u: fit_component(&u_forget),
        component_not_u: fit_component(&u_retain),
        weight_alpha: alpha,
    };
    let q_spec = MixtureSpec {
        component_u: fit_component(&r_forget),
        component_not_u: fit_component(&r_retain),
        weight_alpha: beta,
    };
    let triple = verify_decomposition_bound(
        &p_spec,
        &q_spec,
        200,
        Kernel::Linear,
        config.stage_seed(8),
    )
    .map_err(|e| e.in_stage("bounds"))?;
    Ok(vec![triple])
}

/// Full pipeline. Stage errors come back tagged with the stage name.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let (_, train, test) = generate_stage(config)?;
    let original = train_stage(config, &train)?;
    let (manifest, _) = evaluate_pipeline(config, &train, &test, &original)?;
    Ok(manifest)
}

/// The pipeline tail starting from an already-trained original model:
/// unlearn, optional retrained reference, metrics, bounds. Returns the
/// manifest along with the unlearned model so callers can checkpoint it.
pub fn evaluate_pipeline(
    config: &ExperimentConfig,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    original: &ToyModel,
) -> Result<(RunManifest, UnlearnedModel)> {
    config.validate()?;
    let started = Instant::now();
    let forget_class = config.unlearn.forget_class;

    let (forget_train, retain_train) =
        split_forget_retain(train, forget_class).map_err(|e| e.in_stage("generate"))?;
    let (forget_test, retain_test) =
        split_forget_retain(test, forget_class).map_err(|e| e.in_stage("generate"))?;

    // forget-only gate: the retain split sits behind a read counter for
    // the duration of the unlearn stage
    let reads = AtomicU64::new(0);
    let monitored = Monitored {
        data: &retain_train,
        reads: &reads,
    };
    let before = reads.load(Ordering::Relaxed);
    let (unlearned, losses) = unlearn_stage(config, original, &forget_train)
        .map_err(|e| e.in_stage("unlearn"))?;
    let retain_reads_during_unlearn = reads.load(Ordering::Relaxed) - before;

    let reference = if config.metrics.rus_r {
        Some(retrain_stage(config, monitored.get())?)
    } else {
        None
    };

    // POUR-P does not touch the extractor, so representation metrics
    // against the original are vacuous (identical features pre-projection)
    // and stay empty unless post-projection comparison is requested
    let representation_metrics = config.metrics.rus_o
        && (config.unlearn.variant != UnlearnVariant::PourP || config.metrics.cka_after_projection);
    let mut metrics = if representation_metrics {
        rus_report(
            &unlearned,
            original,
            reference.as_ref().map(|r| r as &dyn FeatureSource),
            &forget_train,
            monitored.get(),
        )
        .map_err(|e| e.in_stage("metrics"))?
    } else {
        MetricsReport::default()
    };

    let retain = monitored.get();
    let acc_r = accuracy(&unlearned.classify(&retain.rows)?, &retain.labels)
        .map_err(|e| e.in_stage("metrics"))?;
    let acc_f = accuracy(&unlearned.classify(&forget_train.rows)?, &forget_train.labels)
        .map_err(|e| e.in_stage("metrics"))?;
    let acc_tr = accuracy(&unlearned.classify(&retain_test.rows)?, &retain_test.labels)
        .map_err(|e| e.in_stage("metrics"))?;
    let acc_tf = accuracy(&unlearned.classify(&forget_test.rows)?, &forget_test.labels)
        .map_err(|e| e.in_stage("metrics"))?;
    let acc_r_original = accuracy(&original.classify(&retain.rows)?, &retain.labels)
        .map_err(|e| e.in_stage("metrics"))?;
    metrics.acc_r = Some(acc_r);
    metrics.acc_f = Some(acc_f);
    metrics.acc_tr = Some(acc_tr);
    metrics.acc_tf = Some(acc_tf);
    metrics.aus = Some(aus(acc_r, acc_r_original, acc_f));

    if config.metrics.rmia {
        let members = FeatureMatrix::new(
            unlearned.features(&monitored.get().rows)?,
            vec![0; retain_train.len()],
            1,
        )?;
        let non_members = FeatureMatrix::new(
            unlearned.features(&retain_test.rows)?,
            vec![0; retain_test.len()],
            1,
        )?;
        metrics.rmia = Some(
            rmia_linear_probe(&members, &non_members, 5).map_err(|e| e.in_stage("metrics"))?,
        );
    }

    let uniformity = match &unlearned {
        UnlearnedModel::Projected(projected) => {
            let (max_retained_logit, max_softmax_deviation) =
                uniformity_check(projected, &forget_train).map_err(|e| e.in_stage("metrics"))?;
            Some(UniformityReport {
                max_retained_logit,
                max_softmax_deviation,
            })
        }
        UnlearnedModel::Plain(_) => None,
    };

    let head_angles = if config.metrics.angles {
        let (mean_deg, ideal_deg, _) =
            weight_angle_stats(unlearned.head()).map_err(|e| e.in_stage("metrics"))?;
        Some(AngleSummary {
            mean_deg,
            ideal_deg,
        })
    } else {
        None
    };

    let bounds = if config.metrics.bounds {
        let (reference_source, reference_preds): (&dyn FeatureSource, Vec<usize>) =
            match &reference {
                Some(r) => (r, r.classify(&forget_train.rows)?),
                None => (original, original.classify(&forget_train.rows)?),
            };
        Some(bound_stage(
            config,
            &unlearned,
            reference_source,
            &reference_preds,
            &forget_train,
            monitored.get(),
        )?)
    } else {
        None
    };

    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config_hash: config.hash(),
        variant: config.unlearn.variant.as_str().to_string(),
        seed: config.seed,
        duration_seconds: started.elapsed().as_secs_f64(),
        retain_reads_during_unlearn,
        metrics,
        bounds,
        loss_trajectory: losses,
        uniformity,
        head_angles,
    };
    Ok((manifest, unlearned))
}

/// Flatten an unlearned model into a single plain checkpoint: for the
/// projected variant the projector becomes one extra linear layer after
/// the extractor. The retained-only prediction rule is not part of the
/// checkpoint; rebuild a `ProjectedModel` for classification.
pub fn composed_model(unlearned: &UnlearnedModel) -> ToyModel {
    match unlearned {
        UnlearnedModel::Plain(model) => model.clone(),
        UnlearnedModel::Projected(projected) => {
            let mut layers = projected.model.layers.clone();
            let p = projected.projector.matrix().clone();
            let dim = p.nrows();
            layers.push(crate::model::Layer {
                weight: p,
                bias: ndarray::Array1::zeros(dim),
                activation: crate::model::Activation::Linear,
            });
            ToyModel {
                layers,
                head: projected.model.head.clone(),
                class_count: projected.model.class_count,
            }
        }
    }
}

/// Run the same config across consecutive seeds; each run is an
/// independent pipeline with `seed = base_seed + index`.
pub fn run_sweep(config: &ExperimentConfig, runs: usize) -> Result<Vec<RunManifest>> {
    let mut manifests = Vec::with_capacity(runs);
    for index in 0..runs {
        let mut run_config = config.clone();
        run_config.seed = config.seed + index as u64;
        manifests.push(run_experiment(&run_config)?);
    }
    Ok(manifests)
}

const CSV_HEADER: &str =
    "variant,seed,acc_r,acc_f,acc_tr,acc_tf,aus,rmia,cka_f_o,cka_r_o,rus_o,cka_f_r,cka_r_r,rus_r";

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "--".to_string(),
    }
}

fn metric_columns(m: &MetricsReport) -> [Option<f64>; 12] {
    [
        m.acc_r, m.acc_f, m.acc_tr, m.acc_tf, m.aus, m.rmia, m.cka_f_o, m.cka_r_o, m.rus_o,
        m.cka_f_r, m.cka_r_r, m.rus_r,
    ]
}

fn summary_cell(values: &[f64]) -> String {
    if values.is_empty() {
        return "--".to_string();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    format!("{mean:.4}±{std:.4}")
}

/// Render manifests in the report format. CSV gets one row per manifest
/// in the fixed column order, absent metrics as "--", and a mean±std
/// summary row when there is more than one manifest.
pub fn render_report(manifests: &[RunManifest], format: ReportFormat) -> Result<String> {
    if manifests.is_empty() {
        return Err(PourError::InvalidConfig(
            "report needs at least one manifest".into(),
        ));
    }
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(manifests)?;
            text.push('\n');
            Ok(text)
        }
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for manifest in manifests {
                let mut row = vec![manifest.variant.clone(), manifest.seed.to_string()];
                row.extend(metric_columns(&manifest.metrics).iter().map(|&v| cell(v)));
                out.push_str(&row.join(","));
                out.push('\n');
            }
            if manifests.len() > 1 {
                let mut row = vec!["summary".to_string(), "--".to_string()];
                for i in 0..12 {
                    let values: Vec<f64> = manifests
                        .iter()
                        .filter_map(|m| metric_columns(&m.metrics)[i])
                        .collect();
                    row.push(summary_cell(&values));
                }
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

pub fn emit_report(manifests: &[RunManifest], format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(manifests, format)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MetricsSection;

    fn fast_config(variant: UnlearnVariant, sigma: f64) -> ExperimentConfig {
        let mut config = ExperimentConfig::minimal(4, 3, sigma);
        config.samples_per_class = 30;
        config.test_samples_per_class = 30;
        config.train.steps = 600;
        config.unlearn.variant = variant;
        config.unlearn.forget_class = 1;
        config
    }

    #[test]
    fn pour_p_sigma_zero_forgets_completely() {
        let mut config = fast_config(UnlearnVariant::PourP, 0.0);
        // at sigma = 0 the forget features coincide with their mean, so
        // the empirical-mean direction annihilates them exactly
        config.unlearn.direction_source = crate::unlearn::DirectionSource::EmpiricalMean;
        let manifest = run_experiment(&config).unwrap();
        assert_eq!(manifest.metrics.acc_f, Some(0.0));
        assert_eq!(manifest.metrics.acc_tf, Some(0.0));
        let uniformity = manifest.uniformity.unwrap();
        assert!(uniformity.max_retained_logit < 1e-9, "{uniformity:?}");
        assert!(uniformity.max_softmax_deviation < 1e-12, "{uniformity:?}");
        assert_eq!(manifest.metrics.acc_r, Some(1.0));
        // projection leaves the extractor alone: representation columns empty
        assert!(manifest.metrics.cka_f_o.is_none());
        assert!(manifest.metrics.rus_o.is_none());
    }

    #[test]
    fn post_projection_cka_available_on_request() {
        let mut config = fast_config(UnlearnVariant::PourP, 0.05);
        config.metrics.cka_after_projection = true;
        let manifest = run_experiment(&config).unwrap();
        let cka_f = manifest.metrics.cka_f_o.unwrap();
        let cka_r = manifest.metrics.cka_r_o.unwrap();
        // forget-side features changed a lot, retain-side barely
        assert!(cka_f < cka_r, "cka_f {cka_f} vs cka_r {cka_r}");
        assert!(cka_r > 0.9);
        assert!(manifest.metrics.rus_o.is_some());
    }

    #[test]
    fn pour_d_manifest_has_trajectory_and_rus() {
        let mut config = fast_config(UnlearnVariant::PourD, 0.05);
        config.unlearn.steps = 200;
        config.unlearn.step_size = 0.1;
        let manifest = run_experiment(&config).unwrap();
        let losses = manifest.loss_trajectory.as_ref().unwrap();
        assert_eq!(losses.len(), 200);
        assert!(losses.last().unwrap() < &losses[0]);
        assert!(manifest.metrics.rus_o.is_some());
        assert!(manifest.metrics.rus_r.is_none());
        assert!(manifest.metrics.aus.is_some());
    }

    #[test]
    fn unlearn_stage_never_reads_retain_split() {
        for variant in [
            UnlearnVariant::PourP,
            UnlearnVariant::PourD,
            UnlearnVariant::RandomLabel,
            UnlearnVariant::GradientAscent,
        ] {
            let mut config = fast_config(variant, 0.05);
            config.unlearn.steps = 50;
            let manifest = run_experiment(&config).unwrap();
            assert_eq!(manifest.retain_reads_during_unlearn, 0, "{variant:?}");
        }
    }

    #[test]
    fn identical_configs_give_identical_reports() {
        let mut config = fast_config(UnlearnVariant::PourD, 0.05);
        config.unlearn.steps = 100;
        config.metrics.rmia = true;
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.metrics, b.metrics);
        let ra = render_report(std::slice::from_ref(&a), ReportFormat::Csv).unwrap();
        let rb = render_report(std::slice::from_ref(&b), ReportFormat::Csv).unwrap();
        assert_eq!(ra, rb);
        let ja = render_report(std::slice::from_ref(&a), ReportFormat::Json).unwrap();
        let jb = render_report(std::slice::from_ref(&b), ReportFormat::Json).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn retrained_reference_fills_rus_r() {
        let mut config = fast_config(UnlearnVariant::PourP, 0.05);
        config.metrics.rus_r = true;
        config.metrics.cka_after_projection = true;
        config.train.steps = 400;
        let manifest = run_experiment(&config).unwrap();
        assert!(manifest.metrics.rus_r.is_some());
        assert!(manifest.metrics.cka_f_r.is_some());
    }

    #[test]
    fn bound_stage_produces_consistent_triple() {
        let mut config = fast_config(UnlearnVariant::PourP, 0.1);
        config.metrics.bounds = true;
        let manifest = run_experiment(&config).unwrap();
        let triples = manifest.bounds.unwrap();
        assert_eq!(triples.len(), 1);
        let t = &triples[0];
        assert!(t.lower <= t.upper, "{t:?}");
        assert!(t.middle >= t.lower - 3.0 * t.estimator_std, "{t:?}");
        assert!(t.middle <= t.upper + 3.0 * t.estimator_std, "{t:?}");
    }

    #[test]
    fn csv_report_shape_and_sentinels() {
        let config = fast_config(UnlearnVariant::PourP, 0.0);
        let manifest = run_experiment(&config).unwrap();
        let report = render_report(std::slice::from_ref(&manifest), ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = report.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 14);
        assert_eq!(cells[0], "pour_p");
        assert_eq!(cells[3], "0.0000"); // acc_f
        // pour_p row: every representation column carries the sentinel
        for i in 8..14 {
            assert_eq!(cells[i], "--", "column {i}");
        }
        // rmia disabled by default
        assert_eq!(cells[7], "--");
    }

    #[test]
    fn sweep_adds_summary_row() {
        let mut config = fast_config(UnlearnVariant::PourP, 0.05);
        config.train.steps = 300;
        let manifests = run_sweep(&config, 3).unwrap();
        assert_eq!(manifests.len(), 3);
        let seeds: Vec<u64> = manifests.iter().map(|m| m.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2]);
        let report = render_report(&manifests, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = report.trim_end().lines().collect();
        assert_eq!(lines.len(), 5);
        let summary: Vec<&str> = lines[4].split(',').collect();
        assert_eq!(summary[0], "summary");
        assert_eq!(summary[1], "--");
        assert!(summary[2].contains('±'));
        assert_eq!(summary[13], "--");
    }

    #[test]
    fn json_report_is_schema_stable() {
        let config = fast_config(UnlearnVariant::PourP, 0.05);
        let manifest = run_experiment(&config).unwrap();
        let report = render_report(std::slice::from_ref(&manifest), ReportFormat::Json).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
        let first = &parsed[0];
        assert_eq!(first["variant"], "pour_p");
        assert_eq!(first["config_hash"].as_str().unwrap().len(), 64);
        assert!(first.get("duration_seconds").is_none());
        assert_eq!(first["retain_reads_during_unlearn"], 0);
    }

    #[test]
    fn composed_checkpoint_reproduces_projected_features() {
        let config = fast_config(UnlearnVariant::PourP, 0.05);
        let (_, train, test) = generate_stage(&config).unwrap();
        let original = train_stage(&config, &train).unwrap();
        let (_, unlearned) = evaluate_pipeline(&config, &train, &test, &original).unwrap();
        let composed = composed_model(&unlearned);
        let a = unlearned.features(&test.rows).unwrap();
        let b = composed.features(&test.rows).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_config_rejected_before_running() {
        let mut config = fast_config(UnlearnVariant::PourP, 0.05);
        config.unlearn.forget_class = 9;
        let err = run_experiment(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn stage_tagging_names_the_failing_stage() {
        let metrics = MetricsSection::default();
        let _ = metrics;
        let mut config = fast_config(UnlearnVariant::GradientAscent, 0.05);
        // force a numerical blowup in the unlearn stage
        config.unlearn.step_size = 1e12;
        config.unlearn.ascent_clip = 1e15;
        config.unlearn.steps = 2000;
        match run_experiment(&config) {
            Err(e) => {
                let msg = e.to_string();
                assert!(
                    msg.contains("unlearn") || e.exit_code() != 0,
                    "unexpected error shape: {msg}"
                );
            }
            Ok(manifest) => {
                // ascent at absurd step sizes may still terminate; the run
                // must then report finite metrics
                assert!(manifest.metrics.acc_r.unwrap().is_finite());
            }
        }
    }
}

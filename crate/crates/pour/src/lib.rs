//! Representation-level class unlearning on simplex-ETF geometry.
//!
//! The crate builds simplex equiangular tight frames, samples synthetic
//! Neural-Collapse features around them, trains a small extractor, and
//! unlearns a class either by closed-form projection (POUR-P) or by
//! projection-guided distillation (POUR-D), with random-label and
//! gradient-ascent baselines. A metric suite (CKA, RUS, AUS, rMIA,
//! weight angles) and an MMD-based decomposition-bound verifier quantify
//! the result, and a seeded runner makes every experiment reproducible
//! bit for bit.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability, and the `pour` binary for the stage-level CLI.

pub mod bounds;
pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod persist;
pub mod runner;
pub mod synthetic;
pub mod unlearn;

pub use bounds::{mmd, verify_decomposition_bound, BoundTriple, Kernel, MixtureSpec};
pub use config::{load_config, ExperimentConfig, ReportFormat};
pub use error::{PourError, Result};
pub use geometry::{gram_residual, make_etf, project_frame, projector_from_direction, EtfFrame, Projector};
pub use metrics::{accuracy, aus, linear_cka, rmia_linear_probe, rus, FeatureSource, MetricsReport};
pub use model::{forward_features, forward_logits, train_supervised, ToyModel, TrainConfig};
pub use persist::{load_checkpoint, save_checkpoint, Checkpoint};
pub use runner::{
    composed_model, emit_report, evaluate_pipeline, run_experiment, run_sweep, RunManifest,
    UnlearnedModel,
};
pub use synthetic::{sample_nc_features, split_forget_retain, FeatureMatrix, NcGenConfig};
pub use unlearn::{pour_d, pour_p, ProjectedModel, UnlearnConfig, UnlearnVariant};

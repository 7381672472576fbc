//! The whole experiment in one call: generate, train, unlearn, evaluate,
//! and print the CSV report for a small seed sweep.

use pour::config::{ExperimentConfig, ReportFormat};
use pour::runner::{render_report, run_sweep};
use pour::unlearn::UnlearnVariant;

fn main() {
    let mut config = ExperimentConfig::minimal(4, 3, 0.05);
    config.samples_per_class = 30;
    config.test_samples_per_class = 30;
    config.train.steps = 600;
    config.unlearn.variant = UnlearnVariant::PourD;
    config.unlearn.steps = 200;
    config.unlearn.step_size = 0.1;
    config.metrics.rmia = true;
    config.resolve().unwrap();
    println!("config hash: {}", config.hash());

    let manifests = run_sweep(&config, 3).unwrap();
    for m in &manifests {
        println!(
            "seed {}: retain reads during unlearn = {}, final distillation loss = {:.2e}",
            m.seed,
            m.retain_reads_during_unlearn,
            m.loss_trajectory.as_ref().unwrap().last().unwrap()
        );
    }
    println!();
    print!("{}", render_report(&manifests, ReportFormat::Csv).unwrap());
}

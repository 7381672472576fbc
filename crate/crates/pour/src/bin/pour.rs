//! Stage-level CLI over the experiment pipeline. Every subcommand reads
//! the same JSON config; checkpoints connect the stages through the
//! output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pour::config::{load_config, ExperimentConfig, ReportFormat};
use pour::error::{PourError, Result};
use pour::persist::{load_features, load_model, save_checkpoint, Checkpoint};
use pour::runner::{
    composed_model, emit_report, evaluate_pipeline, generate_stage, train_stage, unlearn_stage,
};
use pour::synthetic::split_forget_retain;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(value: FormatArg) -> ReportFormat {
        match value {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Parser)]
#[command(name = "pour", version, about = "Projection unlearning experiment harness")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true, default_value = "pour.json")]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the report format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the ETF frame and the train/test feature sets.
    Gen,
    /// Train the original model on the generated training set.
    Train,
    /// Apply the configured unlearning variant to the trained model.
    Unlearn,
    /// Compute metrics from the stored checkpoints and emit a report.
    Eval,
    /// Verify the discrepancy decomposition bound for this pipeline.
    BoundCheck,
    /// Run the whole pipeline in one process and emit everything.
    Run,
}

fn frame_path(dir: &Path) -> PathBuf {
    dir.join("frame.pour")
}
fn train_path(dir: &Path) -> PathBuf {
    dir.join("train.pour")
}
fn test_path(dir: &Path) -> PathBuf {
    dir.join("test.pour")
}
fn original_path(dir: &Path) -> PathBuf {
    dir.join("model_original.pour")
}
fn unlearned_path(dir: &Path) -> PathBuf {
    dir.join("model_unlearned.pour")
}
fn report_path(dir: &Path, format: ReportFormat) -> PathBuf {
    match format {
        ReportFormat::Csv => dir.join("report.csv"),
        ReportFormat::Json => dir.join("report.json"),
    }
}

fn cmd_gen(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let (frame, train, test) = generate_stage(config)?;
    save_checkpoint(&Checkpoint::Frame(frame), &frame_path(dir))?;
    save_checkpoint(&Checkpoint::Features(train), &train_path(dir))?;
    save_checkpoint(&Checkpoint::Features(test), &test_path(dir))?;
    println!("wrote {}, train/test feature sets", frame_path(dir).display());
    Ok(())
}

fn cmd_train(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let train = load_features(&train_path(dir))?;
    let model = train_stage(config, &train)?;
    save_checkpoint(&Checkpoint::Model(model), &original_path(dir))?;
    println!("wrote {}", original_path(dir).display());
    Ok(())
}

fn cmd_unlearn(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let original = load_model(&original_path(dir))?;
    let train = load_features(&train_path(dir))?;
    let (forget, _) = split_forget_retain(&train, config.unlearn.forget_class)?;
    let (unlearned, _) = unlearn_stage(config, &original, &forget)?;
    save_checkpoint(
        &Checkpoint::Model(composed_model(&unlearned)),
        &unlearned_path(dir),
    )?;
    println!("wrote {}", unlearned_path(dir).display());
    Ok(())
}

fn evaluate_from_checkpoints(config: &ExperimentConfig, dir: &Path) -> Result<pour::RunManifest> {
    let train = load_features(&train_path(dir))?;
    let test = load_features(&test_path(dir))?;
    let original = load_model(&original_path(dir))?;
    let (manifest, _) = evaluate_pipeline(config, &train, &test, &original)?;
    Ok(manifest)
}

fn cmd_eval(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let manifest = evaluate_from_checkpoints(config, dir)?;
    let path = report_path(dir, config.output.format);
    emit_report(std::slice::from_ref(&manifest), config.output.format, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_bound_check(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut config = config.clone();
    config.metrics.bounds = true;
    let manifest = evaluate_from_checkpoints(&config, dir)?;
    let triples = manifest.bounds.expect("bounds were requested");
    let path = dir.join("bounds.json");
    let mut text = serde_json::to_string_pretty(&triples).map_err(PourError::from)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    for t in &triples {
        println!(
            "lower {:.4} <= middle {:.4} <= upper {:.4} (delta_c {:.4}, std {:.4})",
            t.lower, t.middle, t.upper, t.delta_c, t.estimator_std
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_run(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let (frame, train, test) = generate_stage(config)?;
    let original = train_stage(config, &train)?;
    let (manifest, unlearned) = evaluate_pipeline(config, &train, &test, &original)?;
    save_checkpoint(&Checkpoint::Frame(frame), &frame_path(dir))?;
    save_checkpoint(&Checkpoint::Features(train), &train_path(dir))?;
    save_checkpoint(&Checkpoint::Features(test), &test_path(dir))?;
    save_checkpoint(&Checkpoint::Model(original), &original_path(dir))?;
    save_checkpoint(
        &Checkpoint::Model(composed_model(&unlearned)),
        &unlearned_path(dir),
    )?;
    let path = report_path(dir, config.output.format);
    emit_report(std::slice::from_ref(&manifest), config.output.format, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let mut config = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.display().to_string();
    }
    if let Some(format) = cli.format {
        config.output.format = format.into();
    }
    let dir = PathBuf::from(&config.output.dir);
    std::fs::create_dir_all(&dir)?;
    match cli.command {
        Command::Gen => cmd_gen(&config, &dir),
        Command::Train => cmd_train(&config, &dir),
        Command::Unlearn => cmd_unlearn(&config, &dir),
        Command::Eval => cmd_eval(&config, &dir),
        Command::BoundCheck => cmd_bound_check(&config, &dir),
        Command::Run => cmd_run(&config, &dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

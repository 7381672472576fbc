//! Distillation unlearning: the student chases the projected teacher on
//! the forget set, and the forgetting coefficient decays along the way.

use pour::bounds::{alpha_sweep, Kernel};
use pour::geometry::make_etf;
use pour::metrics::FeatureSource;
use pour::model::{train_supervised, ToyModel, TrainConfig};
use pour::synthetic::{sample_nc_features, split_forget_retain, NcGenConfig};
use pour::unlearn::{pour_d, pour_p, UnlearnConfig, UnlearnVariant};

fn main() {
    let frame = make_etf(4, 3, 0).unwrap();
    let data = sample_nc_features(&NcGenConfig {
        frame,
        sigma: 0.05,
        samples_per_class: 40,
        seed: 21,
    })
    .unwrap();
    let init = ToyModel::new_seeded(3, 16, 3, 4, 4);
    let original = train_supervised(&init, &data, &TrainConfig::full_batch(1500, 0.5, 0)).unwrap();
    let (d_f, _) = split_forget_retain(&data, 1).unwrap();

    let mut cfg = UnlearnConfig::new(1, UnlearnVariant::PourD);
    cfg.train.steps = 400;
    cfg.train.step_size = 0.1;
    cfg.checkpoint_every = 50;
    let run = pour_d(&original, &cfg, &d_f).unwrap();
    println!(
        "distillation loss: {:.3e} -> {:.3e} over {} steps",
        run.losses[0],
        run.losses.last().unwrap(),
        run.losses.len()
    );

    let (teacher, _) = pour_p(&original, &cfg, Some(&d_f)).unwrap();
    let reference = teacher.features(&d_f.rows).unwrap();
    let sweep = alpha_sweep(&run, &d_f, 1, &reference, Kernel::Linear).unwrap();
    println!("step   alpha   K(student, teacher)");
    for (step, alpha, k) in sweep {
        println!("{step:>4}   {alpha:.3}   {k:.4}");
    }
}

//! Compare the training-based baselines against projection unlearning on
//! the same model: random relabeling and clipped gradient ascent.

use pour::geometry::make_etf;
use pour::metrics::{accuracy, aus};
use pour::model::{train_supervised, ToyModel, TrainConfig};
use pour::synthetic::{sample_nc_features, split_forget_retain, NcGenConfig};
use pour::unlearn::{
    baseline_gradient_ascent, baseline_random_label, pour_p, UnlearnConfig, UnlearnVariant,
};

fn main() {
    let frame = make_etf(4, 3, 0).unwrap();
    let data = sample_nc_features(&NcGenConfig {
        frame,
        sigma: 0.1,
        samples_per_class: 50,
        seed: 7,
    })
    .unwrap();
    let init = ToyModel::new_seeded(3, 16, 3, 4, 2);
    let original = train_supervised(&init, &data, &TrainConfig::full_batch(2000, 0.5, 0)).unwrap();
    let (d_f, d_r) = split_forget_retain(&data, 1).unwrap();
    let acc = |p: &[usize], t: &[usize]| accuracy(p, t).unwrap();
    let acc_r0 = acc(&original.classify(&d_r.rows).unwrap(), &d_r.labels);

    let report = |name: &str, acc_f: f64, acc_r: f64| {
        println!(
            "{name:<16} acc_f {acc_f:.3}  acc_r {acc_r:.3}  aus {:.3}",
            aus(acc_r, acc_r0, acc_f)
        );
    };
    report(
        "original",
        acc(&original.classify(&d_f.rows).unwrap(), &d_f.labels),
        acc_r0,
    );

    let mut cfg = UnlearnConfig::new(1, UnlearnVariant::RandomLabel);
    cfg.train.steps = 500;
    cfg.train.step_size = 0.05;
    let rl = baseline_random_label(&original, &d_f, &cfg).unwrap();
    report(
        "random label",
        acc(&rl.classify(&d_f.rows).unwrap(), &d_f.labels),
        acc(&rl.classify(&d_r.rows).unwrap(), &d_r.labels),
    );

    cfg.variant = UnlearnVariant::GradientAscent;
    cfg.train.step_size = 1.0;
    let ga = baseline_gradient_ascent(&original, &d_f, &cfg).unwrap();
    report(
        "gradient ascent",
        acc(&ga.classify(&d_f.rows).unwrap(), &d_f.labels),
        acc(&ga.classify(&d_r.rows).unwrap(), &d_r.labels),
    );

    cfg.variant = UnlearnVariant::PourP;
    let (projected, _) = pour_p(&original, &cfg, Some(&d_f)).unwrap();
    report(
        "projection",
        acc(&projected.classify(&d_f.rows).unwrap(), &d_f.labels),
        acc(&projected.classify(&d_r.rows).unwrap(), &d_r.labels),
    );
}

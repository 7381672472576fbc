//! Closed-form projection unlearning: one rank-1 projector removes a
//! class while retained decisions survive.

use pour::geometry::make_etf;
use pour::metrics::accuracy;
use pour::model::{train_supervised, ToyModel, TrainConfig};
use pour::synthetic::{sample_nc_features, split_forget_retain, NcGenConfig};
use pour::unlearn::{pour_p, uniformity_check, UnlearnConfig, UnlearnVariant};

fn main() {
    let frame = make_etf(4, 3, 0).unwrap();
    let data = sample_nc_features(&NcGenConfig {
        frame,
        sigma: 0.05,
        samples_per_class: 50,
        seed: 7,
    })
    .unwrap();
    let init = ToyModel::new_seeded(3, 16, 3, 4, 2);
    let original = train_supervised(&init, &data, &TrainConfig::full_batch(1500, 0.5, 0)).unwrap();

    let forget_class = 1;
    let (d_f, d_r) = split_forget_retain(&data, forget_class).unwrap();
    let acc = |preds: &[usize], truth: &[usize]| accuracy(preds, truth).unwrap();
    println!(
        "original: acc_f {:.3}, acc_r {:.3}",
        acc(&original.classify(&d_f.rows).unwrap(), &d_f.labels),
        acc(&original.classify(&d_r.rows).unwrap(), &d_r.labels)
    );

    let cfg = UnlearnConfig::new(forget_class, UnlearnVariant::PourP);
    let (projected, projector) = pour_p(&original, &cfg, Some(&d_f)).unwrap();
    println!(
        "projector removes direction with |v| = {:.4}",
        projector
            .removed_direction()
            .dot(&projector.removed_direction())
            .sqrt()
    );
    println!(
        "unlearned: acc_f {:.3}, acc_r {:.3}",
        acc(&projected.classify(&d_f.rows).unwrap(), &d_f.labels),
        acc(&projected.classify(&d_r.rows).unwrap(), &d_r.labels)
    );
    let (max_logit, max_dev) = uniformity_check(&projected, &d_f).unwrap();
    println!("forget-set retained logits: max |logit| {max_logit:.4}, max softmax deviation {max_dev:.4}");
}

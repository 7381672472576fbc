//! Train the toy extractor to interpolation and check how close the
//! classifier head angles get to the ETF ideal.

use pour::geometry::make_etf;
use pour::metrics::{accuracy, weight_angle_stats};
use pour::model::{train_supervised, ToyModel, TrainConfig};
use pour::synthetic::{sample_nc_features, NcGenConfig};

fn main() {
    let frame = make_etf(4, 3, 0).unwrap();
    let data = sample_nc_features(&NcGenConfig {
        frame,
        sigma: 0.1,
        samples_per_class: 60,
        seed: 6,
    })
    .unwrap();

    let init = ToyModel::new_seeded(3, 32, 3, 4, 1);
    let trained = train_supervised(&init, &data, &TrainConfig::full_batch(4000, 0.5, 0)).unwrap();

    let preds = trained.classify(&data.rows).unwrap();
    println!(
        "train accuracy: {:.4}",
        accuracy(&preds, &data.labels).unwrap()
    );

    let (mean, ideal, angles) = weight_angle_stats(&trained.head).unwrap();
    println!("pairwise head angles (degrees): {angles:.2?}");
    println!("mean {mean:.2}, ETF ideal {ideal:.2}, gap {:.2}", (mean - ideal).abs());
}

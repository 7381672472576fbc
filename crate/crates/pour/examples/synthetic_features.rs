//! Sample Neural-Collapse features: class-conditional Gaussians centered
//! on the ETF vertices, and watch the empirical means concentrate.

use pour::geometry::make_etf;
use pour::synthetic::{empirical_class_mean, sample_nc_features, split_forget_retain, NcGenConfig};

fn main() {
    let frame = make_etf(4, 3, 0).unwrap();
    for &sigma in &[0.5, 0.1, 0.01] {
        let data = sample_nc_features(&NcGenConfig {
            frame: frame.clone(),
            sigma,
            samples_per_class: 500,
            seed: 1,
        })
        .unwrap();
        let mut worst = 0.0f64;
        for class in 0..4 {
            let mean = empirical_class_mean(&data, class).unwrap();
            let diff = &mean - &frame.direction(class);
            worst = worst.max(diff.dot(&diff).sqrt());
        }
        println!("sigma {sigma:>4}: worst |mean - vertex| = {worst:.4}");
    }

    let data = sample_nc_features(&NcGenConfig {
        frame,
        sigma: 0.1,
        samples_per_class: 100,
        seed: 2,
    })
    .unwrap();
    let (forget, retain) = split_forget_retain(&data, 1).unwrap();
    println!(
        "split on class 1: {} forget rows, {} retain rows",
        forget.len(),
        retain.len()
    );
}

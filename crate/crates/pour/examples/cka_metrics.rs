//! The metric suite: linear CKA and its invariances, RUS, and AUS.

use ndarray::Array2;
use pour::metrics::{aus, linear_cka, rus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((20, 4), |_| -> f64 { StandardNormal.sample(&mut rng) });

    let scaled = &x * 3.7;
    println!("CKA(X, 3.7 X)      = {:.12}", linear_cka(&x, &scaled).unwrap());

    let noise = Array2::from_shape_fn((20, 4), |_| -> f64 { StandardNormal.sample(&mut rng) });
    let noisy = &x + &(&noise * 0.3);
    println!("CKA(X, X + noise)  = {:.4}", linear_cka(&x, &noisy).unwrap());
    println!("CKA(X, noise)      = {:.4}", linear_cka(&x, &noise).unwrap());

    // RUS: harmonic mean of forgetting and retention indicators
    println!("rus(phi_f=0.9, cka_r=0.95) = {:.4}", rus(0.9, 0.95));
    println!("rus(phi_f=0.0, cka_r=0.95) = {:.4}", rus(0.0, 0.95));

    // AUS rows mirroring the usual original / retrained extremes
    println!("aus original  (drop 0, acc_f 0.9503) = {:.2}", aus(0.0, 0.0, 0.9503));
    println!("aus retrained (drop 0, acc_f 0)      = {:.2}", aus(0.0, 0.0, 0.0));
    println!(
        "aus improved retain (drop -0.01, acc_f 0) = {:.2}",
        aus(0.96, 0.95, 0.0)
    );
}

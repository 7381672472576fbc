//! Build a simplex ETF, project out one vertex, and verify the closure:
//! the projected, renormalized frame is the smaller simplex ETF.

use pour::geometry::{gram_residual, make_etf, project_frame, projector_from_direction};

fn main() {
    let c = 4;
    let frame = make_etf(c, 3, 0).unwrap();
    println!("C = {c} simplex ETF in d = 3:");
    for (i, v) in frame.directions().iter().enumerate() {
        println!("  v_{i} = {v:.4}");
    }
    println!("gram residual: {:.2e}", gram_residual(&frame));

    let angle = (-1.0f64 / (c as f64 - 1.0)).acos().to_degrees();
    println!("pairwise angle: {angle:.2} degrees");

    let forget = 2;
    let projector = projector_from_direction(frame.direction(forget)).unwrap();
    let image = projector.apply(frame.direction(0));
    let norm_law = (c * (c - 2)) as f64 / ((c - 1) * (c - 1)) as f64;
    println!(
        "|P v_0|^2 = {:.6}, law C(C-2)/(C-1)^2 = {:.6}",
        image.dot(&image),
        norm_law
    );

    let projected = project_frame(&frame, forget).unwrap();
    println!(
        "projected frame: C = {}, gram residual {:.2e}",
        projected.class_count(),
        gram_residual(&projected)
    );
}

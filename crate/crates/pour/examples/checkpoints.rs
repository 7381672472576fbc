//! Save and load the binary checkpoint container, and see corruption get
//! caught by the trailing checksum.

use pour::geometry::{gram_residual, make_etf};
use pour::model::ToyModel;
use pour::persist::{load_checkpoint, load_frame, save_checkpoint, Checkpoint};

fn main() {
    let dir = tempfile::tempdir().unwrap();

    let frame = make_etf(5, 8, 42).unwrap();
    let frame_path = dir.path().join("frame.pour");
    save_checkpoint(&Checkpoint::Frame(frame.clone()), &frame_path).unwrap();
    let loaded = load_frame(&frame_path).unwrap();
    println!(
        "frame round trip: residual before {:.2e}, after {:.2e}",
        gram_residual(&frame),
        gram_residual(&loaded)
    );

    let model = ToyModel::new_seeded(4, 16, 3, 5, 7);
    let model_path = dir.path().join("model.pour");
    save_checkpoint(&Checkpoint::Model(model.clone()), &model_path).unwrap();
    match load_checkpoint(&model_path).unwrap() {
        Checkpoint::Model(m) => println!("model round trip bit-exact: {}", m == model),
        _ => unreachable!(),
    }

    // flip one payload byte: the loader reports a checksum mismatch
    let mut bytes = std::fs::read(&model_path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    std::fs::write(&model_path, bytes).unwrap();
    match load_checkpoint(&model_path) {
        Err(e) => println!("corrupted file rejected: {e}"),
        Ok(_) => println!("unexpected: corrupted file loaded"),
    }
}

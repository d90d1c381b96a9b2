//! Rescales one MNIST digit to 16×16 and amplitude-encodes it on 13 qubits.
//!
//! cargo run --release --example encode_image [index]

use std::path::PathBuf;

use qcnn::data::{load_idx, rescale_16, DatasetKind};
use qcnn::encoding::{amplitude_encode, EncodedImage, IMAGE_SIDE};

fn main() -> qcnn::Result<()> {
    let index: usize = std::env::args().nth(1).map_or(0, |s| s.parse().expect("index"));
    let dir = std::env::var_os("QCNN_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let (images, labels) = DatasetKind::Mnist.default_paths(&dir, false);
    let records = load_idx(&images, &labels)?;
    let raw = &records[index];

    let grid = rescale_16(raw);
    println!("digit {} (test image {index}), 16x16 box average:", raw.label());
    for row in grid.chunks(IMAGE_SIDE) {
        let line: String = row
            .iter()
            .map(|&v| match v as u32 {
                0..=15 => ' ',
                16..=80 => '.',
                81..=160 => '+',
                _ => '#',
            })
            .collect();
        println!("  {line}");
    }

    let img = EncodedImage::from_pixels(&grid, 0, index)?;
    let state = amplitude_encode(&img, 13)?;
    let nonzero = state.amplitudes().iter().filter(|a| a.norm_sqr() > 0.0).count();
    println!("norm² = {:.15}", state.norm_sqr());
    println!("{nonzero} nonzero amplitudes out of {}", state.amplitudes().len());
    for q in [0, 7, 8, 12] {
        println!("P(q{q} = 1) = {:.6}", state.probability_one(q)?);
    }
    Ok(())
}

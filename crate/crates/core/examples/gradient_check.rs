//! Parameter-shift gradient of the cross-entropy loss against central finite
//! differences, at random parameters on a random image.

use qcnn::architecture::{build_qcnn_circuit, ArchitectureConfig};
use qcnn::encoding::{EncodedImage, IMAGE_LEN};
use qcnn::training::{forward, parameter_shift_gradient, softmax_cross_entropy, QuantumModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qcnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = QuantumModel::new(build_qcnn_circuit(&ArchitectureConfig::default())?)?;
    let theta: Vec<f64> = (0..model.circuit().num_params())
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    let pixels: Vec<f64> = (0..IMAGE_LEN).map(|_| rng.gen_range(0.0..255.0)).collect();
    let img = EncodedImage::from_pixels(&pixels, 2, 0)?;

    let loss = |t: &[f64]| -> qcnn::Result<f64> {
        Ok(softmax_cross_entropy(&forward(model.circuit(), t, &img)?, img.label())?.0)
    };
    let (l0, dl) = softmax_cross_entropy(&forward(model.circuit(), &theta, &img)?, img.label())?;
    let start = std::time::Instant::now();
    let ps = parameter_shift_gradient(model.shift_circuit(), &theta, &img, &dl)?;
    println!("loss {l0:.6}, parameter-shift gradient in {:?}", start.elapsed());

    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] += h;
        let plus = loss(&t)?;
        t[k] -= 2.0 * h;
        let minus = loss(&t)?;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((fd - ps[k]).abs());
        if k < 6 {
            println!("  θ{k:<2} shift {:+.9}  fd {:+.9}", ps[k], fd);
        }
    }
    println!("max |shift - fd| over {} parameters: {worst:.2e}", theta.len());
    Ok(())
}

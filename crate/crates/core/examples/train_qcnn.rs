//! Trains the full QCNN on a small balanced MNIST subset.
//!
//! cargo run --release --example train_qcnn [per_class] [epochs] [classes]

use std::path::PathBuf;

use qcnn::architecture::{build_qcnn_circuit, ArchitectureConfig};
use qcnn::data::{load_idx, make_dataset, ClassSubsetSpec, DatasetKind};
use qcnn::training::{evaluate, train_with_progress, Hyperparams};

fn main() -> qcnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(50, |s| s.parse().expect("per_class"));
    let epochs: usize = args.next().map_or(10, |s| s.parse().expect("epochs"));
    let classes: ClassSubsetSpec = args.next().map_or_else(
        || ClassSubsetSpec::new(&[0, 1, 2, 3]),
        |s| s.parse(),
    )?;

    let dir = std::env::var_os("QCNN_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let (ti, tl) = DatasetKind::Mnist.default_paths(&dir, true);
    let (vi, vl) = DatasetKind::Mnist.default_paths(&dir, false);
    let train = make_dataset(&load_idx(&ti, &tl)?, &classes, Some(per_class))?;
    let test = make_dataset(&load_idx(&vi, &vl)?, &classes, Some(per_class / 2 + 1))?;

    let circuit = build_qcnn_circuit(&ArchitectureConfig::default())?;
    println!(
        "classes {classes}: {} train / {} test images, {} parameters",
        train.len(),
        test.len(),
        circuit.parameter_count()
    );
    let h = Hyperparams {
        learning_rate: 0.05,
        epochs,
        batch_size: 16,
        seed: 1,
        ..Default::default()
    };
    let state = train_with_progress(&circuit, &train, &test, &h, |m| {
        println!(
            "epoch {:>3}  loss {:.4}  train {:.3}  test {:.3}",
            m.epoch, m.train_loss, m.train_acc, m.test_acc
        );
    })?;
    let e = evaluate(&circuit, &state.theta, &test)?;
    println!("final test accuracy {:.3}", e.accuracy);
    for row in &e.confusion {
        println!("  {row:?}");
    }
    Ok(())
}

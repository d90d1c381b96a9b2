//! Full QCNN against the CNOT-only reference circuit on the same data, seed
//! and schedule.
//!
//! cargo run --release --example ablation [per_class] [epochs]

use std::path::PathBuf;

use qcnn::architecture::{build, ArchKind, ArchitectureConfig};
use qcnn::data::{load_idx, make_dataset, ClassSubsetSpec, DatasetKind};
use qcnn::training::{train, Hyperparams};

fn main() -> qcnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(30, |s| s.parse().expect("per_class"));
    let epochs: usize = args.next().map_or(10, |s| s.parse().expect("epochs"));

    let dir = std::env::var_os("QCNN_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let classes = ClassSubsetSpec::new(&[0, 1, 2, 3])?;
    let (ti, tl) = DatasetKind::Mnist.default_paths(&dir, true);
    let (vi, vl) = DatasetKind::Mnist.default_paths(&dir, false);
    let train_set = make_dataset(&load_idx(&ti, &tl)?, &classes, Some(per_class))?;
    let test_set = make_dataset(&load_idx(&vi, &vl)?, &classes, Some(per_class / 2 + 1))?;

    let h = Hyperparams {
        learning_rate: 0.05,
        epochs,
        batch_size: 16,
        seed: 3,
        ..Default::default()
    };
    for (kind, config) in [
        (ArchKind::Full, ArchitectureConfig::default()),
        (ArchKind::Reference, ArchitectureConfig::reference()),
    ] {
        let circuit = build(kind, &config)?;
        let state = train(&circuit, &train_set, &test_set, &h)?;
        let last = state.history.last().expect("at least one epoch");
        println!(
            "{kind:?}: {} parameters, final loss {:.4}, test accuracy {:.3}",
            circuit.parameter_count(),
            last.train_loss,
            last.test_acc
        );
    }
    Ok(())
}

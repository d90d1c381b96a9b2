//! Trains the 188-parameter classical CNN with average and with max pooling.
//!
//! cargo run --release --example train_baseline [per_class] [epochs]

use std::path::PathBuf;

use qcnn::baseline::{baseline_train_with, make_baseline_dataset, BaselineNet, Pooling};
use qcnn::data::{load_idx, ClassSubsetSpec, DatasetKind};
use qcnn::training::Hyperparams;

fn main() -> qcnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(200, |s| s.parse().expect("per_class"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));

    let dir = std::env::var_os("QCNN_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from);
    let classes = ClassSubsetSpec::new(&[0, 1, 2, 3])?;
    let (ti, tl) = DatasetKind::Mnist.default_paths(&dir, true);
    let (vi, vl) = DatasetKind::Mnist.default_paths(&dir, false);
    let train = make_baseline_dataset(&load_idx(&ti, &tl)?, &classes, Some(per_class))?;
    let test = make_baseline_dataset(&load_idx(&vi, &vl)?, &classes, Some(per_class / 2))?;

    let h = Hyperparams {
        learning_rate: 0.005,
        epochs,
        batch_size: 16,
        seed: 2,
        ..Default::default()
    };
    for pooling in [Pooling::Average, Pooling::Max] {
        let net = BaselineNet { pooling };
        println!("{}", net.describe());
        let state = baseline_train_with(net, &train, &test, &h, |_| {})?;
        for m in state.history.iter().step_by(5.max(epochs / 4)).chain(state.history.last()) {
            println!(
                "  epoch {:>3}  loss {:.4}  train {:.3}  test {:.3}",
                m.epoch, m.train_loss, m.train_acc, m.test_acc
            );
        }
    }
    Ok(())
}

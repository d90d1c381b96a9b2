use std::fs;

use qcnn::architecture::{
    build_qcnn_circuit, build_reference_circuit, ArchitectureConfig, KEPT_AFTER_POOL1,
};
use qcnn::circuit::Stage;
use qcnn::data::{load_idx, make_dataset, write_idx, ClassSubsetSpec, RawImage, RAW_LEN};
use qcnn::encoding::{amplitude_encode, EncodedImage, IMAGE_LEN};
use qcnn::training::{
    evaluate, evaluate_model, fit, forward, init_params, train, Hyperparams, QuantumModel,
    Trainable,
};
use qcnn::Error;

fn basis_image(m: usize, label: usize) -> EncodedImage {
    let mut v = vec![0.0; IMAGE_LEN];
    v[m] = 1.0;
    EncodedImage::from_pixels(&v, label, m).unwrap()
}

/// Class `k` lights up quadrant `k` of the 28×28 grid, plus some texture.
fn synthetic_records(per_class: usize) -> Vec<RawImage> {
    let mut out = Vec::new();
    for i in 0..per_class {
        for k in 0..4u8 {
            let mut px = vec![0u8; RAW_LEN];
            let (r0, c0) = (14 * usize::from(k / 2), 14 * usize::from(k % 2));
            for r in 0..14 {
                for c in 0..14 {
                    px[(r0 + r) * 28 + c0 + c] = 200 - ((r * c + i * 7) % 60) as u8;
                }
            }
            px[(i * 31) % RAW_LEN] = 90;
            out.push(RawImage::new(px, k).unwrap());
        }
    }
    out
}

fn small_hyper(epochs: usize, workers: usize) -> Hyperparams {
    Hyperparams {
        learning_rate: 0.05,
        epochs,
        batch_size: 4,
        seed: 11,
        workers,
        ..Default::default()
    }
}

#[test]
fn basis_image_at_zero_angles_reads_class_zero() {
    let circuit = build_qcnn_circuit(&ArchitectureConfig::default()).unwrap();
    let theta = vec![0.0; circuit.num_params()];
    let p = forward(&circuit, &theta, &basis_image(0, 0)).unwrap();
    for (got, want) in p.iter().zip([1.0, 0.0, 0.0, 0.0]) {
        assert!((got - want).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn parameterized_ops_are_identity_at_zero() {
    let circuit = build_qcnn_circuit(&ArchitectureConfig::default()).unwrap();
    let bound = circuit.bind_parameters(&vec![0.0; circuit.num_params()]).unwrap();
    let img = basis_image(77, 0);
    for (op, g) in circuit.ops().iter().zip(&bound) {
        if op.param.is_some() {
            let before = amplitude_encode(&img, 13).unwrap();
            let after = before.clone().apply_gate(g).unwrap();
            assert_eq!(before.amplitudes(), after.amplitudes());
        }
    }
}

#[test]
fn reference_ancillas_copy_their_partner_qubits() {
    let circuit = build_reference_circuit(&ArchitectureConfig::reference()).unwrap();
    assert_eq!(circuit.parameter_count(), 49);
    let theta = init_params(circuit.num_params(), 3);
    let bound = circuit.bind_parameters(&theta).unwrap();
    let img = EncodedImage::from_pixels(
        &(0..IMAGE_LEN).map(|i| ((i * 37) % 101) as f64).collect::<Vec<_>>(),
        0,
        0,
    )
    .unwrap();
    let mut state = amplitude_encode(&img, 13).unwrap();
    for (op, g) in circuit.ops().iter().zip(&bound) {
        if op.stage != Stage::Readout {
            state.apply(g).unwrap();
        }
    }
    let logits = forward(&circuit, &theta, &img).unwrap();
    for (i, &q) in KEPT_AFTER_POOL1.iter().enumerate() {
        let partner = state.probability_one(q).unwrap();
        assert!((logits[i] - partner).abs() < 1e-12);
    }
}

#[test]
fn zero_epochs_keeps_initial_parameters() {
    let data = make_dataset(
        &synthetic_records(2),
        &ClassSubsetSpec::new(&[0, 1, 2, 3]).unwrap(),
        None,
    )
    .unwrap();
    let circuit = build_qcnn_circuit(&ArchitectureConfig::default()).unwrap();
    let h = small_hyper(0, 1);
    let state = train(&circuit, &data, &data, &h).unwrap();
    assert!(state.history.is_empty());
    assert_eq!(state.theta, init_params(circuit.num_params(), h.seed));
    assert_eq!(state.step, 0);
}

#[test]
fn training_is_deterministic_across_worker_counts() {
    let data = make_dataset(
        &synthetic_records(3),
        &ClassSubsetSpec::new(&[0, 1, 2, 3]).unwrap(),
        None,
    )
    .unwrap();
    let circuit = build_qcnn_circuit(&ArchitectureConfig::default()).unwrap();
    let a = train(&circuit, &data, &data, &small_hyper(2, 1)).unwrap();
    let b = train(&circuit, &data, &data, &small_hyper(2, 2)).unwrap();
    let c = train(&circuit, &data, &data, &small_hyper(2, 1)).unwrap();
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.history, b.history);
    assert_eq!(a.theta, c.theta);
    assert_eq!(a.history.len(), 2);
    assert_eq!(a.step, 6);
}

#[test]
fn decomposed_simulation_tracks_native() {
    let data = make_dataset(
        &synthetic_records(2),
        &ClassSubsetSpec::new(&[0, 1, 2, 3]).unwrap(),
        None,
    )
    .unwrap();
    let circuit = build_qcnn_circuit(&ArchitectureConfig::default()).unwrap();
    let native = QuantumModel::new(circuit.clone()).unwrap();
    let decomposed = QuantumModel::decomposed(circuit).unwrap();
    assert!(decomposed.simulation_circuit().is_fully_lowered());
    assert_eq!(
        native.circuit().arch_digest(),
        decomposed.circuit().arch_digest()
    );
    let h = small_hyper(1, 1);
    let init = init_params(native.num_params(), 4);
    let a = fit(&native, &data, &data, &h, init.clone(), |_| {}).unwrap();
    let b = fit(&decomposed, &data, &data, &h, init, |_| {}).unwrap();
    for (x, y) in a.theta.iter().zip(&b.theta) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn evaluation_counts() {
    let circuit = build_qcnn_circuit(&ArchitectureConfig::default()).unwrap();
    let theta = vec![0.0; circuit.num_params()];
    let e = evaluate(&circuit, &theta, &[basis_image(0, 0)]).unwrap();
    assert_eq!(e.accuracy, 1.0);
    assert_eq!(e.confusion[0][0], 1);

    let data = make_dataset(
        &synthetic_records(3),
        &ClassSubsetSpec::new(&[0, 1, 2, 3]).unwrap(),
        None,
    )
    .unwrap();
    let theta = init_params(circuit.num_params(), 9);
    let model = QuantumModel::new(circuit).unwrap();
    let e = evaluate_model(&model, &theta, &data, 1).unwrap();
    for row in &e.confusion {
        assert_eq!(row.iter().sum::<usize>(), 3);
    }
    let correct: usize = (0..4).map(|k| e.confusion[k][k]).sum();
    assert_eq!(e.accuracy, correct as f64 / 12.0);
    assert!(evaluate_model(&model, &theta, &[], 1).is_err());
}

#[test]
fn idx_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    let records = synthetic_records(2);
    write_idx(&img, &lbl, &records).unwrap();
    assert_eq!(load_idx(&img, &lbl).unwrap(), records);

    let bytes = fs::read(&img).unwrap();
    fs::write(&img, &bytes[..bytes.len() - 5]).unwrap();
    let err = load_idx(&img, &lbl).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
    fs::write(&img, &bytes).unwrap();

    let mut labels = fs::read(&lbl).unwrap();
    labels[8 + 3] = 12;
    fs::write(&lbl, &labels).unwrap();
    match load_idx(&img, &lbl).unwrap_err() {
        Error::Format { offset, message, .. } => {
            assert_eq!(offset, 11);
            assert!(message.contains("12"));
        }
        other => panic!("{other}"),
    }

    let mut bad = bytes.clone();
    bad[3] = 0x01;
    fs::write(&img, &bad).unwrap();
    match load_idx(&img, &lbl).unwrap_err() {
        Error::Format { offset, .. } => assert_eq!(offset, 0),
        other => panic!("{other}"),
    }

    let missing = dir.path().join("nope");
    let err = load_idx(&missing, &lbl).unwrap_err();
    assert!(err.to_string().contains("nope"));
}

#[test]
fn absent_class_is_rejected() {
    let records = synthetic_records(1);
    let spec = ClassSubsetSpec::new(&[0, 1, 2, 7]).unwrap();
    assert!(make_dataset(&records, &spec, None).is_err());
    assert!(ClassSubsetSpec::new(&[0, 1, 1, 2]).is_err());
    assert!(ClassSubsetSpec::new(&[0, 1, 2]).is_err());
}

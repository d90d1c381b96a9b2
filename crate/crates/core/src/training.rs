//! Hybrid training loop: exact forward simulation to ancilla probabilities,
//! softmax cross-entropy, parameter-shift gradients and Adam.
//!
//! Per-sample work in a batch runs on a worker pool; results are collected in
//! sample order and reduced sequentially, so a run is bitwise reproducible for
//! a given seed regardless of the number of workers.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{lower, lower_parameterized, ParamCircuit};
use crate::encoding::{amplitude_encode, EncodedImage, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::statevector::StateVector;

/// Half-width of the uniform parameter initialization interval.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    /// Zero means evaluate-only: no updates and an empty history.
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Worker threads for per-sample work; 0 uses every available core.
    /// Does not affect results.
    #[serde(default)]
    pub workers: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.00005,
            epochs: 50,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            workers: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("Adam epsilon must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub theta: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step: u64,
    pub history: Vec<EpochMetrics>,
}

impl TrainState {
    pub fn new(theta: Vec<f64>) -> Self {
        let n = theta.len();
        TrainState {
            theta,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            step: 0,
            history: Vec::new(),
        }
    }
}

/// Uniform on `[−INIT_SCALE, INIT_SCALE]` from a generator seeded with `seed`.
pub fn init_params(num_params: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_params)
        .map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE))
        .collect()
}

/// Readout probabilities `P(ancilla_i = 1)` for `img` under `theta`.
pub fn forward(circuit: &ParamCircuit, theta: &[f64], img: &EncodedImage) -> Result<Vec<f64>> {
    let mut state = amplitude_encode(img, circuit.num_qubits())?;
    circuit.simulate(theta, &mut state)?;
    readout(circuit, &state)
}

fn readout(circuit: &ParamCircuit, state: &StateVector) -> Result<Vec<f64>> {
    circuit
        .readout()
        .iter()
        .map(|&q| state.probability_one(q))
        .collect()
}

/// Returns the loss `−log softmax(logits)[label]` and its gradient
/// `softmax(logits) − onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Validation(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Validation("non-finite logit".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() - (logits[label] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate().skip(1) {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

/// Gradient of `Σ_i weights[i] · logits_i` with respect to every parameter,
/// by the two-term shift rule on each parameter occurrence.
///
/// `circuit` must have only bare rotations as parameterized ops (see
/// [`lower_parameterized`]). Passing `dL/dlogits` as `weights` yields the
/// loss gradient.
pub fn parameter_shift_gradient(
    circuit: &ParamCircuit,
    theta: &[f64],
    img: &EncodedImage,
    weights: &[f64],
) -> Result<Vec<f64>> {
    parameter_shift_gradient_with_shift(circuit, theta, img, weights, FRAC_PI_2)
}

/// [`parameter_shift_gradient`] with an arbitrary shift but the same `1/2`
/// scaling; only `π/2` gives the true gradient.
pub fn parameter_shift_gradient_with_shift(
    circuit: &ParamCircuit,
    theta: &[f64],
    img: &EncodedImage,
    weights: &[f64],
    shift: f64,
) -> Result<Vec<f64>> {
    if !circuit.is_shift_ready() {
        return Err(Error::Validation(
            "parameter-shift needs a lowered circuit (parameterized ops must be bare rotations)"
                .into(),
        ));
    }
    if weights.len() != circuit.readout().len() {
        return Err(Error::Validation(format!(
            "expected {} logit weights, got {}",
            circuit.readout().len(),
            weights.len()
        )));
    }
    let bound = circuit.bind_parameters(theta)?;
    let mut grad = vec![0.0; circuit.num_params()];
    let mut state = amplitude_encode(img, circuit.num_qubits())?;
    let mut scratch = state.clone();

    let weighted_readout = |prefix: &StateVector,
                                scratch: &mut StateVector,
                                gate: &crate::statevector::GateOp,
                                rest: &[crate::statevector::GateOp]|
     -> Result<f64> {
        scratch.clone_from(prefix);
        scratch.apply_unchecked(gate);
        for op in rest {
            scratch.apply_unchecked(op);
        }
        let probs = readout(circuit, scratch)?;
        Ok(probs.iter().zip(weights).map(|(p, w)| p * w).sum())
    };

    for (j, op) in circuit.ops().iter().enumerate() {
        if let Some(p) = op.param {
            let angle = bound[j].angle.expect("parameterized op has an angle");
            let rest = &bound[j + 1..];
            let plus =
                weighted_readout(&state, &mut scratch, &bound[j].with_angle(angle + shift), rest)?;
            let minus =
                weighted_readout(&state, &mut scratch, &bound[j].with_angle(angle - shift), rest)?;
            grad[p.param_index] += p.coefficient * (plus - minus) / 2.0;
        }
        state.apply_unchecked(&bound[j]);
    }
    Ok(grad)
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &mut TrainState, grad: &[f64], h: &Hyperparams) -> Result<()> {
    let n = state.theta.len();
    if grad.len() != n || state.adam_m.len() != n || state.adam_v.len() != n {
        return Err(Error::Validation(format!(
            "Adam shape mismatch: theta {n}, grad {}, m {}, v {}",
            grad.len(),
            state.adam_m.len(),
            state.adam_v.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - h.adam_beta1.powi(t);
    let c2 = 1.0 - h.adam_beta2.powi(t);
    for i in 0..n {
        let g = grad[i];
        state.adam_m[i] = h.adam_beta1 * state.adam_m[i] + (1.0 - h.adam_beta1) * g;
        state.adam_v[i] = h.adam_beta2 * state.adam_v[i] + (1.0 - h.adam_beta2) * g * g;
        let m_hat = state.adam_m[i] / c1;
        let v_hat = state.adam_v[i] / c2;
        state.theta[i] -= h.learning_rate * m_hat / (v_hat.sqrt() + h.adam_eps);
    }
    Ok(())
}

/// Loss, gradient and logits for one sample.
#[derive(Clone, Debug)]
pub struct SampleGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub logits: Vec<f64>,
}

/// A model trainable by [`fit`]: a parameter vector plus per-sample logits
/// and loss gradients.
pub trait Trainable: Sync {
    type Sample: Sync;

    fn num_params(&self) -> usize;
    fn label(&self, sample: &Self::Sample) -> usize;
    fn logits(&self, theta: &[f64], sample: &Self::Sample) -> Result<Vec<f64>>;
    fn loss_and_grad(&self, theta: &[f64], sample: &Self::Sample) -> Result<SampleGrad>;
}

/// The QCNN paired with its shift-ready lowering.
#[derive(Clone, Debug)]
pub struct QuantumModel {
    circuit: ParamCircuit,
    sim_circuit: Option<ParamCircuit>,
    shift_circuit: ParamCircuit,
}

impl QuantumModel {
    pub fn new(circuit: ParamCircuit) -> Result<Self> {
        if circuit.readout().len() != NUM_CLASSES {
            return Err(Error::Config(format!(
                "classifier needs {NUM_CLASSES} readout qubits, circuit has {}",
                circuit.readout().len()
            )));
        }
        let shift_circuit = lower_parameterized(&circuit)?;
        Ok(QuantumModel {
            circuit,
            sim_circuit: None,
            shift_circuit,
        })
    }

    /// Like [`QuantumModel::new`] but the forward pass runs the fully
    /// decomposed circuit (CNOTs and single-qubit rotations only).
    pub fn decomposed(circuit: ParamCircuit) -> Result<Self> {
        let mut model = QuantumModel::new(circuit)?;
        model.sim_circuit = Some(lower(&model.circuit)?);
        Ok(model)
    }

    /// The circuit as built; its digest identifies the architecture.
    pub fn circuit(&self) -> &ParamCircuit {
        &self.circuit
    }

    /// The circuit the forward pass simulates.
    pub fn simulation_circuit(&self) -> &ParamCircuit {
        self.sim_circuit.as_ref().unwrap_or(&self.circuit)
    }

    pub fn is_decomposed(&self) -> bool {
        self.sim_circuit.is_some()
    }

    pub fn shift_circuit(&self) -> &ParamCircuit {
        &self.shift_circuit
    }
}

impl Trainable for QuantumModel {
    type Sample = EncodedImage;

    fn num_params(&self) -> usize {
        self.circuit.num_params()
    }

    fn label(&self, sample: &EncodedImage) -> usize {
        sample.label()
    }

    fn logits(&self, theta: &[f64], sample: &EncodedImage) -> Result<Vec<f64>> {
        forward(self.simulation_circuit(), theta, sample)
    }

    fn loss_and_grad(&self, theta: &[f64], sample: &EncodedImage) -> Result<SampleGrad> {
        let logits = self.logits(theta, sample)?;
        let (loss, dl) = softmax_cross_entropy(&logits, sample.label())?;
        let grad = parameter_shift_gradient(&self.shift_circuit, theta, sample, &dl)?;
        Ok(SampleGrad { loss, grad, logits })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn evaluate_in<M: Trainable>(
    pool: &rayon::ThreadPool,
    model: &M,
    theta: &[f64],
    data: &[M::Sample],
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Validation("cannot evaluate on an empty dataset".into()));
    }
    let predictions = pool.install(|| {
        data.par_iter()
            .map(|s| model.logits(theta, s).map(|l| argmax(&l)))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut confusion = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
    let mut correct = 0usize;
    for (s, &pred) in data.iter().zip(&predictions) {
        let truth = model.label(s);
        if truth >= NUM_CLASSES || pred >= NUM_CLASSES {
            return Err(Error::Validation(format!(
                "class index out of range (label {truth}, prediction {pred})"
            )));
        }
        confusion[truth][pred] += 1;
        correct += usize::from(truth == pred);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        confusion,
    })
}

/// Accuracy and confusion matrix of `model` under `theta`.
pub fn evaluate_model<M: Trainable>(
    model: &M,
    theta: &[f64],
    data: &[M::Sample],
    workers: usize,
) -> Result<Evaluation> {
    evaluate_in(&pool(workers)?, model, theta, data)
}

/// Quantum-circuit form of [`evaluate_model`].
pub fn evaluate(
    circuit: &ParamCircuit,
    theta: &[f64],
    data: &[EncodedImage],
) -> Result<Evaluation> {
    let model = QuantumModel::new(circuit.clone())?;
    evaluate_model(&model, theta, data, 0)
}

/// Trains from `initial` for `h.epochs` epochs of shuffled mini-batches,
/// recording train loss/accuracy and test accuracy per epoch.
pub fn fit<M: Trainable>(
    model: &M,
    train: &[M::Sample],
    test: &[M::Sample],
    h: &Hyperparams,
    initial: Vec<f64>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainState> {
    h.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Validation("training and test sets must be nonempty".into()));
    }
    if initial.len() != model.num_params() {
        return Err(Error::Validation(format!(
            "initial parameters have length {}, model needs {}",
            initial.len(),
            model.num_params()
        )));
    }
    let workers = pool(h.workers)?;
    let mut state = TrainState::new(initial);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(h.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=h.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(h.batch_size) {
            let theta = &state.theta;
            let results = workers.install(|| {
                batch
                    .par_iter()
                    .map(|&i| model.loss_and_grad(theta, &train[i]))
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut grad = vec![0.0; state.theta.len()];
            for (r, &i) in results.iter().zip(batch) {
                loss_sum += r.loss;
                correct += usize::from(argmax(&r.logits) == model.label(&train[i]));
                for (g, x) in grad.iter_mut().zip(&r.grad) {
                    *g += x;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam_step(&mut state, &grad, h)?;
        }
        let test_eval = evaluate_in(&workers, model, &state.theta, test)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            test_acc: test_eval.accuracy,
        };
        on_epoch(&metrics);
        state.history.push(metrics);
    }
    Ok(state)
}

/// Trains the QCNN from a seeded uniform initialization.
pub fn train(
    circuit: &ParamCircuit,
    train_set: &[EncodedImage],
    test_set: &[EncodedImage],
    h: &Hyperparams,
) -> Result<TrainState> {
    train_with_progress(circuit, train_set, test_set, h, |_| {})
}

pub fn train_with_progress(
    circuit: &ParamCircuit,
    train_set: &[EncodedImage],
    test_set: &[EncodedImage],
    h: &Hyperparams,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainState> {
    let model = QuantumModel::new(circuit.clone())?;
    let initial = init_params(model.num_params(), h.seed);
    fit(&model, train_set, test_set, h, initial, on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, QubitRoles, Stage};
    use crate::encoding::IMAGE_LEN;
    use crate::statevector::Axis;

    #[test]
    fn softmax_examples() {
        let (loss, g) = softmax_cross_entropy(&[0.3; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!(g.iter().sum::<f64>().abs() < 1e-15);

        let (loss, g) = softmax_cross_entropy(&[10.0, 0.0, 0.0, 0.0], 0).unwrap();
        let expected = (1.0 + 3.0 * (-10f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 1.36e-4).abs() < 1e-6);
        assert!(g[0] < 0.0 && g[0].abs() < 2e-4);
        assert!(g.iter().sum::<f64>().abs() < 1e-15);

        assert!(softmax_cross_entropy(&[0.0; 4], 4).is_err());
        assert!(softmax_cross_entropy(&[f64::NAN, 0.0], 0).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5, 0.1]), 1);
        assert_eq!(argmax(&[0.25; 4]), 0);
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let h = Hyperparams::default();
        let mut s = TrainState::new(vec![0.0]);
        adam_step(&mut s, &[0.5], &h).unwrap();
        let expected = -5e-5 * 0.5 / (0.5 + 1e-8);
        assert!((s.theta[0] - expected).abs() < 1e-18);
        assert!((s.theta[0] + 4.99999990e-5).abs() < 1e-13);
        assert_eq!(s.step, 1);

        let mut s = TrainState::new(vec![0.3, -0.2]);
        adam_step(&mut s, &[0.0, 0.0], &h).unwrap();
        assert_eq!(s.theta, vec![0.3, -0.2]);

        assert!(adam_step(&mut s, &[0.0], &h).is_err());
    }

    #[test]
    fn adam_steps_do_not_grow_under_constant_gradient() {
        let h = Hyperparams::default();
        let mut s = TrainState::new(vec![0.0]);
        adam_step(&mut s, &[0.8], &h).unwrap();
        let d1 = s.theta[0].abs();
        let before = s.theta[0];
        adam_step(&mut s, &[0.8], &h).unwrap();
        let d2 = (s.theta[0] - before).abs();
        assert!(d2 <= d1 + 1e-12);
    }

    /// Toy single-qubit register: `RY(θ)` on qubit 0; the image selects |0⟩
    /// on the 8-qubit register and the readout is qubit 0.
    fn toy_ry() -> ParamCircuit {
        let mut b = CircuitBuilder::new(8);
        b.stage(Stage::Readout, 0);
        let p = b.new_param();
        b.rotation(Axis::Y, 0, p);
        b.finish(QubitRoles {
            readout: vec![0],
            ..Default::default()
        })
        .unwrap()
    }

    fn e0() -> EncodedImage {
        let mut v = vec![0.0; IMAGE_LEN];
        v[0] = 1.0;
        EncodedImage::from_pixels(&v, 0, 0).unwrap()
    }

    #[test]
    fn shift_rule_on_single_rotation() {
        let g = parameter_shift_gradient(&toy_ry(), &[FRAC_PI_2], &e0(), &[1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
        let quarter = std::f64::consts::FRAC_PI_4;
        let g = parameter_shift_gradient(&toy_ry(), &[quarter], &e0(), &[1.0]).unwrap();
        assert!((g[0] - quarter.sin() / 2.0).abs() < 1e-15);
        assert!((g[0] - 0.353553).abs() < 1e-6);
    }

    #[test]
    fn shift_rule_rejects_unlowered_circuit() {
        let mut b = CircuitBuilder::new(8);
        b.stage(Stage::Readout, 0);
        let p = b.new_param();
        b.controlled(Axis::Y, crate::statevector::Control::on_one(1), 0, p);
        let c = b
            .finish(QubitRoles {
                readout: vec![0],
                ..Default::default()
            })
            .unwrap();
        assert!(parameter_shift_gradient(&c, &[0.1], &e0(), &[1.0]).is_err());
    }

    #[test]
    fn parameter_outside_light_cone_has_zero_gradient() {
        let mut b = CircuitBuilder::new(8);
        b.stage(Stage::Readout, 0);
        let [p0, p1] = b.new_params::<2>();
        b.rotation(Axis::Y, 0, p0).rotation(Axis::Y, 5, p1);
        let c = b
            .finish(QubitRoles {
                readout: vec![0],
                ..Default::default()
            })
            .unwrap();
        let g = parameter_shift_gradient(&c, &[0.4, 1.1], &e0(), &[1.0]).unwrap();
        assert!(g[1].abs() < 1e-12);
        assert!(g[0].abs() > 1e-3);
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let bad = Hyperparams {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = Hyperparams {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}

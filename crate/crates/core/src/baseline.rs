//! The 188-parameter classical CNN used for comparison.
//!
//! Layer stack on a 28×28 input scaled to `[0, 1]`:
//!
//! | layer  | op                                   | output | params |
//! |--------|--------------------------------------|--------|--------|
//! | conv1  | 3×3, stride 2, same padding, ReLU    | 14×14  | 10     |
//! | conv2  | 3×3, stride 1, valid, ReLU           | 12×12  | 10     |
//! | pool   | 2×2 average (or max)                 | 6×6    | 0      |
//! | dense1 | 36 → 4, ReLU                         | 4      | 148    |
//! | dense2 | 4 → 4                                | 4      | 20     |
//!
//! Same padding follows the usual convention for stride 2 on an even side:
//! one zero row/column is added at the bottom/right only.

use serde::{Deserialize, Serialize};

use crate::circuit::digest_hex;
use crate::data::{select, ClassSubsetSpec, RawImage, RAW_LEN, RAW_SIDE};
use crate::encoding::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::training::{
    fit, init_params, softmax_cross_entropy, EpochMetrics, Hyperparams, SampleGrad, TrainState,
    Trainable,
};

pub const CONV1_SIDE: usize = 14;
pub const CONV2_SIDE: usize = 12;
pub const POOL_SIDE: usize = 6;
pub const FLAT: usize = POOL_SIDE * POOL_SIDE;
pub const HIDDEN: usize = 4;

const K1: usize = 0;
const B1: usize = 9;
const K2: usize = 10;
const B2: usize = 19;
const W3: usize = 20;
const B3: usize = W3 + HIDDEN * FLAT;
const W4: usize = B3 + HIDDEN;
const B4: usize = W4 + NUM_CLASSES * HIDDEN;
pub const NUM_PARAMS: usize = B4 + NUM_CLASSES;
/// Initial bias of the ReLU layers.
pub const BIAS_INIT: f64 = 0.1;

/// Parameter count of each layer, in stack order.
pub const LAYER_PARAMS: [(&str, usize); 5] = [
    ("conv1", B1 + 1 - K1),
    ("conv2", B2 + 1 - K2),
    ("pool", 0),
    ("dense1", W4 - W3),
    ("dense2", NUM_PARAMS - W4),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Average,
    Max,
}

/// A 28×28 image with pixels divided by 255.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSample {
    pub pixels: Vec<f64>,
    pub label: usize,
    pub source_id: usize,
}

impl BaselineSample {
    pub fn from_raw(img: &RawImage, label: usize, source_id: usize) -> Self {
        BaselineSample {
            pixels: img.pixels().iter().map(|&p| f64::from(p) / 255.0).collect(),
            label,
            source_id,
        }
    }
}

/// Same selection and label remapping as [`crate::data::make_dataset`], at
/// the original resolution.
pub fn make_baseline_dataset(
    records: &[RawImage],
    spec: &ClassSubsetSpec,
    limit_per_class: Option<usize>,
) -> Result<Vec<BaselineSample>> {
    Ok(select(records, spec, limit_per_class)?
        .into_iter()
        .map(|(i, class)| BaselineSample::from_raw(&records[i], class, i))
        .collect())
}

/// Network structure; parameters live in a separate flat vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineNet {
    pub pooling: Pooling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub net: BaselineNet,
    pub params: Vec<f64>,
}

impl BaselineModel {
    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }
}

/// Weights uniform on `[−0.1, 0.1]` from the seeded generator; biases zero.
pub fn build_baseline(seed: u64) -> BaselineModel {
    BaselineModel {
        net: BaselineNet::default(),
        params: initial_params(seed),
    }
}

pub fn initial_params(seed: u64) -> Vec<f64> {
    let mut params = init_params(NUM_PARAMS, seed);
    for &b in &[B1, B2] {
        params[b] = BIAS_INIT;
    }
    params[B3..W4].iter_mut().for_each(|p| *p = BIAS_INIT);
    params[B4..].iter_mut().for_each(|p| *p = 0.0);
    params
}

/// Intermediate activations kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Activations {
    pub conv1_pre: Vec<f64>,
    pub conv1: Vec<f64>,
    pub conv2_pre: Vec<f64>,
    pub conv2: Vec<f64>,
    pub pooled: Vec<f64>,
    pub dense1_pre: Vec<f64>,
    pub dense1: Vec<f64>,
    pub logits: Vec<f64>,
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

fn pixel(x: &[f64], r: usize, c: usize) -> f64 {
    if r < RAW_SIDE && c < RAW_SIDE {
        x[r * RAW_SIDE + c]
    } else {
        0.0
    }
}

fn check_shapes(theta: &[f64], img: &[f64]) -> Result<()> {
    if theta.len() != NUM_PARAMS {
        return Err(Error::Validation(format!(
            "baseline needs {NUM_PARAMS} parameters, got {}",
            theta.len()
        )));
    }
    if img.len() != RAW_LEN {
        return Err(Error::Validation(format!(
            "baseline input must be {RAW_SIDE}×{RAW_SIDE}, got {} values",
            img.len()
        )));
    }
    Ok(())
}

impl BaselineNet {
    /// Structure summary hashed into the architecture digest.
    pub fn describe(&self) -> String {
        let pool = match self.pooling {
            Pooling::Average => "avg",
            Pooling::Max => "max",
        };
        format!(
            "baseline input=28x28/255 conv1=3x3/s2/same/relu conv2=3x3/s1/valid/relu \
             pool=2x2/{pool} dense1=36x4/relu dense2=4x4 params={NUM_PARAMS}"
        )
    }

    pub fn arch_digest(&self) -> String {
        digest_hex(&self.describe())
    }

    pub fn forward(&self, theta: &[f64], img: &[f64]) -> Result<Activations> {
        check_shapes(theta, img)?;
        let mut conv1_pre = vec![theta[B1]; CONV1_SIDE * CONV1_SIDE];
        for r in 0..CONV1_SIDE {
            for c in 0..CONV1_SIDE {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        acc += theta[K1 + 3 * a + b] * pixel(img, 2 * r + a, 2 * c + b);
                    }
                }
                conv1_pre[r * CONV1_SIDE + c] += acc;
            }
        }
        let conv1 = relu(&conv1_pre);

        let mut conv2_pre = vec![theta[B2]; CONV2_SIDE * CONV2_SIDE];
        for r in 0..CONV2_SIDE {
            for c in 0..CONV2_SIDE {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        acc += theta[K2 + 3 * a + b] * conv1[(r + a) * CONV1_SIDE + c + b];
                    }
                }
                conv2_pre[r * CONV2_SIDE + c] += acc;
            }
        }
        let conv2 = relu(&conv2_pre);

        let mut pooled = vec![0.0; FLAT];
        for r in 0..POOL_SIDE {
            for c in 0..POOL_SIDE {
                let window = pool_window(r, c).map(|i| conv2[i]);
                pooled[r * POOL_SIDE + c] = match self.pooling {
                    Pooling::Average => window.iter().sum::<f64>() / 4.0,
                    Pooling::Max => window.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                };
            }
        }

        let dense1_pre = dense(&theta[W3..B3], &theta[B3..W4], &pooled);
        let dense1 = relu(&dense1_pre);
        let logits = dense(&theta[W4..B4], &theta[B4..], &dense1);
        Ok(Activations {
            conv1_pre,
            conv1,
            conv2_pre,
            conv2,
            pooled,
            dense1_pre,
            dense1,
            logits,
        })
    }

    /// Gradient of `Σ_i weights[i] · logits_i` with respect to all parameters.
    pub fn backward(&self, theta: &[f64], img: &[f64], acts: &Activations, weights: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; NUM_PARAMS];

        let dz4 = weights;
        for o in 0..NUM_CLASSES {
            g[B4 + o] = dz4[o];
            for i in 0..HIDDEN {
                g[W4 + o * HIDDEN + i] = dz4[o] * acts.dense1[i];
            }
        }
        let dz3: Vec<f64> = (0..HIDDEN)
            .map(|i| {
                let d: f64 = (0..NUM_CLASSES).map(|o| theta[W4 + o * HIDDEN + i] * dz4[o]).sum();
                if acts.dense1_pre[i] > 0.0 {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        for o in 0..HIDDEN {
            g[B3 + o] = dz3[o];
            for i in 0..FLAT {
                g[W3 + o * FLAT + i] = dz3[o] * acts.pooled[i];
            }
        }
        let dpooled: Vec<f64> = (0..FLAT)
            .map(|i| (0..HIDDEN).map(|o| theta[W3 + o * FLAT + i] * dz3[o]).sum())
            .collect();

        let mut dconv2 = vec![0.0; CONV2_SIDE * CONV2_SIDE];
        for r in 0..POOL_SIDE {
            for c in 0..POOL_SIDE {
                let d = dpooled[r * POOL_SIDE + c];
                let window = pool_window(r, c);
                match self.pooling {
                    Pooling::Average => window.iter().for_each(|&i| dconv2[i] += d / 4.0),
                    Pooling::Max => {
                        let mut best = window[0];
                        for &i in &window[1..] {
                            if acts.conv2[i] > acts.conv2[best] {
                                best = i;
                            }
                        }
                        dconv2[best] += d;
                    }
                }
            }
        }
        for (d, &pre) in dconv2.iter_mut().zip(&acts.conv2_pre) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }

        let mut dconv1 = vec![0.0; CONV1_SIDE * CONV1_SIDE];
        for r in 0..CONV2_SIDE {
            for c in 0..CONV2_SIDE {
                let d = dconv2[r * CONV2_SIDE + c];
                g[B2] += d;
                for a in 0..3 {
                    for b in 0..3 {
                        let src = (r + a) * CONV1_SIDE + c + b;
                        g[K2 + 3 * a + b] += d * acts.conv1[src];
                        dconv1[src] += d * theta[K2 + 3 * a + b];
                    }
                }
            }
        }
        for (d, &pre) in dconv1.iter_mut().zip(&acts.conv1_pre) {
            if pre <= 0.0 {
                *d = 0.0;
            }
        }

        for r in 0..CONV1_SIDE {
            for c in 0..CONV1_SIDE {
                let d = dconv1[r * CONV1_SIDE + c];
                g[B1] += d;
                for a in 0..3 {
                    for b in 0..3 {
                        g[K1 + 3 * a + b] += d * pixel(img, 2 * r + a, 2 * c + b);
                    }
                }
            }
        }
        g
    }
}

fn pool_window(r: usize, c: usize) -> [usize; 4] {
    let top = 2 * r * CONV2_SIDE + 2 * c;
    [top, top + 1, top + CONV2_SIDE, top + CONV2_SIDE + 1]
}

fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(o, &bias)| bias + w[o * x.len()..(o + 1) * x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

pub fn baseline_forward(model: &BaselineModel, img28: &[f64]) -> Result<Vec<f64>> {
    Ok(model.net.forward(&model.params, img28)?.logits)
}

impl Trainable for BaselineNet {
    type Sample = BaselineSample;

    fn num_params(&self) -> usize {
        NUM_PARAMS
    }

    fn label(&self, sample: &BaselineSample) -> usize {
        sample.label
    }

    fn logits(&self, theta: &[f64], sample: &BaselineSample) -> Result<Vec<f64>> {
        Ok(self.forward(theta, &sample.pixels)?.logits)
    }

    fn loss_and_grad(&self, theta: &[f64], sample: &BaselineSample) -> Result<SampleGrad> {
        let acts = self.forward(theta, &sample.pixels)?;
        let (loss, dl) = softmax_cross_entropy(&acts.logits, sample.label)?;
        let grad = self.backward(theta, &sample.pixels, &acts, &dl);
        Ok(SampleGrad {
            loss,
            grad,
            logits: acts.logits,
        })
    }
}

/// Trains the average-pooling baseline from `build_baseline(h.seed)`.
pub fn baseline_train(
    train: &[BaselineSample],
    test: &[BaselineSample],
    h: &Hyperparams,
) -> Result<TrainState> {
    baseline_train_with(BaselineNet::default(), train, test, h, |_| {})
}

pub fn baseline_train_with(
    net: BaselineNet,
    train: &[BaselineSample],
    test: &[BaselineSample],
    h: &Hyperparams,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainState> {
    let initial = initial_params(h.seed);
    fit(&net, train, test, h, initial, on_epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_counts() {
        let m = build_baseline(3);
        assert_eq!(m.parameter_count(), 188);
        assert_eq!(LAYER_PARAMS.iter().map(|l| l.1).sum::<usize>(), 188);
        assert_eq!(LAYER_PARAMS[3], ("dense1", 148));
        assert_eq!(LAYER_PARAMS[4], ("dense2", 20));
        assert!(m.params.iter().all(|p| p.abs() <= 0.1));
    }

    #[test]
    fn shapes_and_zero_input() {
        let mut m = build_baseline(1);
        for i in [B1, B2] {
            m.params[i] = 0.0;
        }
        m.params[B3..W4].iter_mut().for_each(|p| *p = 0.0);
        m.params[B4..].iter_mut().for_each(|p| *p = 0.0);
        let acts = m.net.forward(&m.params, &[0.0; RAW_LEN]).unwrap();
        assert_eq!(acts.conv1.len(), 14 * 14);
        assert_eq!(acts.conv2.len(), 12 * 12);
        assert_eq!(acts.pooled.len(), 36);
        assert_eq!(acts.logits, vec![0.0; 4]);
        assert!(baseline_forward(&m, &[0.0; 100]).is_err());
    }

    #[test]
    fn conv1_is_linear_before_activation() {
        let mut m = build_baseline(2);
        m.params[B1] = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..RAW_LEN).map(|_| rng.gen()).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = m.net.forward(&m.params, &x).unwrap();
        let b = m.net.forward(&m.params, &x2).unwrap();
        for (p, q) in a.conv1_pre.iter().zip(&b.conv1_pre) {
            assert!((2.0 * p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn backprop_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for pooling in [Pooling::Average, Pooling::Max] {
            let net = BaselineNet { pooling };
            let theta: Vec<f64> = (0..NUM_PARAMS).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let sample = BaselineSample {
                pixels: (0..RAW_LEN).map(|_| rng.gen()).collect(),
                label: 2,
                source_id: 0,
            };
            let analytic = net.loss_and_grad(&theta, &sample).unwrap().grad;
            let loss = |t: &[f64]| {
                let l = net.logits(t, &sample).unwrap();
                softmax_cross_entropy(&l, 2).unwrap().0
            };
            let h = 1e-6;
            for k in 0..NUM_PARAMS {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let fd = (loss(&tp) - loss(&tm)) / (2.0 * h);
                assert!((fd - analytic[k]).abs() < 1e-5, "{pooling:?} param {k}: {fd} vs {}", analytic[k]);
            }
        }
    }
}

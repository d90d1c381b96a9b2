//! Lowering of controlled rotations to single-qubit rotations and CNOTs.
//!
//! A rotation whose angle depends on the bit pattern of `c` control qubits
//! (a uniformly controlled rotation) is realized by a Gray-code cascade:
//! `2^c` target rotations `R(α_j)`, each followed by a CNOT from the control
//! whose bit flips between consecutive Gray codes. Conjugating `RY`/`RZ` by `X`
//! negates the angle, so pattern `b` sees `θ_b = Σ_j (−1)^(g_j·b) α_j`, and the
//! cascade angles are recovered with the scaled Walsh matrix below.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::statevector::{Axis, Control, GateOp};

/// Target rotation angle that flips an ancilla from `|0⟩` to `|1⟩`.
pub const FLIP_ANGLE: f64 = PI;

/// Rotation angle per control bit pattern; pattern index uses the first control
/// as the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternAngles {
    theta: Vec<f64>,
}

impl PatternAngles {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        match theta.len() {
            2 | 4 => Ok(PatternAngles { theta }),
            n => Err(Error::Validation(format!(
                "pattern angles must cover 1 or 2 controls (length 2 or 4), got length {n}"
            ))),
        }
    }

    pub fn num_controls(&self) -> usize {
        self.theta.len().trailing_zeros() as usize
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// Cascade angles and, for each step, which control (by position in the
/// control list) drives the CNOT that follows the rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadePlan {
    pub alphas: Vec<f64>,
    pub cnot_controls: Vec<usize>,
}

pub fn gray_code(bits: usize) -> Vec<usize> {
    (0..1usize << bits).map(|j| j ^ (j >> 1)).collect()
}

/// `M[j][k] = 2^(−c) · (−1)^(popcount(g_j & k))`.
pub fn transform_matrix(num_controls: usize) -> Vec<Vec<f64>> {
    let size = 1usize << num_controls;
    let scale = 1.0 / size as f64;
    gray_code(num_controls)
        .into_iter()
        .map(|g| {
            (0..size)
                .map(|k| {
                    if (g & k).count_ones() % 2 == 0 {
                        scale
                    } else {
                        -scale
                    }
                })
                .collect()
        })
        .collect()
}

fn cnot_schedule(num_controls: usize) -> Vec<usize> {
    let gray = gray_code(num_controls);
    let size = gray.len();
    (0..size)
        .map(|j| {
            let flipped = gray[j] ^ gray[(j + 1) % size];
            num_controls - 1 - flipped.trailing_zeros() as usize
        })
        .collect()
}

pub fn angle_transform(theta: &PatternAngles) -> Result<CascadePlan> {
    let c = theta.num_controls();
    if !(1..=2).contains(&c) {
        return Err(Error::Validation(format!(
            "angle transform supports 1 or 2 controls, got {c}"
        )));
    }
    let alphas = transform_matrix(c)
        .iter()
        .map(|row| row.iter().zip(theta.theta()).map(|(m, t)| m * t).sum())
        .collect();
    Ok(CascadePlan {
        alphas,
        cnot_controls: cnot_schedule(c),
    })
}

/// Gate sequence for a plan. Only `Y` and `Z` axes anticommute with the
/// CNOT's `X`, which the cascade relies on.
pub fn cascade_ops(
    plan: &CascadePlan,
    axis: Axis,
    controls: &[usize],
    target: usize,
) -> Result<Vec<GateOp>> {
    if axis == Axis::X {
        return Err(Error::Validation(
            "Gray-code cascade requires a Y or Z rotation axis".into(),
        ));
    }
    if plan.alphas.len() != plan.cnot_controls.len() {
        return Err(Error::Validation("malformed cascade plan".into()));
    }
    let mut ops = Vec::with_capacity(2 * plan.alphas.len());
    for (alpha, &ctrl) in plan.alphas.iter().zip(&plan.cnot_controls) {
        let control = *controls.get(ctrl).ok_or_else(|| {
            Error::Validation(format!("cascade references missing control {ctrl}"))
        })?;
        ops.push(GateOp::rotation(axis, target, *alpha));
        ops.push(GateOp::cnot(control, target));
    }
    Ok(ops)
}

/// Single-controlled rotation as `R(θ/2)`, `CNOT`, `R(−θ/2)`, `CNOT` on the
/// target. For the `X` axis the pattern is run in a frame rotated by
/// `RZ(±π/2)`, since `X` commutes with `RX`.
pub fn decompose_controlled_rotation(
    axis: Axis,
    theta: f64,
    control: usize,
    target: usize,
) -> Result<Vec<GateOp>> {
    if control == target {
        return Err(Error::Validation(format!(
            "control and target are both qubit {control}"
        )));
    }
    let inner_axis = if axis == Axis::X { Axis::Y } else { axis };
    let core = [
        GateOp::rotation(inner_axis, target, theta / 2.0),
        GateOp::cnot(control, target),
        GateOp::rotation(inner_axis, target, -theta / 2.0),
        GateOp::cnot(control, target),
    ];
    Ok(if axis == Axis::X {
        let mut ops = vec![GateOp::rz(target, FRAC_PI_2)];
        ops.extend(core);
        ops.push(GateOp::rz(target, -FRAC_PI_2));
        ops
    } else {
        core.to_vec()
    })
}

/// Doubly-controlled `RY(π)` on `target`, firing when `c1`/`c2` equal the given
/// polarities. On any input whose target is `|0⟩` this acts exactly as a
/// Toffoli; on a target already in `|1⟩` it yields `−|0⟩`.
pub fn ancilla_flip_toffoli(
    c1: usize,
    c2: usize,
    target: usize,
    polarity1: u8,
    polarity2: u8,
) -> Result<Vec<GateOp>> {
    if c1 == c2 || c1 == target || c2 == target {
        return Err(Error::Validation(format!(
            "toffoli qubits must be distinct, got ({c1}, {c2}, {target})"
        )));
    }
    if polarity1 > 1 || polarity2 > 1 {
        return Err(Error::Validation("control polarity must be 0 or 1".into()));
    }
    let plan = angle_transform(&PatternAngles::new(vec![0.0, 0.0, 0.0, FLIP_ANGLE])?)?;
    let wraps: Vec<GateOp> = [(c1, polarity1), (c2, polarity2)]
        .into_iter()
        .filter(|(_, p)| *p == 0)
        .map(|(q, _)| GateOp::x(q))
        .collect();
    let mut ops = wraps.clone();
    ops.extend(cascade_ops(&plan, Axis::Y, &[c1, c2], target)?);
    ops.extend(wraps);
    Ok(ops)
}

/// Native (undecomposed) form of [`ancilla_flip_toffoli`].
pub fn ancilla_flip_native(
    c1: usize,
    c2: usize,
    target: usize,
    polarity1: u8,
    polarity2: u8,
) -> GateOp {
    GateOp::ccry(
        Control {
            qubit: c1,
            polarity: polarity1,
        },
        Control {
            qubit: c2,
            polarity: polarity2,
        },
        target,
        FLIP_ANGLE,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{unitary_of, StateVector};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    type CMat = DMatrix<Complex64>;

    fn max_dev(a: &CMat, b: &CMat) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Deviation after removing the global phase that best aligns `a` with `b`.
    fn dev_up_to_phase(a: &CMat, b: &CMat) -> f64 {
        let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        max_dev(&a.map(|x| x * phase), b)
    }

    #[test]
    fn zero_angle_controlled_rotation_is_identity() {
        let ops = decompose_controlled_rotation(Axis::Y, 0.0, 0, 1).unwrap();
        let u = unitary_of(&ops, 2).unwrap();
        assert!(max_dev(&u, &CMat::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn controlled_rotations_match_native() {
        for (axis, theta) in [(Axis::Y, PI), (Axis::Z, 1.234), (Axis::X, -0.77)] {
            let ops = decompose_controlled_rotation(axis, theta, 0, 1).unwrap();
            let ideal = unitary_of(&[GateOp::controlled(axis, Control::on_one(0), 1, theta)], 2)
                .unwrap();
            let got = unitary_of(&ops, 2).unwrap();
            assert!(dev_up_to_phase(&got, &ideal) < 1e-12, "{axis:?}");
        }
        assert!(decompose_controlled_rotation(Axis::Y, 1.0, 2, 2).is_err());
    }

    #[test]
    fn transform_of_trivial_patterns() {
        let plan = angle_transform(&PatternAngles::new(vec![0.0; 4]).unwrap()).unwrap();
        assert_eq!(plan.alphas, vec![0.0; 4]);
        let phi = 0.37;
        let plan = angle_transform(&PatternAngles::new(vec![phi; 4]).unwrap()).unwrap();
        assert!((plan.alphas[0] - phi).abs() < 1e-15);
        assert!(plan.alphas[1..].iter().all(|a| a.abs() < 1e-15));
        assert_eq!(plan.cnot_controls, vec![1, 0, 1, 0]);
        assert!(PatternAngles::new(vec![0.0; 8]).is_err());
    }

    #[test]
    fn toffoli_flips_satisfied_ancilla() {
        let ops = ancilla_flip_toffoli(0, 1, 2, 1, 1).unwrap();
        let mut s = StateVector::new(3).unwrap();
        s.apply(&GateOp::x(0)).unwrap();
        s.apply(&GateOp::x(1)).unwrap();
        s.apply_all(&ops).unwrap();
        assert!((s.amplitudes()[0b111] - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        let mut s = StateVector::new(3).unwrap();
        s.apply(&GateOp::x(0)).unwrap();
        s.apply_all(&ops).unwrap();
        assert!((s.amplitudes()[0b100] - Complex64::new(1.0, 0.0)).norm() < 1e-12);

        assert!(ancilla_flip_toffoli(0, 0, 2, 1, 1).is_err());
        assert!(ancilla_flip_toffoli(0, 1, 1, 1, 1).is_err());
    }

    #[test]
    fn native_and_decomposed_toffoli_agree() {
        for p1 in 0..2 {
            for p2 in 0..2 {
                let dec = unitary_of(&ancilla_flip_toffoli(2, 0, 1, p1, p2).unwrap(), 3).unwrap();
                let nat = unitary_of(&[ancilla_flip_native(2, 0, 1, p1, p2)], 3).unwrap();
                assert!(max_dev(&dec, &nat) < 1e-12);
            }
        }
    }
}

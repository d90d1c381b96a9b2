//! Dense statevector simulation.
//!
//! Basis index convention: qubit 0 is the most significant bit, so for an
//! `n`-qubit register the basis index is `m = Σ_i b_i · 2^(n−1−i)`. Rotations
//! follow `R_A(θ) = exp(−iθA/2)`.
//!
//! The simulator tracks which qubits may carry a `|1⟩` component. A qubit that
//! has never been the target of a non-diagonal gate (and was zero in the
//! initial amplitudes) is known to be exactly `|0⟩`, so gate kernels only visit
//! the amplitudes that can be nonzero. This is exact: the skipped amplitudes
//! are identically zero before and after every gate.

use arrayvec::ArrayVec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 13;
/// Largest register for which [`unitary_of`] will build a full matrix.
pub const ORACLE_MAX_QUBITS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    CNOT,
    CRX,
    CRY,
    CRZ,
    CCRY,
    X,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::CNOT,
        GateKind::CRX,
        GateKind::CRY,
        GateKind::CRZ,
        GateKind::CCRY,
        GateKind::X,
    ];

    pub fn num_controls(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::X => 0,
            GateKind::CNOT | GateKind::CRX | GateKind::CRY | GateKind::CRZ => 1,
            GateKind::CCRY => 2,
        }
    }

    /// Rotation axis, or `None` for the fixed gates `X` and `CNOT`.
    pub fn axis(self) -> Option<Axis> {
        match self {
            GateKind::RX | GateKind::CRX => Some(Axis::X),
            GateKind::RY | GateKind::CRY | GateKind::CCRY => Some(Axis::Y),
            GateKind::RZ | GateKind::CRZ => Some(Axis::Z),
            GateKind::CNOT | GateKind::X => None,
        }
    }

    pub fn takes_angle(self) -> bool {
        self.axis().is_some()
    }

    /// Uncontrolled single-qubit rotation (`RX`, `RY`, `RZ`).
    pub fn is_bare_rotation(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    pub fn rotation(axis: Axis) -> GateKind {
        match axis {
            Axis::X => GateKind::RX,
            Axis::Y => GateKind::RY,
            Axis::Z => GateKind::RZ,
        }
    }

    pub fn controlled_rotation(axis: Axis) -> GateKind {
        match axis {
            Axis::X => GateKind::CRX,
            Axis::Y => GateKind::CRY,
            Axis::Z => GateKind::CRZ,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CNOT => "CNOT",
            GateKind::CRX => "CRX",
            GateKind::CRY => "CRY",
            GateKind::CRZ => "CRZ",
            GateKind::CCRY => "CCRY",
            GateKind::X => "X",
        }
    }
}

/// A control qubit and the value (0 or 1) it must hold for the gate to act.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub polarity: u8,
}

impl Control {
    pub fn on_one(qubit: usize) -> Self {
        Control { qubit, polarity: 1 }
    }

    pub fn on_zero(qubit: usize) -> Self {
        Control { qubit, polarity: 0 }
    }
}

/// One primitive gate instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub controls: ArrayVec<Control, 2>,
    /// Rotation angle in radians; `None` for `X` and `CNOT`.
    pub angle: Option<f64>,
}

impl GateOp {
    pub fn rotation(axis: Axis, target: usize, angle: f64) -> Self {
        GateOp {
            kind: GateKind::rotation(axis),
            target,
            controls: ArrayVec::new(),
            angle: Some(angle),
        }
    }

    pub fn rx(target: usize, angle: f64) -> Self {
        Self::rotation(Axis::X, target, angle)
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self::rotation(Axis::Y, target, angle)
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self::rotation(Axis::Z, target, angle)
    }

    pub fn x(target: usize) -> Self {
        GateOp {
            kind: GateKind::X,
            target,
            controls: ArrayVec::new(),
            angle: None,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        let mut controls = ArrayVec::new();
        controls.push(Control::on_one(control));
        GateOp {
            kind: GateKind::CNOT,
            target,
            controls,
            angle: None,
        }
    }

    pub fn controlled(axis: Axis, control: Control, target: usize, angle: f64) -> Self {
        let mut controls = ArrayVec::new();
        controls.push(control);
        GateOp {
            kind: GateKind::controlled_rotation(axis),
            target,
            controls,
            angle: Some(angle),
        }
    }

    pub fn ccry(c1: Control, c2: Control, target: usize, angle: f64) -> Self {
        let mut controls = ArrayVec::new();
        controls.push(c1);
        controls.push(c2);
        GateOp {
            kind: GateKind::CCRY,
            target,
            controls,
            angle: Some(angle),
        }
    }

    pub fn with_angle(&self, angle: f64) -> Self {
        let mut op = self.clone();
        op.angle = Some(angle);
        op
    }

    /// Every qubit this gate reads or writes.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.controls
            .iter()
            .map(|c| c.qubit)
            .chain(std::iter::once(self.target))
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.controls.len() != self.kind.num_controls() {
            return Err(Error::Validation(format!(
                "{} expects {} control(s), got {}",
                self.kind.name(),
                self.kind.num_controls(),
                self.controls.len()
            )));
        }
        if self.kind.takes_angle() != self.angle.is_some() {
            return Err(Error::Validation(format!(
                "{} angle presence mismatch",
                self.kind.name()
            )));
        }
        if let Some(a) = self.angle {
            if !a.is_finite() {
                return Err(Error::Validation(format!("non-finite angle {a}")));
            }
        }
        if self.target >= num_qubits {
            return Err(Error::Validation(format!(
                "target qubit {} out of range for {num_qubits} qubits",
                self.target
            )));
        }
        for (i, c) in self.controls.iter().enumerate() {
            if c.qubit >= num_qubits {
                return Err(Error::Validation(format!(
                    "control qubit {} out of range for {num_qubits} qubits",
                    c.qubit
                )));
            }
            if c.qubit == self.target {
                return Err(Error::Validation(format!(
                    "qubit {} is both control and target",
                    c.qubit
                )));
            }
            if c.polarity > 1 {
                return Err(Error::Validation(format!(
                    "control polarity must be 0 or 1, got {}",
                    c.polarity
                )));
            }
            if self.controls[..i].iter().any(|p| p.qubit == c.qubit) {
                return Err(Error::Validation(format!(
                    "qubit {} used twice as control",
                    c.qubit
                )));
            }
        }
        Ok(())
    }
}

/// 2×2 action on the target qubit, selected once per gate application.
enum Kernel {
    Flip,
    /// `[[c, −s], [s, c]]`
    RealRotation { c: f64, s: f64 },
    /// `diag(d0, d1)`
    Diagonal { d0: Complex64, d1: Complex64 },
    General([[Complex64; 2]; 2]),
}

impl Kernel {
    fn for_gate(kind: GateKind, angle: Option<f64>) -> Kernel {
        let half = angle.unwrap_or(0.0) / 2.0;
        match kind.axis() {
            None => Kernel::Flip,
            Some(Axis::Y) => Kernel::RealRotation {
                c: half.cos(),
                s: half.sin(),
            },
            Some(Axis::Z) => Kernel::Diagonal {
                d0: Complex64::new(half.cos(), -half.sin()),
                d1: Complex64::new(half.cos(), half.sin()),
            },
            Some(Axis::X) => {
                let c = Complex64::new(half.cos(), 0.0);
                let ms = Complex64::new(0.0, -half.sin());
                Kernel::General([[c, ms], [ms, c]])
            }
        }
    }
}

/// Dense complex amplitudes over `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
    /// Bit mask (in basis-index space) of qubits that may hold a `|1⟩` component.
    live: usize,
}

impl StateVector {
    /// The all-zero state `|0…0⟩`.
    pub fn new(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::Config(format!(
                "num_qubits must be in 1..={MAX_QUBITS}, got {num_qubits}"
            )));
        }
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = ONE;
        Ok(StateVector {
            num_qubits,
            amps,
            live: 0,
        })
    }

    /// Takes the given amplitudes verbatim. Length must be a power of two and
    /// the L2 norm within 1e-9 of one.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Validation(format!(
                "amplitude vector length {len} is not a power of two ≥ 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "{num_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit"
            )));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "amplitude vector has norm {norm}, expected 1"
            )));
        }
        let live = amps
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .fold(0usize, |acc, (i, _)| acc | i);
        Ok(StateVector {
            num_qubits,
            amps,
            live,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Basis-index bit belonging to `qubit`.
    #[inline]
    pub fn bit(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Applies `op` in place after validating it against this register.
    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        op.validate(self.num_qubits)?;
        self.apply_unchecked(op);
        Ok(())
    }

    /// Consuming form of [`StateVector::apply`].
    pub fn apply_gate(mut self, op: &GateOp) -> Result<Self> {
        self.apply(op)?;
        Ok(self)
    }

    pub fn apply_all<'a>(&mut self, ops: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for op in ops {
            self.apply(op)?;
        }
        Ok(())
    }

    /// Applies an already-validated gate.
    pub(crate) fn apply_unchecked(&mut self, op: &GateOp) {
        let t_bit = self.bit(op.target);
        let mut ctrl_mask = 0usize;
        let mut ctrl_value = 0usize;
        for c in &op.controls {
            let b = self.bit(c.qubit);
            ctrl_mask |= b;
            if c.polarity == 1 {
                ctrl_value |= b;
            }
        }
        // A control required to be 1 on a qubit that is exactly |0⟩ never fires.
        if ctrl_value & !self.live != 0 {
            return;
        }
        let free = self.live & !t_bit & !ctrl_mask;
        let amps = &mut self.amps;
        match Kernel::for_gate(op.kind, op.angle) {
            Kernel::Flip => {
                for_each_submask(free, |sub| {
                    let i0 = sub | ctrl_value;
                    amps.swap(i0, i0 | t_bit);
                });
                self.live |= t_bit;
            }
            Kernel::RealRotation { c, s } => {
                for_each_submask(free, |sub| {
                    let i0 = sub | ctrl_value;
                    let i1 = i0 | t_bit;
                    let a0 = amps[i0];
                    let a1 = amps[i1];
                    amps[i0] = a0 * c - a1 * s;
                    amps[i1] = a0 * s + a1 * c;
                });
                self.live |= t_bit;
            }
            Kernel::Diagonal { d0, d1 } => {
                for_each_submask(free, |sub| {
                    let i0 = sub | ctrl_value;
                    let i1 = i0 | t_bit;
                    amps[i0] *= d0;
                    amps[i1] *= d1;
                });
            }
            Kernel::General(m) => {
                for_each_submask(free, |sub| {
                    let i0 = sub | ctrl_value;
                    let i1 = i0 | t_bit;
                    let a0 = amps[i0];
                    let a1 = amps[i1];
                    amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                    amps[i1] = m[1][0] * a0 + m[1][1] * a1;
                });
                self.live |= t_bit;
            }
        }
    }

    /// Marginal probability that `qubit` reads 1. Exact, summed in ascending
    /// basis-index order.
    pub fn probability_one(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Validation(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        let b = self.bit(qubit);
        if self.live & b == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for_each_submask(self.live & !b, |sub| {
            total += self.amps[sub | b].norm_sqr();
        });
        Ok(total)
    }
}

/// Visits every submask of `mask` in ascending order, starting with 0.
#[inline(always)]
fn for_each_submask(mask: usize, mut f: impl FnMut(usize)) {
    let mut sub = 0usize;
    loop {
        f(sub);
        if sub == mask {
            break;
        }
        sub = sub.wrapping_sub(mask) & mask;
    }
}

/// Full matrix of a gate sequence; column `k` is the sequence applied to `|k⟩`.
pub fn unitary_of(ops: &[GateOp], num_qubits: usize) -> Result<DMatrix<Complex64>> {
    if num_qubits == 0 || num_qubits > ORACLE_MAX_QUBITS {
        return Err(Error::Config(format!(
            "unitary_of supports 1..={ORACLE_MAX_QUBITS} qubits, got {num_qubits}"
        )));
    }
    for op in ops {
        op.validate(num_qubits)?;
    }
    let dim = 1usize << num_qubits;
    let mut u = DMatrix::from_element(dim, dim, ZERO);
    for k in 0..dim {
        let mut basis = vec![ZERO; dim];
        basis[k] = ONE;
        let mut state = StateVector::from_amplitudes(basis)?;
        for op in ops {
            state.apply_unchecked(op);
        }
        for (r, a) in state.amps.iter().enumerate() {
            u[(r, k)] = *a;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn new_state_is_vacuum() {
        assert_eq!(StateVector::new(1).unwrap().amplitudes(), &[c(1.0), c(0.0)]);
        assert_eq!(
            StateVector::new(2).unwrap().amplitudes(),
            &[c(1.0), c(0.0), c(0.0), c(0.0)]
        );
        assert!(matches!(StateVector::new(14), Err(Error::Config(_))));
        assert!(matches!(StateVector::new(0), Err(Error::Config(_))));
    }

    #[test]
    fn from_amplitudes_checks_shape_and_norm() {
        let s = StateVector::from_amplitudes(vec![c(1.0), c(0.0)]).unwrap();
        assert_eq!(s, StateVector::new(1).unwrap());

        let s = StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();
        assert!((s.probability_one(0).unwrap() - 0.5).abs() < 1e-15);

        assert!(matches!(
            StateVector::from_amplitudes(vec![c(0.9), c(0.0)]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            StateVector::from_amplitudes(vec![c(1.0), c(0.0), c(0.0)]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn ry_pi_flips_zero() {
        let s = StateVector::new(1)
            .unwrap()
            .apply_gate(&GateOp::ry(0, PI))
            .unwrap();
        assert!(close(s.amplitudes(), &[c(0.0), c(1.0)], 1e-15));
    }

    #[test]
    fn cnot_truth_table() {
        // |10⟩ → |11⟩
        let s = StateVector::new(2)
            .unwrap()
            .apply_gate(&GateOp::x(0))
            .unwrap()
            .apply_gate(&GateOp::cnot(0, 1))
            .unwrap();
        assert_eq!(s.amplitudes()[0b11], c(1.0));
    }

    #[test]
    fn polarity_zero_control_unsatisfied() {
        let s = StateVector::new(2).unwrap().apply_gate(&GateOp::x(0)).unwrap();
        let before = s.clone();
        let after = s
            .apply_gate(&GateOp::controlled(Axis::Y, Control::on_zero(0), 1, 1.1))
            .unwrap();
        assert_eq!(after.amplitudes(), before.amplitudes());
    }

    #[test]
    fn bell_marginal() {
        let s = StateVector::new(2)
            .unwrap()
            .apply_gate(&GateOp::ry(0, PI / 2.0))
            .unwrap()
            .apply_gate(&GateOp::cnot(0, 1))
            .unwrap();
        assert!((s.probability_one(0).unwrap() - 0.5).abs() < 1e-15);
        assert!((s.probability_one(1).unwrap() - 0.5).abs() < 1e-15);
        let vac = StateVector::new(3).unwrap();
        for q in 0..3 {
            assert_eq!(vac.probability_one(q).unwrap(), 0.0);
        }
        assert!(vac.probability_one(3).is_err());
    }

    #[test]
    fn unitary_of_examples() {
        let u = unitary_of(&[GateOp::x(0)], 1).unwrap();
        assert_eq!(u[(0, 1)], c(1.0));
        assert_eq!(u[(1, 0)], c(1.0));
        assert_eq!(u[(0, 0)], c(0.0));

        let id = unitary_of(&[], 2).unwrap();
        assert_eq!(id, DMatrix::identity(4, 4));

        let u = unitary_of(&[GateOp::cnot(0, 1)], 2).unwrap();
        let mut expected = DMatrix::<Complex64>::identity(4, 4);
        expected.swap_columns(2, 3);
        assert_eq!(u, expected);

        assert!(matches!(unitary_of(&[], 7), Err(Error::Config(_))));
    }

    #[test]
    fn validation_rejects_bad_indices() {
        let mut s = StateVector::new(2).unwrap();
        assert!(s.apply(&GateOp::ry(2, 0.1)).is_err());
        assert!(s.apply(&GateOp::cnot(1, 1)).is_err());
        assert!(s.apply(&GateOp::cnot(5, 0)).is_err());
        let mut bad = GateOp::ry(0, 0.1);
        bad.angle = None;
        assert!(s.apply(&bad).is_err());
    }

    #[test]
    fn inactive_control_skips_work_but_matches_dense() {
        // Same gates applied to a state whose live mask is full give the same answer.
        let ops = [
            GateOp::ry(2, 0.7),
            GateOp::controlled(Axis::X, Control::on_one(0), 1, 0.4),
            GateOp::controlled(Axis::Z, Control::on_zero(0), 2, 1.3),
            GateOp::cnot(2, 0),
            GateOp::ccry(Control::on_one(0), Control::on_zero(1), 2, 2.1),
        ];
        let mut sparse = StateVector::new(3).unwrap();
        let mut dense = StateVector::new(3).unwrap();
        dense.live = 0b111;
        for op in &ops {
            sparse.apply(op).unwrap();
            dense.apply(op).unwrap();
        }
        assert!(close(sparse.amplitudes(), dense.amplitudes(), 0.0));
    }
}

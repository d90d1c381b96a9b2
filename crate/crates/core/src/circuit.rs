//! Parameterized circuits with a shared parameter table.
//!
//! Each op is a gate template; a parameterized op carries a [`ParamRef`] and
//! its resolved angle is `coefficient · θ[param_index] + offset`. Ops are
//! tagged with the stage that produced them so structure can be inspected
//! and dumped.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decompose::{angle_transform, decompose_controlled_rotation, PatternAngles};
use crate::error::{Error, Result};
use crate::statevector::{Axis, Control, GateKind, GateOp, StateVector, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRef {
    pub param_index: usize,
    pub coefficient: f64,
    pub offset: f64,
}

impl ParamRef {
    pub fn new(param_index: usize) -> Self {
        ParamRef {
            param_index,
            coefficient: 1.0,
            offset: 0.0,
        }
    }

    #[inline]
    pub fn resolve(&self, theta: &[f64]) -> f64 {
        self.coefficient * theta[self.param_index] + self.offset
    }

    fn scaled(&self, factor: f64) -> Self {
        ParamRef {
            param_index: self.param_index,
            coefficient: self.coefficient * factor,
            offset: self.offset * factor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Filter4,
    Filter3,
    Filter2,
    Conv,
    Pool1,
    Regular,
    Pool2,
    Final,
    Readout,
    Other,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Filter4 => "f4",
            Stage::Filter3 => "f3",
            Stage::Filter2 => "f2",
            Stage::Conv => "conv",
            Stage::Pool1 => "pool1",
            Stage::Regular => "regular",
            Stage::Pool2 => "pool2",
            Stage::Final => "final",
            Stage::Readout => "readout",
            Stage::Other => "other",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitOp {
    /// Gate template. For parameterized ops the stored angle is a placeholder.
    pub gate: GateOp,
    pub param: Option<ParamRef>,
    pub stage: Stage,
    /// Sublayer within a filter layer, or layer index for regular layers.
    pub sublayer: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit {
    num_qubits: usize,
    ops: Vec<CircuitOp>,
    num_params: usize,
    data_qubits: Vec<usize>,
    ancilla_qubits: Vec<usize>,
    virtual_qubit: Option<usize>,
    readout: Vec<usize>,
    arch_digest: String,
}

/// Qubit roles passed to [`CircuitBuilder::finish`].
#[derive(Clone, Debug, Default)]
pub struct QubitRoles {
    pub data: Vec<usize>,
    pub ancillas: Vec<usize>,
    pub virtual_qubit: Option<usize>,
    pub readout: Vec<usize>,
}

pub struct CircuitBuilder {
    num_qubits: usize,
    ops: Vec<CircuitOp>,
    num_params: usize,
    stage: Stage,
    sublayer: usize,
}

impl CircuitBuilder {
    pub fn new(num_qubits: usize) -> Self {
        CircuitBuilder {
            num_qubits,
            ops: Vec::new(),
            num_params: 0,
            stage: Stage::Other,
            sublayer: 0,
        }
    }

    pub fn stage(&mut self, stage: Stage, sublayer: usize) -> &mut Self {
        self.stage = stage;
        self.sublayer = sublayer;
        self
    }

    pub fn new_param(&mut self) -> usize {
        self.num_params += 1;
        self.num_params - 1
    }

    pub fn new_params<const N: usize>(&mut self) -> [usize; N] {
        std::array::from_fn(|_| self.new_param())
    }

    pub fn push(&mut self, gate: GateOp, param: Option<ParamRef>) -> &mut Self {
        self.ops.push(CircuitOp {
            gate,
            param,
            stage: self.stage,
            sublayer: self.sublayer,
        });
        self
    }

    pub fn rotation(&mut self, axis: Axis, target: usize, param: usize) -> &mut Self {
        self.push(GateOp::rotation(axis, target, 0.0), Some(ParamRef::new(param)))
    }

    pub fn controlled(
        &mut self,
        axis: Axis,
        control: Control,
        target: usize,
        param: usize,
    ) -> &mut Self {
        self.push(
            GateOp::controlled(axis, control, target, 0.0),
            Some(ParamRef::new(param)),
        )
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.push(GateOp::cnot(control, target), None)
    }

    pub fn fixed(&mut self, gate: GateOp) -> &mut Self {
        self.push(gate, None)
    }

    pub fn finish(self, roles: QubitRoles) -> Result<ParamCircuit> {
        ParamCircuit::new(self.num_qubits, self.ops, self.num_params, roles)
    }
}

impl ParamCircuit {
    pub fn new(
        num_qubits: usize,
        ops: Vec<CircuitOp>,
        num_params: usize,
        roles: QubitRoles,
    ) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::Config(format!(
                "circuit needs 1..={MAX_QUBITS} qubits, got {num_qubits}"
            )));
        }
        let mut referenced = vec![false; num_params];
        for (i, op) in ops.iter().enumerate() {
            op.gate
                .validate(num_qubits)
                .map_err(|e| Error::Validation(format!("op {i}: {e}")))?;
            if let Some(p) = op.param {
                if !op.gate.kind.takes_angle() {
                    return Err(Error::Validation(format!(
                        "op {i}: {} cannot be parameterized",
                        op.gate.kind.name()
                    )));
                }
                if p.param_index >= num_params {
                    return Err(Error::Validation(format!(
                        "op {i}: parameter index {} ≥ {num_params}",
                        p.param_index
                    )));
                }
                if p.coefficient == 0.0 || !p.coefficient.is_finite() || !p.offset.is_finite() {
                    return Err(Error::Validation(format!(
                        "op {i}: invalid parameter reference {p:?}"
                    )));
                }
                referenced[p.param_index] = true;
            }
        }
        if let Some(unused) = referenced.iter().position(|r| !r) {
            return Err(Error::Validation(format!(
                "parameter {unused} is not referenced by any op"
            )));
        }
        let all_roles = roles
            .data
            .iter()
            .chain(&roles.ancillas)
            .chain(roles.virtual_qubit.iter())
            .chain(&roles.readout);
        if let Some(q) = all_roles.into_iter().find(|&&q| q >= num_qubits) {
            return Err(Error::Validation(format!("role qubit {q} out of range")));
        }
        if let Some(first_readout) = ops.iter().position(|op| op.stage == Stage::Readout) {
            if ops[first_readout..].iter().any(|op| op.stage != Stage::Readout) {
                return Err(Error::Validation(
                    "readout ops must form the tail of the circuit".into(),
                ));
            }
        }
        for (i, op) in ops.iter().enumerate() {
            if op.stage != Stage::Readout && op.gate.qubits().any(|q| roles.readout.contains(&q)) {
                return Err(Error::Validation(format!(
                    "op {i} touches a readout qubit before the readout stage"
                )));
            }
        }
        let mut circuit = ParamCircuit {
            num_qubits,
            ops,
            num_params,
            data_qubits: roles.data,
            ancilla_qubits: roles.ancillas,
            virtual_qubit: roles.virtual_qubit,
            readout: roles.readout,
            arch_digest: String::new(),
        };
        circuit.arch_digest = digest_hex(&circuit.dump());
        Ok(circuit)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.num_params
    }

    pub fn data_qubits(&self) -> &[usize] {
        &self.data_qubits
    }

    pub fn ancilla_qubits(&self) -> &[usize] {
        &self.ancilla_qubits
    }

    pub fn virtual_qubit(&self) -> Option<usize> {
        self.virtual_qubit
    }

    pub fn readout(&self) -> &[usize] {
        &self.readout
    }

    /// SHA-256 (hex) of [`ParamCircuit::dump`].
    pub fn arch_digest(&self) -> &str {
        &self.arch_digest
    }

    fn roles(&self) -> QubitRoles {
        QubitRoles {
            data: self.data_qubits.clone(),
            ancillas: self.ancilla_qubits.clone(),
            virtual_qubit: self.virtual_qubit,
            readout: self.readout.clone(),
        }
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params {
            return Err(Error::Validation(format!(
                "expected {} parameters, got {}",
                self.num_params,
                theta.len()
            )));
        }
        Ok(())
    }

    /// Resolves every parameterized template against `theta`, preserving order.
    pub fn bind_parameters(&self, theta: &[f64]) -> Result<Vec<GateOp>> {
        self.check_theta(theta)?;
        Ok(self
            .ops
            .iter()
            .map(|op| match op.param {
                Some(p) => op.gate.with_angle(p.resolve(theta)),
                None => op.gate.clone(),
            })
            .collect())
    }

    /// Runs the bound circuit on `state`.
    pub fn simulate(&self, theta: &[f64], state: &mut StateVector) -> Result<()> {
        if state.num_qubits() != self.num_qubits {
            return Err(Error::Validation(format!(
                "state has {} qubits, circuit needs {}",
                state.num_qubits(),
                self.num_qubits
            )));
        }
        for op in self.bind_parameters(theta)? {
            state.apply_unchecked(&op);
        }
        Ok(())
    }

    /// True when every parameterized op is an uncontrolled rotation, the
    /// precondition for the parameter-shift rule.
    pub fn is_shift_ready(&self) -> bool {
        self.ops
            .iter()
            .all(|op| op.param.is_none() || op.gate.kind.is_bare_rotation())
    }

    /// True when the circuit contains only `RX`, `RY`, `RZ`, `CNOT` and `X`.
    pub fn is_fully_lowered(&self) -> bool {
        self.ops.iter().all(|op| {
            op.gate.kind.is_bare_rotation()
                || matches!(op.gate.kind, GateKind::CNOT | GateKind::X)
        })
    }

    /// Plain-text listing, one op per line. Stable for a given structure.
    pub fn dump(&self) -> String {
        let join = |qs: &[usize]| {
            if qs.is_empty() {
                "-".to_string()
            } else {
                qs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "qubits {}", self.num_qubits);
        let _ = writeln!(out, "params {}", self.num_params);
        let _ = writeln!(out, "data {}", join(&self.data_qubits));
        let _ = writeln!(out, "ancilla {}", join(&self.ancilla_qubits));
        let _ = writeln!(
            out,
            "virtual {}",
            self.virtual_qubit.map_or("-".to_string(), |q| q.to_string())
        );
        let _ = writeln!(out, "readout {}", join(&self.readout));
        for op in &self.ops {
            let controls = if op.gate.controls.is_empty() {
                "-".to_string()
            } else {
                op.gate
                    .controls
                    .iter()
                    .map(|c| format!("{}:{}", c.qubit, c.polarity))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let angle = match (op.param, op.gate.angle) {
                (Some(p), _) => format!("p{}*{}+{}", p.param_index, p.coefficient, p.offset),
                (None, Some(a)) => format!("={a}"),
                (None, None) => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{}.{} {} c={} t={} {}",
                op.stage.name(),
                op.sublayer,
                op.gate.kind.name(),
                controls,
                op.gate.target,
                angle
            );
        }
        out
    }
}

pub(crate) fn digest_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn polarity_wraps(controls: &[Control]) -> Vec<GateOp> {
    controls
        .iter()
        .filter(|c| c.polarity == 0)
        .map(|c| GateOp::x(c.qubit))
        .collect()
}

fn lower_op(op: &CircuitOp, keep_fixed_controlled: bool, out: &mut Vec<CircuitOp>) {
    let mut emit = |gate: GateOp, param: Option<ParamRef>| {
        out.push(CircuitOp {
            gate,
            param,
            stage: op.stage,
            sublayer: op.sublayer,
        })
    };
    let kind = op.gate.kind;
    let simple = kind.is_bare_rotation() || matches!(kind, GateKind::CNOT | GateKind::X);
    if simple || (keep_fixed_controlled && op.param.is_none()) {
        emit(op.gate.clone(), op.param);
        return;
    }
    let axis = kind.axis().expect("controlled rotation has an axis");
    let angle = op.gate.angle.unwrap_or(0.0);
    let wraps = polarity_wraps(&op.gate.controls);
    for w in &wraps {
        emit(w.clone(), None);
    }
    match kind {
        GateKind::CRX | GateKind::CRY | GateKind::CRZ => {
            let control = op.gate.controls[0].qubit;
            let seq = decompose_controlled_rotation(axis, angle, control, op.gate.target)
                .expect("validated op has distinct control and target");
            // The two half-angle rotations carry the parameter; frame changes do not.
            let mut half_sign = 1.0;
            for gate in seq {
                let is_half = gate.kind.is_bare_rotation()
                    && !(axis == Axis::X && gate.kind == GateKind::RZ);
                let param = if is_half {
                    let p = op.param.map(|p| p.scaled(0.5 * half_sign));
                    half_sign = -half_sign;
                    p
                } else {
                    None
                };
                emit(gate, param);
            }
        }
        GateKind::CCRY => {
            let controls = [op.gate.controls[0].qubit, op.gate.controls[1].qubit];
            // After the polarity wraps the rotation fires on pattern 11 only;
            // the cascade angles are linear in that one angle.
            let unit = PatternAngles::new(vec![0.0, 0.0, 0.0, 1.0]).expect("length 4");
            let plan = angle_transform(&unit).expect("two controls");
            for (&weight, &ctrl) in plan.alphas.iter().zip(&plan.cnot_controls) {
                emit(
                    GateOp::ry(op.gate.target, weight * angle),
                    op.param.map(|p| p.scaled(weight)),
                );
                emit(GateOp::cnot(controls[ctrl], op.gate.target), None);
            }
        }
        _ => unreachable!("simple kinds handled above"),
    }
    for w in wraps {
        emit(w, None);
    }
}

/// Rewrites every controlled rotation as single-qubit rotations and CNOTs.
/// Controlled rotations become the half-angle pattern with parameter
/// coefficients `+1/2` and `−1/2`; `CCRY` becomes the Gray-code cascade.
pub fn lower(circuit: &ParamCircuit) -> Result<ParamCircuit> {
    lower_with(circuit, false)
}

/// Like [`lower`], but keeps unparameterized controlled gates (the output
/// cascade) native. The result is ready for the parameter-shift rule.
pub fn lower_parameterized(circuit: &ParamCircuit) -> Result<ParamCircuit> {
    lower_with(circuit, true)
}

fn lower_with(circuit: &ParamCircuit, keep_fixed_controlled: bool) -> Result<ParamCircuit> {
    let mut ops = Vec::with_capacity(circuit.ops.len() * 4);
    for op in &circuit.ops {
        lower_op(op, keep_fixed_controlled, &mut ops);
    }
    ParamCircuit::new(circuit.num_qubits, ops, circuit.num_params, circuit.roles())
}
